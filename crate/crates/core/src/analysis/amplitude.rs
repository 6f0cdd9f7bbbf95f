use super::spectrum::parabola_vertex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeMethod {
    /// First local maximum and first local minimum after `t_start`.
    FirstExtrema,
    /// Extremes of the whole window after `t_start`.
    GlobalWindow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeResult {
    pub amplitude: f64,
    pub t_max: f64,
    pub t_min: f64,
    pub method: AmplitudeMethod,
    /// No usable extremum: the series is flat or monotone.
    pub flat: bool,
}

impl AmplitudeResult {
    fn flat(method: AmplitudeMethod) -> Self {
        AmplitudeResult {
            amplitude: 0.0,
            t_max: f64::NAN,
            t_min: f64::NAN,
            method,
            flat: true,
        }
    }
}

fn refine(times: &[f64], values: &[f64], i: usize) -> (f64, f64) {
    parabola_or_point(
        (times[i - 1], values[i - 1]),
        (times[i], values[i]),
        (times[i + 1], values[i + 1]),
    )
}

/// Vertex of the parabola through three samples; falls back to the middle
/// sample when the points are collinear.
fn parabola_or_point(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> (f64, f64) {
    let (x0, y0) = a;
    let (x1, y1) = b;
    let (x2, y2) = c;
    let d0 = (y1 - y0) / (x1 - x0);
    let d1 = (y2 - y1) / (x2 - x1);
    let curv = (d1 - d0) / (x2 - x0);
    if curv == 0.0 || !curv.is_finite() {
        return b;
    }
    if curv > 0.0 {
        return parabola_vertex(a, b, c);
    }
    let (x, y) = parabola_vertex((x0, -y0), (x1, -y1), (x2, -y2));
    (x, -y)
}

/// Half the peak-to-trough excursion of `values` after `t_start`.
pub fn extract_amplitude(
    times: &[f64],
    values: &[f64],
    t_start: f64,
    method: AmplitudeMethod,
) -> AmplitudeResult {
    assert_eq!(times.len(), values.len(), "series length mismatch");
    let start = times.partition_point(|&t| t < t_start);
    let (ts, vs) = (&times[start..], &values[start..]);
    if vs.len() < 3 {
        return AmplitudeResult::flat(method);
    }
    match method {
        AmplitudeMethod::FirstExtrema => {
            let mut first_max = None;
            let mut first_min = None;
            for i in 1..vs.len() - 1 {
                let (a, b, c) = (vs[i - 1], vs[i], vs[i + 1]);
                if first_max.is_none() && b > a && b >= c {
                    first_max = Some(i);
                }
                if first_min.is_none() && b < a && b <= c {
                    first_min = Some(i);
                }
                if first_max.is_some() && first_min.is_some() {
                    break;
                }
            }
            let (Some(imax), Some(imin)) = (first_max, first_min) else {
                return AmplitudeResult::flat(method);
            };
            let (t_max, v_max) = refine(ts, vs, imax);
            let (t_min, v_min) = refine(ts, vs, imin);
            AmplitudeResult {
                amplitude: ((v_max - v_min) / 2.0).abs(),
                t_max,
                t_min,
                method,
                flat: false,
            }
        }
        AmplitudeMethod::GlobalWindow => {
            let (imax, imin) = vs.iter().enumerate().fold((0, 0), |(hi, lo), (i, &v)| {
                (if v > vs[hi] { i } else { hi }, if v < vs[lo] { i } else { lo })
            });
            if vs[imax] == vs[imin] {
                return AmplitudeResult::flat(method);
            }
            let interior = |i: usize| i > 0 && i + 1 < vs.len();
            let (t_max, v_max) = if interior(imax) { refine(ts, vs, imax) } else { (ts[imax], vs[imax]) };
            let (t_min, v_min) = if interior(imin) { refine(ts, vs, imin) } else { (ts[imin], vs[imin]) };
            AmplitudeResult {
                amplitude: (v_max - v_min) / 2.0,
                t_max,
                t_min,
                method,
                flat: false,
            }
        }
    }
}
