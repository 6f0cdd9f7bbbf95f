use clap::Parser;

fn main() {
    let args = gsprobe::cli::Cli::parse();
    std::process::exit(gsprobe::cli::main_with(args));
}
