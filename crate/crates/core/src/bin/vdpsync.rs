use clap::Parser;

fn main() {
    std::process::exit(vdpsync::cli::run(vdpsync::cli::Cli::parse()));
}
