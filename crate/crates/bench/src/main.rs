use clap::Parser;

fn main() {
    let args = wfext_bench::cli::Args::parse();
    if let Err(e) = wfext_bench::cli::run(&args, &mut std::io::stdout().lock()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
