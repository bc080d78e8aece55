use clap::Parser;

fn main() {
    let cli = chainlb_bench::cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let code = match chainlb_bench::cli::execute(cli, &mut stdout) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            chainlb_bench::cli::EXIT_REJECTED
        }
    };
    let _ = std::io::Write::flush(&mut stdout);
    std::process::exit(code);
}
