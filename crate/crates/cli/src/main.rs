use clap::Parser;

fn main() {
    let cli = nvmap_cli::Cli::parse();
    match nvmap_cli::run(&cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
