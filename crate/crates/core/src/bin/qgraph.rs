use std::process::ExitCode;

fn main() -> ExitCode {
    let config = match qgraph::cli::parse_args(std::env::args_os()) {
        Ok(c) => c,
        Err(e) => {
            if e.exit_code == 0 {
                print!("{}", e.message);
            } else {
                eprint!("{}", e.message);
                if !e.message.ends_with('\n') {
                    eprintln!();
                }
            }
            return ExitCode::from(e.exit_code as u8);
        }
    };
    ExitCode::from(qgraph::cli::run(&config) as u8)
}
