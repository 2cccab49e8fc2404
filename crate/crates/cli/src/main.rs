use std::process::ExitCode;

use mesodyn_cli::{parse_command, run, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cmd = match parse_command(std::env::args().skip(1)) {
        Ok(cmd) => cmd,
        Err(CliError::Info(text)) => {
            print!("{text}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            if !e.to_string().ends_with('\n') {
                eprintln!();
            }
            return ExitCode::from(e.exit_code());
        }
    };
    match run(&cmd) {
        Ok(manifest) => {
            eprintln!(
                "{}: {} output(s) in {} ({:.3} s)",
                manifest.verb,
                manifest.outputs.len(),
                cmd.output_dir.display(),
                manifest.wall_time
            );
            let failed: Vec<&str> = manifest.failures().map(|s| s.name.as_str()).collect();
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed checks: {}", failed.join(", "));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
