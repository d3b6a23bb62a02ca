use std::process::ExitCode;

fn main() -> ExitCode {
    revmono_tool::run(std::env::args_os(), &mut std::io::stdout().lock())
}
