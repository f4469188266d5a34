use std::process::ExitCode;

fn main() -> ExitCode {
    ft3d_cli::init_thread_pool();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    ft3d_cli::run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
