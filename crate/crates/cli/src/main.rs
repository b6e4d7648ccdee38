use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    if let Some(threads) = std::env::var("THREADS").ok().and_then(|t| t.parse::<usize>().ok()) {
        rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global().ok();
    }
    let code = dyadml_cli::run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(code as u8)
}
