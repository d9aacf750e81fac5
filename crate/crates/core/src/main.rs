fn main() { std::process::exit(mil_audit::harness::cli::dispatch(std::env::args_os())); }
