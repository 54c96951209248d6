fn main() { std::process::exit(cartan_kak::cli::dispatch(std::env::args().skip(1).collect())); }
