fn main() {
    std::process::exit(ctmc_bench::cli::main_with_args(std::env::args_os()));
}
