fn main() {
    std::process::exit(dirac_bohm_cli::main_with(std::env::args_os()));
}
