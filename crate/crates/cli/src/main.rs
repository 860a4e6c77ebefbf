fn main() {
    std::process::exit(ldpfl_cli::app::main_with(std::env::args_os()));
}
