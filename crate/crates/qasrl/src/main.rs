fn main() {
    std::process::exit(qasrl::cli::main(std::env::args_os()));
}
