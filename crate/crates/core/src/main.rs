fn main() {
    std::process::exit(autonomy_audit::cli::run());
}
