fn main() -> std::process::ExitCode {
    molcomm::cli::run()
}
