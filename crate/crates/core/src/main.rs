fn main() {
    std::process::exit(skill_guidance::cli::run(std::env::args_os()));
}
