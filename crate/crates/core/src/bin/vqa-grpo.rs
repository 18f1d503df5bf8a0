fn main() {
    std::process::exit(vqa_grpo::cli::run(std::env::args_os()));
}
