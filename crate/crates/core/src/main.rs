fn main() {
    std::process::exit(spikeslab::cli::run());
}
