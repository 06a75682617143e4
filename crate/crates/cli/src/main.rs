fn main() {
    std::process::exit(bicluster_cli::run(std::env::args_os()));
}
