fn main() {
    std::process::exit(spikelab::main_with(std::env::args_os()));
}
