#include "rdepth/cli.hpp"

int main(int argc, char** argv) { return rdepth::cli::main(argc, argv); }
