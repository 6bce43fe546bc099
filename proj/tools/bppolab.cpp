#include "bppo/cli.hpp"

int main(int argc, char** argv) { return bppo::cli_main(argc, argv); }
