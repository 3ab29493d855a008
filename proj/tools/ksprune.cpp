#include "ksprune/cli.hpp"

int main(int argc, char** argv) { return ksprune::run_cli(argc, argv); }
