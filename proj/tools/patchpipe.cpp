#include <iostream>

#include "patchpipe/cli.hpp"

int main(int argc, char** argv) { return patchpipe::run_cli(argc, argv, std::cout, std::cerr); }
