#include "qmfg/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return qmfg::cli::run(argc, argv, std::cout, std::cerr); }
