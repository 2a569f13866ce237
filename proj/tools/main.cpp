#include <iostream>

#include "pslib/cli.hpp"

int main(int argc, char** argv) { return pslib::run_cli(argc, argv, std::cout, std::cerr); }
