#include <iostream>

#include "rdt/cli.hpp"

int main(int argc, char** argv) { return rdt::run_cli(argc, argv, std::cout, std::cerr); }
