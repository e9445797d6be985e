#include "aar/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return aar::run_cli(argc, argv, std::cout, std::cerr); }
