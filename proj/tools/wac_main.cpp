#include <iostream>

#include "wac/cli.hpp"

int main(int argc, char** argv) { return wac::cli::run(argc, argv, std::cin, std::cout, std::cerr); }
