#include <iostream>

#include "olar/cli.hpp"

int main(int argc, char** argv) { return olar::cli::run(argc, argv, std::cout, std::cerr); }
