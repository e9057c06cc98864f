#include <iostream>

#include "bdt/cli.hpp"

int main(int argc, char** argv) { return bdt::cli::run(argc, argv, std::cout, std::cerr); }
