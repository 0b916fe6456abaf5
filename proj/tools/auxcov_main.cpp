#include "auxcov/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return auxcov::cli::run(argc, argv, std::cout, std::cerr); }
