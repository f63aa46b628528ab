#include <iostream>

#include "swt/cli.hpp"

int main(int argc, char** argv) { return swt::cli::run(argc, argv, std::cout, std::cerr); }
