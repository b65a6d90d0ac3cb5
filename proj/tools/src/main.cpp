#include <iostream>

#include "mdlsr/cli/commands.hpp"

int main(int argc, char** argv) { return mdlsr::cli::run(argc, argv, std::cout, std::cerr); }
