#include <iostream>

#include "mtfl/cli.hpp"

int main(int argc, char** argv) { return mtfl::cli::run(argc, argv, std::cout, std::cerr); }
