#include <iostream>

#include "sola/cli.hpp"

int main(int argc, char** argv) { return sola::cli::run(argc, argv, std::cout, std::cerr); }
