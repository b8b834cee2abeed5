#include <iostream>

#include "colearn/cli.hpp"

int main(int argc, char** argv) { return colearn::cli::run(argc, argv, std::cout, std::cerr); }
