#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return cot3d::cli::run(argc, argv, std::cout, std::cerr); }
