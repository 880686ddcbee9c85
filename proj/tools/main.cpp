#include <iostream>

#include "hitlbo/cli.hpp"

int main(int argc, char** argv) { return hitlbo::cli::run_cli(argc, argv, std::cout, std::cerr); }
