#include <iostream>

#include "sketchy/cli.hpp"

int main(int argc, char** argv) { return sketchy::cli::run(argc, argv, std::cout, std::cerr); }
