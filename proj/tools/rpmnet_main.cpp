#include <iostream>

#include "rpmnet/cli.hpp"

int main(int argc, char** argv) { return rpmnet::cli::run(argc, argv, std::cout, std::cerr); }
