#include <iostream>

#include "evoagent/cli.hpp"

int main(int argc, char** argv) { return evoagent::run_cli(argc, argv, std::cout, std::cerr); }
