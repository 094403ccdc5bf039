#include <iostream>

#include "tailmoment/cli.hpp"

int main(int argc, char** argv) { return tailmoment::run_cli(argc, argv, std::cout, std::cerr); }
