#include <iostream>

#include "optexec/commands.hpp"

int main(int argc, char** argv) { return optexec::run_cli(argc, argv, std::cout, std::cerr); }
