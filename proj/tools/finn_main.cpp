#include <iostream>

#include "finn/cli.hpp"

int main(int argc, char** argv) { return finn::cli_main(argc, argv, std::cout, std::cerr); }
