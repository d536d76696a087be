#include <iostream>

#include "ksg_cli/cli.hpp"

int main(int argc, char** argv) { return ksg::cli::run(argc, argv, std::cout, std::cerr); }
