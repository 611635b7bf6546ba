#include <iostream>

#include "brw/cli.hpp"

int main(int argc, char** argv) { return brw::run_cli(argc, argv, std::cout, std::cerr); }
