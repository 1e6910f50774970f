#include <iostream>

#include "load/app/cli.hpp"

int main(int argc, char** argv) { return load::app::run_cli(argc, argv, std::cout, std::cerr); }
