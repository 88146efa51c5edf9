#include <iostream>

#include "caedp/cli/commands.hpp"

int main(int argc, char** argv) { return caedp::cli::run_cli(argc, argv, std::cout, std::cerr); }
