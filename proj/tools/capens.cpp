#include "capens/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return capens::run_cli(args, std::cout, std::cerr);
}
