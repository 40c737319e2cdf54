#include "gradflow/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return gradflow::cli::run(args, std::cout, std::cerr);
}
