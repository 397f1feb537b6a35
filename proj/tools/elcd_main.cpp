#include <iostream>

#include "elcd/cli/cli.hpp"

int main(int argc, char** argv) {
    return elcd::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
