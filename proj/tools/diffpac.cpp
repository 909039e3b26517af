#include <iostream>

#include "diffpac/cli.hpp"

int main(int argc, char** argv) {
    return diffpac::cli::main_entry(argc, argv, std::cout, std::cerr);
}
