#include <iostream>

#include "mfdr_cli.hpp"

int main(int argc, char** argv) {
    return mfdr::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
