#include <iostream>
#include <string>
#include <vector>

#include "specrag/service.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return specrag::run_cli(args, std::cout, std::cerr);
}
