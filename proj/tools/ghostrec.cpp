#include <iostream>
#include <string>
#include <vector>

#include "ghostrec/cli/app.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ghostrec::cli::run(args, std::cout, std::cerr);
}
