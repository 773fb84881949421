// cxreg command line tool; see `cxreg --help`.

#include <iostream>
#include <string>
#include <vector>

#include "cxreg/cli.hpp"

int main(int argc, char **argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cxreg::run_cli(args, std::cout, std::cerr);
}
