#include <string>
#include <vector>

#include "diffsurv/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return diffsurv::run_cli(std::move(args));
}
