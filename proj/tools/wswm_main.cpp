#include <string>
#include <vector>

#include "wswm/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return wswm::cli_main(args);
}
