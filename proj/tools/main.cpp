#include "divfuse/cli.hpp"

int main(int argc, char** argv) {
    return divfuse::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
