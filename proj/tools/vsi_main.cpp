#include <iostream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "vsi/cli.hpp"

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("vsi"));
    std::vector<std::string> args(argv + 1, argv + argc);
    return vsi::cli::run(args, std::cout, std::cerr);
}
