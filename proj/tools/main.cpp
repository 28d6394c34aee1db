#include <iostream>
#include <string>
#include <vector>

#include "volterra/cli.hpp"

int main(int argc, char** argv)
{
    return volterra::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
