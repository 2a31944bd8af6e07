#include <iostream>

#include "factorlasso/cli.hpp"

int main(int argc, char** argv)
{
    return factorlasso::cli::run(argc, argv, std::cout, std::cerr);
}
