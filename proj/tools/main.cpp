#include <logaction/runtime.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    return logaction::run_cli(argc, argv, std::cout, std::cerr);
}
