#include <iostream>

#include "ipic/cli.hpp"

int main(int argc, char** argv) { return ipic::cli_dispatch(argc, argv, std::cout, std::cerr); }
