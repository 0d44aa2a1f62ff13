#include <iostream>

#include "proxyaudit/cli.hpp"

int main(int argc, char** argv) { return proxyaudit::run_cli(argc, argv, std::cout, std::cerr); }
