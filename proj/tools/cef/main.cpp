#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) { return cef::cli::runCli(argc, argv, std::cout, std::cerr); }
