// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "binsoinn/cli.hpp"

int main(int argc, char** argv) { return binsoinn::cli::run(argc, argv, std::cout, std::cerr); }
