// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "polyctc/cli/commands.h"

int main(int argc, char **argv) { return polyctc::RunCli(argc, argv, std::cout, std::cerr); }
