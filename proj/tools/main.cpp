// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/cli.hpp"

int main(int argc, char** argv) { return depthdiff::cli::run(argc, argv); }
