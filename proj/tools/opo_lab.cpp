// SPDX-License-Identifier: Apache-2.0

#include "opo/harness.hpp"

int main(int argc, char** argv) { return opo::cli_main(argc, argv); }
