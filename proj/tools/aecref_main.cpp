// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aecref/cli.hpp"

int main(int argc, char** argv) { return aecref::cli::cli_main(argc, argv); }
