#pragma once

#include <string>
#include <vector>

#include "owlkit/error.hpp"

namespace owlkit::cli {

/// 0 success, 2 configuration or usage, 3 data or I/O, 4 numeric failure.
int exit_code(ErrorKind kind);

/// Runs one command line (program name first). Never throws.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

} // namespace owlkit::cli
