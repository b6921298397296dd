#pragma once

#include <string>
#include <vector>

namespace qkg::cli {

// Runs one subcommand; returns the process exit status. Never throws:
// failures print a one-line diagnostic to stderr and return nonzero.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, char** argv);

}  // namespace qkg::cli
