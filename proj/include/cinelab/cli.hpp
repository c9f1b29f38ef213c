#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cinelab {

// Exit status: 0 success, 1 validation failure, 2 usage error.
// Outputs go under --output, else $CINELAB_OUTPUT_DIR, else ./cinelab-output.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

// "2^-6..2^-10", "2^-8", "0.01" and comma-separated lists of those.
std::vector<double> parse_delta_list(const std::string& text);

}  // namespace cinelab
