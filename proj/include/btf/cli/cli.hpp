#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "btf/models/config.hpp"

namespace btf::cli {

// Runs one subcommand. argv[0] is the program name. Returns the process exit
// code; diagnostics go to `err` prefixed with the stage name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

// Component breakdown and total, as printed by count-params.
std::string count_params_text(const models::EncoderConfig& config);

// "f32" unless BTF_PRECISION says "f64"; anything else is a ConfigError.
std::string precision();

}  // namespace btf::cli
