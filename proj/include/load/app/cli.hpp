#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace load::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalid = 2;    // config, dimension, path or grid errors
inline constexpr int kExitNonFinite = 3;  // training produced a non-finite loss or gradient

// Missing inputs or unwritable outputs.
class PathError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Subcommands: train, eval, probe, dataset, report. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace load::app
