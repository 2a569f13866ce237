#ifndef PSLIB_CLI_HPP
#define PSLIB_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pslib/data.hpp"

namespace pslib {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the pslib command-line tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Deterministic train/test split: round(fraction * n) records go to the test
/// set; both sets keep the input order.
std::pair<std::vector<SurvivalRecord>, std::vector<SurvivalRecord>> split_records(
    const std::vector<SurvivalRecord>& records, double fraction, std::uint64_t seed);

}  // namespace pslib

#endif
