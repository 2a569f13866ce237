#ifndef PSLIB_REPORT_HPP
#define PSLIB_REPORT_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "pslib/data.hpp"
#include "pslib/eval.hpp"
#include "pslib/smoother.hpp"

namespace pslib {

/// Coefficient labels: "intercept" followed by the covariate names.
std::vector<std::string> coefficient_names(const std::vector<std::string>& covariate_names);

/// One row per interval: interval,start,end and <name>_mean,<name>_q025,<name>_q975
/// per coefficient, from the weighted smoothing particles.
void write_trajectory_csv(std::ostream& out, const SmootherOutput& fit, const IntervalPartition& partition,
                          const std::vector<std::string>& names);

nlohmann::json diagnostics_json(const SmootherOutput& fit, bool include_timing);

/// Smoothing particles as little-endian float64, interval-major: for each
/// interval and particle, the normalized weight followed by the coefficients.
void write_particle_dump(std::ostream& out, const SmootherOutput& fit);

nlohmann::json waic_json(const WaicResult& w);
nlohmann::json ess_json(const EssReport& r, bool include_timing);
nlohmann::json partition_json(const IntervalPartition& partition);

/// Non-finite values become null.
nlohmann::json number_or_null(double v);

}  // namespace pslib

#endif
