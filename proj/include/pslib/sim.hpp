#ifndef PSLIB_SIM_HPP
#define PSLIB_SIM_HPP

#include <cstddef>
#include <cstdint>
#include <optional>

#include "pslib/data.hpp"
#include "pslib/types.hpp"

namespace pslib {

// Piecewise exponential data-generating process: x ~ N(0, I_P), covariate
// coefficients follow a Gaussian random walk from zero, the log baseline
// hazard of interval j (1-based) is -11 + log j.
struct DgpConfig {
    std::size_t covariates = 1;  // P
    std::size_t subjects = 1000;  // n
    std::size_t intervals = 26;   // J
    double interval_width = 20.0;
    double censoring = 0.1;  // p_c
    double rw_sd = 0.5;
    std::optional<double> log_baseline;  // replaces the -11 + log j rule when set
    std::uint64_t seed = 0;

    void validate() const;
};

struct Simulation {
    SurvivalDataset data;
    RowMatrix truth;  // J x (P + 1): log baseline, then covariate coefficients
    IntervalPartition partition;
    std::size_t truncated = 0;
};

Simulation simulate_dgp(const DgpConfig& config);

/// The true coefficient path alone (same draws as simulate_dgp).
RowMatrix simulate_truth(const DgpConfig& config);

/// Time t with cumulative hazard H(t) = -log u under piecewise-constant log
/// hazards, one per interval. Returns +inf when the target is not reached by
/// the horizon.
double invert_survival(const Eigen::Ref<const Vector>& log_hazards, const IntervalPartition& partition, double u);

}  // namespace pslib

#endif
