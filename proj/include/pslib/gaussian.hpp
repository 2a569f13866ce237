#ifndef PSLIB_GAUSSIAN_HPP
#define PSLIB_GAUSSIAN_HPP

#include <cstddef>

#include "pslib/rng.hpp"
#include "pslib/types.hpp"

namespace pslib {

/// Counters for the numerical safety nets. Each worker keeps its own copy;
/// copies are merged once a phase finishes.
struct NumericCounters {
    std::size_t q_clamps = 0;  // z'Uz fell below q_min
    std::size_t jitters = 0;   // Cholesky needed diagonal jitter

    void merge(const NumericCounters& other) {
        q_clamps += other.q_clamps;
        jitters += other.jitters;
    }
};

struct GaussianSummary {
    Vector mean;
    Matrix cov;

    Eigen::Index dim() const { return mean.size(); }
};

inline constexpr double kJitterScale = 1e-8;

/// Lower Cholesky factor of `cov`. On failure a diagonal jitter of
/// 1e-8 * trace / dim (1e-8 when the trace vanishes) is added once; a second
/// failure throws NumericalError carrying the matrix.
Matrix cholesky_factor(const Matrix& cov, NumericCounters* counters = nullptr);

/// Cholesky factor without the jitter fallback.
Matrix strict_cholesky_factor(const Matrix& cov);

/// Multivariate normal held through its Cholesky factor.
class MvNormal {
public:
    MvNormal() = default;
    MvNormal(Vector mean, const Matrix& cov, NumericCounters* counters = nullptr);

    static MvNormal from_factor(Vector mean, Matrix lower);

    const Vector& mean() const { return mean_; }
    const Matrix& factor() const { return lower_; }
    Eigen::Index dim() const { return mean_.size(); }
    double log_det() const { return log_det_; }

    double log_density(const double* x) const;
    double log_density(const Eigen::Ref<const Vector>& x) const { return log_density(x.data()); }

    /// Log density of N(mean, scale * cov) at x without refactorizing.
    double log_density_shifted(const double* x, const double* mean, double scale) const;

    /// x = mean + L * eps with eps standard normal from `rng`.
    void sample(Stream& rng, double* out) const;
    void sample_shifted(Stream& rng, const double* mean, double scale, double* out) const;

private:
    Vector mean_;
    Matrix lower_;
    double log_det_ = 0.0;
};

}  // namespace pslib

#endif
