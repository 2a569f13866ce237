#ifndef PSLIB_MODEL_HPP
#define PSLIB_MODEL_HPP

#include "pslib/data.hpp"
#include "pslib/gaussian.hpp"
#include "pslib/types.hpp"

namespace pslib {

/// Random-walk prior on the coefficient path with discount-factor evolution
/// variance. The initial distribution N(initial_mean, initial_variance * I)
/// is the law of the pre-sample state from which beta_1 evolves.
struct DiscountPrior {
    double phi = 0.45;
    Vector initial_mean;            // empty: zeros of the model dimension
    double initial_variance = 100.0;

    void validate() const;
    GaussianSummary initial_summary(Eigen::Index dim) const;
};

/// log L_j = sum_i d_ij z_i'beta - t_ij exp(z_i'beta). Saturates to -inf
/// instead of overflowing; an empty slice gives 0.
double interval_log_likelihood(const IntervalSlice& slice, const double* beta);
inline double interval_log_likelihood(const IntervalSlice& slice, const Eigen::Ref<const Vector>& beta) {
    return interval_log_likelihood(slice, beta.data());
}

/// Integrated hazard up to time t for covariate row z (z includes the leading 1).
/// `path` holds one coefficient vector per interval as rows.
double cumulative_hazard(const Eigen::Ref<const RowMatrix>& path, const IntervalPartition& partition, double t,
                         const Eigen::Ref<const Vector>& z);

/// S(t | z) under a piecewise-constant hazard. Throws DomainError for t
/// outside [0, tau_J].
double survival_probability(const Eigen::Ref<const RowMatrix>& path, const IntervalPartition& partition, double t,
                            const Eigen::Ref<const Vector>& z);

/// U_j = (1/phi - 1) Sigma_{j-1}. Rejects a non-positive-definite input.
Matrix discount_variance(const Matrix& sigma_prev, double phi);

/// log N(beta_to - beta_from; 0, U).
double rw_transition_logdensity(const Eigen::Ref<const Vector>& beta_to, const Eigen::Ref<const Vector>& beta_from,
                                const Matrix& U);

}  // namespace pslib

#endif
