#ifndef PSLIB_PROPOSALS_HPP
#define PSLIB_PROPOSALS_HPP

#include "pslib/data.hpp"
#include "pslib/gaussian.hpp"
#include "pslib/types.hpp"

namespace pslib {

// Linear-Bayes proposal machinery for the piecewise exponential model.
//
// The forward proposal treats each at-risk entry in turn: the hazard
// lambda_ij = exp(z_i'beta) gets a Gamma(alpha, psi) prior whose moments match
// the current Gaussian on beta, the Gamma posterior after observing
// (t_ij, d_ij) is Laplace-approximated on the log scale, and the Gaussian on
// beta is moved by linear Bayes along the direction U z_i.

inline constexpr double kQMin = 1e-12;

struct GammaHyper {
    double alpha = 1.0;
    double psi = 1.0;
};

/// Gamma hyperparameters matching the prior of eta = z'beta under
/// beta ~ N(beta_prev, U): ln alpha - ln psi = z'beta_prev and 1/alpha = z'Uz.
/// z'Uz below kQMin is clamped (and counted).
GammaHyper gamma_hyperparameters(const Eigen::Ref<const Vector>& beta_prev, const Matrix& U,
                                 const Eigen::Ref<const Vector>& z, NumericCounters* counters = nullptr);

struct EtaMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Laplace moments of log-hazard posterior p(eta) ~ exp{eta(alpha+d) - (psi+t)e^eta}.
EtaMoments laplace_eta_moments(const GammaHyper& hyper, double t, double d);

// Unnormalized log posterior of eta and its first two derivatives.
double eta_log_posterior(const GammaHyper& hyper, double t, double d, double eta);
double eta_log_posterior_d1(const GammaHyper& hyper, double t, double d, double eta);
double eta_log_posterior_d2(const GammaHyper& hyper, double t, double d, double eta);

/// Sequential linear-Bayes update over the entries of one interval, in slice
/// order. Per entry, with a = z'm, A = Cz, Q = z'Cz:
///   m <- m + (A/Q) ln[(1 + Qd) / (1 + tQ e^a)],   C <- C - AA' d / (1 + dQ).
/// Returns the final (m_j, C_j). The covariance is checked by Cholesky with
/// the one-shot jitter policy.
GaussianSummary forward_proposal_moments(const Eigen::Ref<const Vector>& beta_prev, const Matrix& U,
                                         const IntervalSlice& slice, NumericCounters* counters = nullptr);

/// Same recursion returning the factorized Gaussian used for sampling.
MvNormal forward_proposal(const double* beta_prev, const Matrix& U, const IntervalSlice& slice,
                          NumericCounters* counters = nullptr);

/// gamma_j ~ N(mu_{j-1}, Sigma_{j-1} / phi).
GaussianSummary artificial_prior(const Eigen::Ref<const Vector>& mu_prev, const Matrix& sigma_prev, double phi);

/// Backward proposal: mean (1-phi) mu_j + phi beta_next, covariance (1-phi) Sigma_j.
GaussianSummary backward_proposal_moments(const Eigen::Ref<const Vector>& mu_fwd, const Matrix& sigma_fwd,
                                          const Eigen::Ref<const Vector>& beta_next, double phi);

/// Smoothing proposal: the backward formula with (m_j, C_j) of the forward
/// proposal in place of the filter moments.
GaussianSummary smoothing_proposal_moments(const GaussianSummary& forward, const Eigen::Ref<const Vector>& beta_next,
                                           double phi);

}  // namespace pslib

#endif
