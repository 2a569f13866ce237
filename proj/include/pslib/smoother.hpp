#ifndef PSLIB_SMOOTHER_HPP
#define PSLIB_SMOOTHER_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pslib/data.hpp"
#include "pslib/gaussian.hpp"
#include "pslib/model.hpp"
#include "pslib/paths.hpp"
#include "pslib/types.hpp"

namespace pslib {

// Two-filter particle smoother for the piecewise exponential hazard model:
// an auxiliary forward filter, a backward information filter with Gaussian
// artificial priors, and a third filter that combines the two. Intervals are
// 0-based in code (interval j of the model is index j - 1 here).

enum class ProposalKind {
    LinearBayes,  // linear-Bayes proposals with likelihood look-ahead in the ancestor weights
    Bootstrap,    // random-walk prior proposals with the same look-ahead ancestor weights
};

enum class BackwardInit {
    LikelihoodWeighted,  // draws from gamma_J weighted by L_J
    Uniform,             // draws from gamma_J with equal weights
};

enum class PathMode {
    Genealogy,             // forward ancestry closed by the last smoothing step
    IndependentMarginals,  // per-interval resampling of the smoothed marginals
};

struct SmootherConfig {
    std::size_t particles = 2000;   // K
    std::size_t oversampling = 2;   // R, smoothing sample size S = R K
    std::uint64_t seed = 0;
    ProposalKind proposal = ProposalKind::LinearBayes;
    BackwardInit backward_init = BackwardInit::LikelihoodWeighted;
    bool backward_lookahead = false;  // backward ancestor weights w~ L_j(beta~_{j+1}) instead of w~
    PathMode paths = PathMode::Genealogy;
    int threads = 0;  // 0: runtime default

    void validate() const;
};

struct ParticleSet {
    std::size_t interval = 0;
    RowMatrix particles;                 // one particle per row
    Vector log_weights;                  // unnormalized
    Vector weights;                      // normalized
    std::vector<std::size_t> ancestors;  // index into the set the particle was proposed from

    std::size_t size() const { return static_cast<std::size_t>(particles.rows()); }

    /// Max-shifted normalization of log_weights into weights. Throws
    /// DegeneracyError when no log-weight is finite.
    void normalize();

    /// 1 / sum w^2 of the normalized weights.
    double ess() const;
};

/// Weighted mean and (symmetrized) weighted covariance of a particle set.
GaussianSummary weighted_moments(const ParticleSet& set);
GaussianSummary weighted_moments(const RowMatrix& particles, const Vector& log_weights);

/// Smallest value whose cumulative normalized weight reaches q.
double weighted_quantile(const Eigen::Ref<const Vector>& values, const Eigen::Ref<const Vector>& weights, double q);

struct DegeneracyEvent {
    std::string phase;
    std::size_t interval = 0;
    double ess = 0.0;
    double max_weight = 0.0;
};

struct SmootherDiagnostics {
    NumericCounters counters;
    std::vector<double> forward_ess;
    std::vector<double> backward_ess;
    std::vector<double> smoothing_ess;
    std::vector<DegeneracyEvent> degeneracy;
    std::size_t forward_proposals = 0;  // distinct linear-Bayes sweeps run
    double wall_seconds = 0.0;
    double cpu_seconds = 0.0;
};

/// Per-interval products of the forward pass that the backward and smoothing
/// passes reuse.
struct ForwardRecord {
    GaussianSummary filtered;       // mu_j, Sigma_j of the forward filter
    MvNormal filtered_factor;       // the same, factorized
    Matrix evolution;               // U_j = (1/phi - 1) Sigma_{j-1}; Sigma_0 / phi for j = 0
    MvNormal transition;            // N(0, U_j)
    Vector ancestor_loglik;         // log L_j(t_j | beta_{j-1}^k)
    Vector log_nu;                  // normalized log ancestor weights
    std::vector<std::optional<MvNormal>> proposals;  // (m_j, C_j) per ancestor of the previous set
};

struct BackwardRecord {
    Vector ancestor_loglik;  // log L_j(t_j | beta~_{j+1}^h) with look-ahead, zero without
    Vector log_nu;
};

struct FilterCache {
    GaussianSummary initial;
    MvNormal initial_factor;
    std::vector<ForwardRecord> forward;
    std::vector<BackwardRecord> backward;

    // Filter moments standing before interval j (the initial law for j = 0).
    const MvNormal& filter_before(std::size_t j) const {
        return j == 0 ? initial_factor : forward[j - 1].filtered_factor;
    }
};

/// Seeds the cache and returns the set standing before the first interval: one
/// pseudo-particle at the initial mean. The first forward step integrates the
/// initial distribution exactly through its transition N(0, Sigma_0 / phi).
ParticleSet initialize_forward(std::size_t dim, std::size_t intervals, const DiscountPrior& prior,
                               const SmootherConfig& config, FilterCache& cache);

/// One auxiliary forward step into interval j.
ParticleSet forward_step(const ParticleSet& prev, const IntervalSlice& slice, std::size_t j,
                         const DiscountPrior& prior, const SmootherConfig& config, FilterCache& cache,
                         SmootherDiagnostics& diag);

/// Backward filter at the last interval: draws from gamma_J.
ParticleSet initialize_backward(const IntervalSlice& last_slice, const DiscountPrior& prior,
                                const SmootherConfig& config, FilterCache& cache, SmootherDiagnostics& diag);

/// One backward step into interval j < J - 1 from the set at j + 1.
ParticleSet backward_step(const ParticleSet& next, const IntervalSlice& slice, std::size_t j,
                          const DiscountPrior& prior, const SmootherConfig& config, FilterCache& cache,
                          SmootherDiagnostics& diag);

/// Smoothing step at interval j combining the forward set standing at j - 1
/// and the backward set at j + 1 (null at the last interval).
ParticleSet smoothing_step(const ParticleSet& fwd_prev, const ParticleSet* bwd_next, const IntervalSlice& slice,
                           std::size_t j, const DiscountPrior& prior, const SmootherConfig& config,
                           FilterCache& cache, SmootherDiagnostics& diag);

struct SmootherOutput {
    std::size_t dim = 0;
    double phi = 0.0;
    std::vector<ParticleSet> smoothed;
    std::vector<GaussianSummary> smoothed_summary;
    std::vector<GaussianSummary> filtered_summary;
    std::vector<Matrix> evolution_variance;  // per interval, as in ForwardRecord::evolution
    GaussianSummary initial;
    PathSet paths;
    SmootherDiagnostics diagnostics;

    std::size_t intervals() const { return smoothed.size(); }
};

/// Forward pass, backward pass, then smoothing pass over every interval.
/// Results depend only on (inputs, config.seed), never on thread count.
SmootherOutput run_two_filter_smoother(const ExpandedPanel& panel, const IntervalPartition& partition,
                                       const DiscountPrior& prior, const SmootherConfig& config);

/// Forward filter only (used by tests and the bootstrap benchmark).
struct ForwardOutput {
    std::vector<ParticleSet> sets;  // sets[0] = initial pseudo-particle, sets[j + 1] = interval j
    FilterCache cache;
    SmootherDiagnostics diagnostics;
};
ForwardOutput run_forward_filter(const ExpandedPanel& panel, const DiscountPrior& prior,
                                 const SmootherConfig& config);

}  // namespace pslib

#endif
