#ifndef PSLIB_TESTS_FIXTURES_HPP
#define PSLIB_TESTS_FIXTURES_HPP

#include <cmath>
#include <vector>

#include "pslib/data.hpp"
#include "pslib/model.hpp"
#include "pslib/sim.hpp"
#include "pslib/smoother.hpp"
#include "support/oracles.hpp"

namespace fixture {

// Small simulated problem with a high baseline so every interval carries events.
struct Toy {
    pslib::Simulation sim;
    pslib::ExpandedPanel panel;
};

inline Toy toy(std::size_t n, std::size_t J, std::size_t P, std::uint64_t seed, double log_baseline = -3.0,
               double width = 10.0) {
    pslib::DgpConfig cfg;
    cfg.covariates = P;
    cfg.subjects = n;
    cfg.intervals = J;
    cfg.interval_width = width;
    cfg.censoring = 0.2;
    cfg.log_baseline = log_baseline;
    cfg.seed = seed;
    Toy t;
    t.sim = pslib::simulate_dgp(cfg);
    t.panel = pslib::expand_exposures(t.sim.data.records, t.sim.partition);
    return t;
}

// Initial law for the oracle comparisons. The default N(0, 100 I) leaves the
// first linear-Bayes proposal far from the posterior on small samples.
inline pslib::DiscountPrior oracle_prior() {
    pslib::DiscountPrior p;
    p.initial_variance = 10.0;
    return p;
}

// Joint posterior of the path under the evolution variances a fit actually used.
inline oracle::PathPosterior path_posterior(const pslib::ExpandedPanel& panel, const pslib::GaussianSummary& initial,
                                            const std::vector<pslib::Matrix>& evolution) {
    oracle::PathPosterior post;
    post.slices = panel.slices;
    post.prior_mean = initial.mean;
    post.prior_cov = evolution[0];  // marginal prior of the first interval
    post.U = evolution;
    return post;
}

}  // namespace fixture

#endif
