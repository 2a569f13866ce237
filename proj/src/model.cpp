#include "pslib/model.hpp"

#include <cmath>
#include <limits>

#include "pslib/errors.hpp"
#include "pslib/format.hpp"

namespace pslib {

void DiscountPrior::validate() const {
    if (!(phi > 0.0 && phi < 1.0)) throw ConfigError("discount factor must lie in (0, 1), got " + format_double(phi));
    if (!(initial_variance > 0.0)) throw ConfigError("initial variance must be positive");
}

GaussianSummary DiscountPrior::initial_summary(Eigen::Index dim) const {
    GaussianSummary g;
    if (initial_mean.size() == 0) {
        g.mean = Vector::Zero(dim);
    } else {
        if (initial_mean.size() != dim) throw ConfigError("initial mean has the wrong dimension");
        g.mean = initial_mean;
    }
    g.cov = Matrix::Identity(dim, dim) * initial_variance;
    return g;
}

double interval_log_likelihood(const IntervalSlice& slice, const double* beta) {
    const Eigen::Index n = static_cast<Eigen::Index>(slice.size());
    const Eigen::Index d = slice.design.cols();
    const double* z = slice.design.data();
    const double* t = slice.exposure.data();
    const double* ev = slice.event.data();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i, z += d) {
        double eta = 0.0;
        for (Eigen::Index c = 0; c < d; ++c) eta += z[c] * beta[c];
        double term = ev[i] * eta;
        if (t[i] != 0.0) term -= t[i] * std::exp(eta);
        total += term;
    }
    if (std::isnan(total)) return -std::numeric_limits<double>::infinity();
    return total;
}

double cumulative_hazard(const Eigen::Ref<const RowMatrix>& path, const IntervalPartition& partition, double t,
                         const Eigen::Ref<const Vector>& z) {
    if (!(t >= 0.0) || t > partition.horizon()) {
        throw DomainError("time " + format_double(t) + " outside [0, " + format_double(partition.horizon()) + "]");
    }
    if (static_cast<std::size_t>(path.rows()) != partition.intervals()) {
        throw DomainError("coefficient path length does not match the partition");
    }
    if (t == 0.0) return 0.0;
    const std::size_t h = partition.locate(t);
    double cum = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
        cum += partition.width(j) * std::exp(path.row(static_cast<Eigen::Index>(j)).dot(z));
    }
    cum += (t - partition.start(h)) * std::exp(path.row(static_cast<Eigen::Index>(h)).dot(z));
    return cum;
}

double survival_probability(const Eigen::Ref<const RowMatrix>& path, const IntervalPartition& partition, double t,
                            const Eigen::Ref<const Vector>& z) {
    return std::exp(-cumulative_hazard(path, partition, t, z));
}

Matrix discount_variance(const Matrix& sigma_prev, double phi) {
    if (!(phi > 0.0 && phi <= 1.0)) throw ConfigError("discount factor must lie in (0, 1]");
    if (!sigma_prev.isApprox(sigma_prev.transpose(), 1e-10)) {
        throw NumericalError("previous covariance is not symmetric", sigma_prev);
    }
    Eigen::LLT<Matrix> llt(sigma_prev);
    if (llt.info() != Eigen::Success) throw NumericalError("previous covariance is not positive definite", sigma_prev);
    return (1.0 / phi - 1.0) * sigma_prev;
}

double rw_transition_logdensity(const Eigen::Ref<const Vector>& beta_to, const Eigen::Ref<const Vector>& beta_from,
                                const Matrix& U) {
    const MvNormal noise = MvNormal::from_factor(Vector::Zero(U.rows()), strict_cholesky_factor(U));
    const Vector diff = beta_to - beta_from;
    return noise.log_density(diff);
}

}  // namespace pslib
