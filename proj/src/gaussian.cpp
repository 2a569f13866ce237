#include "pslib/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "pslib/errors.hpp"

namespace pslib {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr int kInline = 32;

bool try_factor(const Matrix& cov, Matrix& lower) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) return false;
    lower = llt.matrixL();
    for (Eigen::Index i = 0; i < lower.rows(); ++i) {
        if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) return false;
    }
    return true;
}

// Squared norm of L^{-1} v by forward substitution.
double whitened_norm2(const Matrix& lower, const double* v) {
    const Eigen::Index d = lower.rows();
    double inline_buf[kInline];
    std::vector<double> heap;
    double* y = inline_buf;
    if (d > kInline) {
        heap.resize(static_cast<std::size_t>(d));
        y = heap.data();
    }
    double q = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        double s = v[i];
        for (Eigen::Index k = 0; k < i; ++k) s -= lower(i, k) * y[k];
        y[i] = s / lower(i, i);
        q += y[i] * y[i];
    }
    return q;
}

}  // namespace

Matrix strict_cholesky_factor(const Matrix& cov) {
    Matrix lower;
    if (cov.rows() != cov.cols() || !try_factor(cov, lower)) {
        throw NumericalError("matrix is not positive definite", cov);
    }
    return lower;
}

Matrix cholesky_factor(const Matrix& cov, NumericCounters* counters) {
    Matrix lower;
    if (cov.rows() != cov.cols()) throw NumericalError("covariance is not square", cov);
    if (cov.allFinite() && try_factor(cov, lower)) return lower;
    if (!cov.allFinite()) throw NumericalError("covariance has non-finite entries", cov);

    const auto d = static_cast<double>(cov.rows());
    double scale = cov.trace() / d;
    if (!(scale > 0.0)) scale = 1.0;
    Matrix jittered = cov;
    jittered.diagonal().array() += kJitterScale * scale;
    if (counters) ++counters->jitters;
    if (!try_factor(jittered, lower)) {
        throw NumericalError("covariance not positive definite after jitter", cov);
    }
    return lower;
}

MvNormal::MvNormal(Vector mean, const Matrix& cov, NumericCounters* counters)
    : mean_(std::move(mean)), lower_(cholesky_factor(cov, counters)) {
    log_det_ = 2.0 * lower_.diagonal().array().log().sum();
}

MvNormal MvNormal::from_factor(Vector mean, Matrix lower) {
    MvNormal out;
    out.mean_ = std::move(mean);
    out.lower_ = std::move(lower);
    out.log_det_ = 2.0 * out.lower_.diagonal().array().log().sum();
    return out;
}

double MvNormal::log_density(const double* x) const {
    return log_density_shifted(x, mean_.data(), 1.0);
}

double MvNormal::log_density_shifted(const double* x, const double* mean, double scale) const {
    const Eigen::Index d = mean_.size();
    double diff_buf[kInline];
    std::vector<double> heap;
    double* diff = diff_buf;
    if (d > kInline) {
        heap.resize(static_cast<std::size_t>(d));
        diff = heap.data();
    }
    for (Eigen::Index i = 0; i < d; ++i) diff[i] = x[i] - mean[i];
    const double q = whitened_norm2(lower_, diff) / scale;
    const double dd = static_cast<double>(d);
    return -0.5 * (dd * kLog2Pi + log_det_ + dd * std::log(scale) + q);
}

void MvNormal::sample(Stream& rng, double* out) const {
    sample_shifted(rng, mean_.data(), 1.0, out);
}

void MvNormal::sample_shifted(Stream& rng, const double* mean, double scale, double* out) const {
    const Eigen::Index d = mean_.size();
    double eps_buf[kInline];
    std::vector<double> heap;
    double* eps = eps_buf;
    if (d > kInline) {
        heap.resize(static_cast<std::size_t>(d));
        eps = heap.data();
    }
    for (Eigen::Index i = 0; i < d; ++i) eps[i] = rng.normal();
    const double s = std::sqrt(scale);
    for (Eigen::Index i = 0; i < d; ++i) {
        double v = 0.0;
        for (Eigen::Index k = 0; k <= i; ++k) v += lower_(i, k) * eps[k];
        out[i] = mean[i] + s * v;
    }
}

}  // namespace pslib
