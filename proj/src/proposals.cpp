#include "pslib/proposals.hpp"

#include <cmath>
#include <vector>

#include "pslib/errors.hpp"

namespace pslib {

namespace {

// ln(1 + e^x) without overflow.
double softplus(double x) {
    return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void check_phi(double phi) {
    if (!(phi > 0.0 && phi < 1.0)) throw ConfigError("discount factor must lie in (0, 1)");
}

// In-place recursion on (m, C); C is a dense column-major d x d buffer.
void linear_bayes_sweep(double* m, double* C, Eigen::Index d, const IntervalSlice& slice,
                        NumericCounters* counters) {
    constexpr int kInline = 32;
    double A_buf[kInline];
    std::vector<double> heap;
    double* A = A_buf;
    if (d > kInline) {
        heap.resize(static_cast<std::size_t>(d));
        A = heap.data();
    }

    const Eigen::Index n = static_cast<Eigen::Index>(slice.size());
    const double* z = slice.design.data();
    for (Eigen::Index i = 0; i < n; ++i, z += d) {
        const double t = slice.exposure[i];
        const double ev = slice.event[i];
        double a = 0.0;
        for (Eigen::Index r = 0; r < d; ++r) {
            a += z[r] * m[r];
            double s = 0.0;
            for (Eigen::Index c = 0; c < d; ++c) s += C[c * d + r] * z[c];
            A[r] = s;
        }
        double Q = 0.0;
        for (Eigen::Index r = 0; r < d; ++r) Q += z[r] * A[r];
        if (!(Q > kQMin)) {
            Q = kQMin;
            if (counters) ++counters->q_clamps;
        }
        // ln(1 + Qd) - ln(1 + tQ e^a)
        double shift = ev != 0.0 ? std::log1p(Q * ev) : 0.0;
        if (t > 0.0) {
            const double x = t * Q * std::exp(a);
            shift -= std::isfinite(x) ? std::log1p(x) : softplus(std::log(t * Q) + a);
        }
        const double step = shift / Q;
        for (Eigen::Index r = 0; r < d; ++r) m[r] += A[r] * step;
        if (ev != 0.0) {
            const double g = ev / (1.0 + ev * Q);
            for (Eigen::Index c = 0; c < d; ++c) {
                const double ac = A[c] * g;
                for (Eigen::Index r = 0; r < d; ++r) C[c * d + r] -= A[r] * ac;
            }
        }
    }
}

}  // namespace

GammaHyper gamma_hyperparameters(const Eigen::Ref<const Vector>& beta_prev, const Matrix& U,
                                 const Eigen::Ref<const Vector>& z, NumericCounters* counters) {
    double Q = z.dot(U * z);
    if (!(Q > kQMin)) {
        Q = kQMin;
        if (counters) ++counters->q_clamps;
    }
    GammaHyper h;
    h.alpha = 1.0 / Q;
    h.psi = h.alpha * std::exp(-z.dot(beta_prev));
    return h;
}

EtaMoments laplace_eta_moments(const GammaHyper& hyper, double t, double d) {
    return {std::log((hyper.alpha + d) / (hyper.psi + t)), 1.0 / (hyper.alpha + d)};
}

double eta_log_posterior(const GammaHyper& hyper, double t, double d, double eta) {
    return eta * (hyper.alpha + d) - (hyper.psi + t) * std::exp(eta);
}

double eta_log_posterior_d1(const GammaHyper& hyper, double t, double d, double eta) {
    return hyper.alpha + d - (hyper.psi + t) * std::exp(eta);
}

double eta_log_posterior_d2(const GammaHyper& hyper, double t, double /*d*/, double eta) {
    return -(hyper.psi + t) * std::exp(eta);
}

MvNormal forward_proposal(const double* beta_prev, const Matrix& U, const IntervalSlice& slice,
                          NumericCounters* counters) {
    const Eigen::Index d = U.rows();
    Vector m = Eigen::Map<const Vector>(beta_prev, d);
    Matrix C = U;
    linear_bayes_sweep(m.data(), C.data(), d, slice, counters);
    C = 0.5 * (C + C.transpose());
    return MvNormal(std::move(m), C, counters);
}

GaussianSummary forward_proposal_moments(const Eigen::Ref<const Vector>& beta_prev, const Matrix& U,
                                         const IntervalSlice& slice, NumericCounters* counters) {
    const Eigen::Index d = U.rows();
    GaussianSummary g;
    g.mean = beta_prev;
    g.cov = U;
    linear_bayes_sweep(g.mean.data(), g.cov.data(), d, slice, counters);
    g.cov = 0.5 * (g.cov + g.cov.transpose());
    cholesky_factor(g.cov, counters);  // PD check under the jitter policy
    return g;
}

GaussianSummary artificial_prior(const Eigen::Ref<const Vector>& mu_prev, const Matrix& sigma_prev, double phi) {
    if (!(phi > 0.0 && phi <= 1.0)) throw ConfigError("discount factor must lie in (0, 1]");
    Eigen::LLT<Matrix> llt(sigma_prev);
    if (llt.info() != Eigen::Success) throw NumericalError("filter covariance is not positive definite", sigma_prev);
    return {mu_prev, sigma_prev / phi};
}

GaussianSummary backward_proposal_moments(const Eigen::Ref<const Vector>& mu_fwd, const Matrix& sigma_fwd,
                                          const Eigen::Ref<const Vector>& beta_next, double phi) {
    check_phi(phi);
    return {(1.0 - phi) * mu_fwd + phi * beta_next, (1.0 - phi) * sigma_fwd};
}

GaussianSummary smoothing_proposal_moments(const GaussianSummary& forward, const Eigen::Ref<const Vector>& beta_next,
                                           double phi) {
    return backward_proposal_moments(forward.mean, forward.cov, beta_next, phi);
}

}  // namespace pslib
