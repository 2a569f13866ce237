#include <doctest.h>

#include <cmath>

#include "pslib/errors.hpp"
#include "pslib/proposals.hpp"
#include "support/oracles.hpp"

using namespace pslib;

namespace {

Matrix random_spd(Eigen::Index d, Stream& rng, double scale) {
    Matrix A(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) A(r, c) = rng.normal();
    return scale * (A * A.transpose() / static_cast<double>(d) + 0.05 * Matrix::Identity(d, d));
}

IntervalSlice random_slice(std::size_t n, Eigen::Index dim, Stream& rng) {
    IntervalSlice s;
    s.design.resize(static_cast<Eigen::Index>(n), dim);
    s.exposure.resize(static_cast<Eigen::Index>(n));
    s.event.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        s.subjects.push_back(i);
        s.design(r, 0) = 1.0;
        for (Eigen::Index c = 1; c < dim; ++c) s.design(r, c) = rng.normal();
        s.exposure[r] = 20.0 * rng.uniform();
        s.event[r] = rng.uniform() < 0.4 ? 1.0 : 0.0;
    }
    return s;
}

// Linear Bayes through the Gamma conjugate route, one entry at a time:
// the eta moments (f, q) move to their Laplace posterior values and (m, C)
// follow along A = Cz.
GaussianSummary moment_route(Vector m, Matrix C, const IntervalSlice& s) {
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(s.size()); ++i) {
        const Vector z = s.design.row(i).transpose();
        const Vector A = C * z;
        const double f = z.dot(m);
        const double q = z.dot(A);
        GammaHyper h;
        h.alpha = 1.0 / q;
        h.psi = h.alpha * std::exp(-f);
        const double f_star = std::log((h.alpha + s.event[i]) / (h.psi + s.exposure[i]));
        const double q_star = 1.0 / (h.alpha + s.event[i]);
        m += A * (f_star - f) / q;
        C -= A * A.transpose() * (1.0 - q_star / q) / q;
    }
    return {m, C};
}

}  // namespace

TEST_CASE("gamma hyperparameters match the eta prior moments") {
    Vector beta(2), z(2);
    beta << -3.0, 0.4;
    z << 1.0, 0.5;
    Matrix U(2, 2);
    U << 0.3, 0.1, 0.1, 0.2;
    const auto h = gamma_hyperparameters(beta, U, z);
    CHECK(1.0 / h.alpha == doctest::Approx(z.dot(U * z)).epsilon(1e-14));
    CHECK(std::log(h.alpha) - std::log(h.psi) == doctest::Approx(z.dot(beta)).epsilon(1e-12));
}

TEST_CASE("q below the floor is clamped and counted") {
    Vector beta = Vector::Zero(2), z(2);
    z << 1.0, 0.0;
    Matrix U = Matrix::Zero(2, 2);
    NumericCounters counters;
    const auto h = gamma_hyperparameters(beta, U, z, &counters);
    CHECK(counters.q_clamps == 1);
    CHECK(h.alpha == doctest::Approx(1.0 / kQMin));
}

TEST_CASE("Laplace mode is stationary and the curvature matches finite differences") {
    Stream rng(11, Phase::Oracle, 0, 0);
    for (int trial = 0; trial < 10000; ++trial) {
        GammaHyper h;
        h.alpha = std::exp(4.0 * rng.normal());
        h.psi = h.alpha * std::exp(-(-6.0 + 3.0 * rng.normal()));
        const double t = 30.0 * rng.uniform();
        const double d = rng.uniform() < 0.5 ? 1.0 : 0.0;
        const auto mom = laplace_eta_moments(h, t, d);
        const double eta = mom.mean;
        const double scale = h.alpha + d;
        // Stationarity, relative to the size of the two competing terms.
        REQUIRE(std::abs(eta_log_posterior_d1(h, t, d, eta)) <= 1e-6 * scale);
        // Curvature: analytic vs central differences of the first derivative
        // and of the log density itself.
        const double step = 1e-4;
        const double d2 = eta_log_posterior_d2(h, t, d, eta);
        const double fd1 =
            (eta_log_posterior_d1(h, t, d, eta + step) - eta_log_posterior_d1(h, t, d, eta - step)) / (2 * step);
        REQUIRE(std::abs(fd1 - d2) <= 1e-6 * std::abs(d2));
        const double ds = 1e-3;
        const double fd2 = (eta_log_posterior(h, t, d, eta + ds) - 2 * eta_log_posterior(h, t, d, eta) +
                            eta_log_posterior(h, t, d, eta - ds)) /
                           (ds * ds);
        REQUIRE(std::abs(fd2 - d2) <= 1e-6 * std::abs(d2));
        REQUIRE(mom.variance == doctest::Approx(-1.0 / d2).epsilon(1e-12));
    }
}

TEST_CASE("the closed-form recursion equals the Gamma conjugate route") {
    Stream rng(12, Phase::Oracle, 0, 0);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(trial % 4);
        const Matrix U = random_spd(d, rng, 0.5);
        Vector beta(d);
        for (Eigen::Index c = 0; c < d; ++c) beta[c] = 0.3 * rng.normal();
        beta[0] = -5.0 + rng.normal();
        const auto slice = random_slice(25, d, rng);
        const auto fast = forward_proposal_moments(beta, U, slice);
        const auto ref = moment_route(beta, U, slice);
        REQUIRE((fast.mean - ref.mean).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + ref.mean.cwiseAbs().maxCoeff()));
        REQUIRE((fast.cov - ref.cov).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + ref.cov.cwiseAbs().maxCoeff()));
        const auto g = forward_proposal(beta.data(), U, slice);
        REQUIRE((g.mean() - fast.mean).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + fast.mean.cwiseAbs().maxCoeff()));
        REQUIRE((g.factor() * g.factor().transpose() - fast.cov).cwiseAbs().maxCoeff() <=
                1e-10 * (1.0 + fast.cov.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("covariance stays positive definite after every update") {
    Stream rng(13, Phase::Oracle, 0, 0);
    for (int trial = 0; trial < 10000; ++trial) {
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(trial % 5);
        const Matrix U = random_spd(d, rng, std::exp(2.0 * rng.normal()));
        Vector beta(d);
        for (Eigen::Index c = 0; c < d; ++c) beta[c] = rng.normal();
        beta[0] = -6.0 + 3.0 * rng.normal();
        IntervalSlice one = random_slice(1, d, rng);
        one.exposure[0] = 50.0 * rng.uniform();
        const auto g = forward_proposal_moments(beta, U, one);
        Eigen::LLT<Matrix> llt(g.cov);
        REQUIRE(llt.info() == Eigen::Success);
        REQUIRE(g.cov.isApprox(g.cov.transpose(), 1e-12));
        // Only an event shrinks the covariance.
        if (one.event[0] == 0.0) REQUIRE(g.cov.isApprox(U));
    }
}

TEST_CASE("empty slice leaves the prior moments unchanged") {
    Matrix U(2, 2);
    U << 0.5, 0.1, 0.1, 0.3;
    Vector beta(2);
    beta << -2.0, 1.0;
    IntervalSlice empty;
    empty.design.resize(0, 2);
    const auto g = forward_proposal_moments(beta, U, empty);
    CHECK(g.mean == beta);
    CHECK(g.cov == U);
}

TEST_CASE("vanishing evolution variance leaves the mean in place") {
    Stream rng(14, Phase::Oracle, 0, 0);
    const auto slice = random_slice(40, 2, rng);
    Vector beta(2);
    beta << -4.0, 0.2;
    const Matrix base = random_spd(2, rng, 1.0);
    double previous = std::numeric_limits<double>::infinity();
    for (double phi : {0.9, 0.99, 0.999, 0.9999}) {
        const Matrix U = (1.0 / phi - 1.0) * base;
        const auto g = forward_proposal_moments(beta, U, slice);
        const double moved = (g.mean - beta).norm();
        CHECK(moved < previous);
        previous = moved;
    }
    CHECK(previous < 1e-2);
}

TEST_CASE("a single event on a flat prior lands near the gamma posterior mode") {
    Vector beta(1);
    beta << 0.0;
    Matrix U(1, 1);
    U << 1e-3;
    IntervalSlice s;
    s.subjects = {0};
    s.design = RowMatrix::Ones(1, 1);
    s.exposure = Vector::Constant(1, 2.0);
    s.event = Vector::Ones(1);
    const auto g = forward_proposal_moments(beta, U, s);
    const double alpha = 1.0 / U(0, 0);
    CHECK(g.mean[0] == doctest::Approx(std::log((alpha + 1.0) / (alpha + 2.0))).epsilon(1e-12));
    CHECK(g.cov(0, 0) == doctest::Approx(1.0 / (alpha + 1.0)).epsilon(1e-12));
}

TEST_CASE("backward and smoothing proposal moments") {
    Vector mu(2), next(2);
    mu << 1.0, 2.0;
    next << 3.0, -1.0;
    Matrix S(2, 2);
    S << 1.0, 0.2, 0.2, 0.5;
    const auto b = backward_proposal_moments(mu, S, next, 0.25);
    CHECK(b.mean.isApprox(0.75 * mu + 0.25 * next));
    CHECK(b.cov.isApprox(0.75 * S));
    const auto s = smoothing_proposal_moments({mu, S}, next, 0.25);
    CHECK(s.mean.isApprox(b.mean));
    const auto a = artificial_prior(mu, S, 0.25);
    CHECK(a.cov.isApprox(4.0 * S));
    CHECK_THROWS_AS(backward_proposal_moments(mu, S, next, 1.0), ConfigError);
}
