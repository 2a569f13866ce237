#include <doctest.h>

#include <cmath>

#include "pslib/errors.hpp"
#include "pslib/gaussian.hpp"
#include "pslib/model.hpp"
#include "support/oracles.hpp"

using namespace pslib;

namespace {

IntervalSlice random_slice(std::size_t n, Eigen::Index dim, std::uint64_t seed) {
    IntervalSlice s;
    s.design.resize(static_cast<Eigen::Index>(n), dim);
    s.exposure.resize(static_cast<Eigen::Index>(n));
    s.event.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        Stream rng(seed, Phase::Oracle, 10, i);
        const auto r = static_cast<Eigen::Index>(i);
        s.subjects.push_back(i);
        s.design(r, 0) = 1.0;
        for (Eigen::Index c = 1; c < dim; ++c) s.design(r, c) = rng.normal();
        s.exposure[r] = 20.0 * rng.uniform();
        s.event[r] = rng.uniform() < 0.3 ? 1.0 : 0.0;
    }
    return s;
}

}  // namespace

TEST_CASE("interval log-likelihood matches the naive sum") {
    const auto s = random_slice(200, 3, 1);
    Vector beta(3);
    beta << -4.0, 0.3, -0.2;
    CHECK(interval_log_likelihood(s, beta) == doctest::Approx(oracle::loglik(s, beta)).epsilon(1e-12));
}

TEST_CASE("empty slice has zero log-likelihood") {
    IntervalSlice s;
    s.design.resize(0, 2);
    Vector beta = Vector::Zero(2);
    CHECK(interval_log_likelihood(s, beta) == 0.0);
}

TEST_CASE("log-likelihood saturates instead of producing NaN") {
    auto s = random_slice(5, 2, 2);
    Vector beta(2);
    beta << 800.0, 0.0;
    const double v = interval_log_likelihood(s, beta);
    CHECK(std::isinf(v));
    CHECK(v < 0);
}

TEST_CASE("cumulative hazard and survival under a piecewise-constant hazard") {
    const auto p = partition_from_cuts({0, 1, 3});
    RowMatrix path(2, 2);
    path << std::log(0.5), 0.0, std::log(2.0), 0.0;
    Vector z(2);
    z << 1.0, 7.0;
    CHECK(cumulative_hazard(path, p, 0.0, z) == 0.0);
    CHECK(cumulative_hazard(path, p, 0.5, z) == doctest::Approx(0.25));
    CHECK(cumulative_hazard(path, p, 1.5, z) == doctest::Approx(1.5));
    CHECK(survival_probability(path, p, 3.0, z) == doctest::Approx(std::exp(-4.5)));
    CHECK_THROWS_AS(survival_probability(path, p, 3.5, z), DomainError);
    CHECK_THROWS_AS(survival_probability(path, p, -1.0, z), DomainError);
}

TEST_CASE("discount variance") {
    Matrix S(2, 2);
    S << 2.0, 0.5, 0.5, 1.0;
    CHECK(discount_variance(S, 0.5).isApprox(S));
    CHECK(discount_variance(S, 0.25).isApprox(3.0 * S));
    Matrix bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(discount_variance(bad, 0.5), NumericalError);
    CHECK_THROWS_AS(discount_variance(S, 0.0), ConfigError);
}

TEST_CASE("prior validation") {
    DiscountPrior p;
    CHECK_NOTHROW(p.validate());
    p.phi = 1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.phi = 0.5;
    p.initial_variance = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.initial_variance = 4.0;
    const auto g = p.initial_summary(3);
    CHECK(g.mean.isZero());
    CHECK(g.cov.isApprox(4.0 * Matrix::Identity(3, 3)));
}

TEST_CASE("transition density and MvNormal agree with the direct formula") {
    Matrix U(2, 2);
    U << 0.7, 0.2, 0.2, 0.4;
    Vector a(2), b(2);
    a << 0.1, -0.3;
    b << 0.5, 0.2;
    CHECK(rw_transition_logdensity(b, a, U) == doctest::Approx(oracle::mvn_logpdf(b, a, U)).epsilon(1e-12));
    MvNormal g(a, U);
    CHECK(g.log_density(b) == doctest::Approx(oracle::mvn_logpdf(b, a, U)).epsilon(1e-12));
    CHECK(g.log_density_shifted(b.data(), a.data(), 3.0) ==
          doctest::Approx(oracle::mvn_logpdf(b, a, 3.0 * U)).epsilon(1e-12));
}

TEST_CASE("MvNormal sampling moments") {
    Vector mean(2);
    mean << 1.0, -2.0;
    Matrix cov(2, 2);
    cov << 1.0, 0.6, 0.6, 2.0;
    MvNormal g(mean, cov);
    const int n = 200000;
    Vector sum = Vector::Zero(2);
    Matrix sum2 = Matrix::Zero(2, 2);
    Vector x(2);
    for (int i = 0; i < n; ++i) {
        Stream rng(3, Phase::Oracle, 0, static_cast<std::uint64_t>(i));
        g.sample(rng, x.data());
        sum += x;
        sum2 += x * x.transpose();
    }
    const Vector m = sum / n;
    const Matrix c = sum2 / n - m * m.transpose();
    CHECK((m - mean).cwiseAbs().maxCoeff() < 0.02);
    CHECK((c - cov).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("Cholesky jitter policy") {
    Matrix singular(2, 2);
    singular << 1.0, 1.0, 1.0, 1.0;
    NumericCounters counters;
    const Matrix L = cholesky_factor(singular, &counters);
    CHECK(counters.jitters == 1);
    CHECK((L * L.transpose() - singular).cwiseAbs().maxCoeff() < 1e-6);
    Matrix negative(2, 2);
    negative << -1.0, 0.0, 0.0, 1.0;
    CHECK_THROWS_AS(cholesky_factor(negative), NumericalError);
    CHECK_THROWS_AS(strict_cholesky_factor(singular), NumericalError);
}
