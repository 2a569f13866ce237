#include <doctest.h>

#include <cmath>

#include "pslib/errors.hpp"
#include "pslib/eval.hpp"
#include "pslib/model.hpp"
#include "support/oracles.hpp"

using namespace pslib;

namespace {

SurvivalRecord subject(double t, int d, double x) {
    Vector v(1);
    v << x;
    return {"", t, d, v};
}

// Random weighted path set over `J` intervals, two coefficients.
PathSet random_paths(std::size_t S, std::size_t J, std::uint64_t seed) {
    PathSet p;
    p.intervals = J;
    p.dim = 2;
    p.values.resize(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(2 * J));
    p.weights.resize(static_cast<Eigen::Index>(S));
    for (std::size_t s = 0; s < S; ++s) {
        Stream rng(seed, Phase::Oracle, 3, s);
        for (std::size_t j = 0; j < J; ++j) {
            p.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(2 * j)) = -3.0 + 0.3 * rng.normal();
            p.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(2 * j + 1)) = 0.5 * rng.normal();
        }
        p.weights[static_cast<Eigen::Index>(s)] = rng.uniform();
    }
    p.weights /= p.weights.sum();
    return p;
}

// log f(t) or log S(t) of one subject under one path, from the hazard directly.
double subject_loglik(Eigen::Map<const RowMatrix> path, const IntervalPartition& part, const SurvivalRecord& r) {
    Vector z(2);
    z << 1.0, r.covariates[0];
    const double t = std::min(r.time, part.horizon());
    const int d = r.time <= part.horizon() ? r.event : 0;
    double ll = -cumulative_hazard(path, part, t, z);
    if (d == 1) ll += path.row(static_cast<Eigen::Index>(part.locate(t))).dot(z);
    return ll;
}

}  // namespace

TEST_CASE("posterior expectation identities") {
    Vector w(3);
    w << 0.2, 0.5, 0.3;
    CHECK(posterior_expectation(Vector::Ones(3), w) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(posterior_expectation(Vector::Constant(1, 4.2), Vector::Ones(1)) == 4.2);
    CHECK_THROWS_AS(posterior_expectation(Vector::Ones(3), Vector::Zero(3)), DegeneracyError);
    Vector bad = w;
    bad[0] = std::nan("");
    CHECK_THROWS_AS(posterior_expectation(Vector::Ones(3), bad), DegeneracyError);
}

TEST_CASE("posterior expectation matches a naive weighted sum") {
    Vector g(50), w(50);
    for (int i = 0; i < 50; ++i) {
        Stream rng(31, Phase::Oracle, 0, static_cast<std::uint64_t>(i));
        g[i] = rng.normal();
        w[i] = 10.0 * rng.uniform();
    }
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 50; ++i) {
        num += g[i] * w[i];
        den += w[i];
    }
    CHECK(posterior_expectation(g, w) == doctest::Approx(num / den).epsilon(1e-12));
    const auto paths = random_paths(50, 2, 31);
    double direct = 0.0;
    for (std::size_t s = 0; s < 50; ++s) direct += paths.weights[static_cast<Eigen::Index>(s)] * paths.path(s)(1, 0);
    CHECK(posterior_expectation(paths, [](Eigen::Map<const RowMatrix> p) { return p(1, 0); }) ==
          doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("path log-likelihoods match the subject density") {
    const auto part = partition_from_cuts({0, 5, 12, 20});
    const auto paths = random_paths(30, 3, 32);
    const std::vector<SurvivalRecord> test{subject(3.0, 1, 0.5), subject(12.0, 0, -1.0), subject(25.0, 1, 2.0),
                                           subject(0.0, 0, 1.0), subject(19.9, 1, 0.0)};
    const Matrix ll = path_log_likelihoods(test, paths, part);
    REQUIRE(ll.rows() == 30);
    REQUIRE(ll.cols() == 5);
    for (std::size_t s = 0; s < 30; ++s) {
        for (std::size_t i = 0; i < test.size(); ++i) {
            CHECK(ll(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) ==
                  doctest::Approx(subject_loglik(paths.path(s), part, test[i])).epsilon(1e-12));
        }
    }
}

TEST_CASE("WAIC of a point mass is the plain deviance") {
    const auto part = partition_from_cuts({0, 5, 12, 20});
    auto paths = random_paths(1, 3, 33);
    const std::vector<SurvivalRecord> test{subject(3.0, 1, 0.5), subject(12.0, 0, -1.0), subject(25.0, 1, 2.0)};
    const auto w = waic(test, paths, part);
    double total = 0.0;
    for (const auto& r : test) total += subject_loglik(paths.path(0), part, r);
    CHECK(w.p_waic == 0.0);
    CHECK(w.deviance == doctest::Approx(-2.0 * total).epsilon(1e-12));
    CHECK(w.raw == doctest::Approx(total).epsilon(1e-12));
    CHECK(w.truncated == 1);
    CHECK(w.n_test == 3);

    PathSet twice = paths;
    twice.values.resize(2, paths.values.cols());
    twice.values.row(0) = paths.values.row(0);
    twice.values.row(1) = paths.values.row(0);
    twice.weights = Vector::Constant(2, 0.5);
    CHECK(waic(test, twice, part).deviance == doctest::Approx(w.deviance).epsilon(1e-12));
}

TEST_CASE("WAIC matches direct formulas and ignores the weight scale") {
    const auto part = partition_from_cuts({0, 5, 12, 20});
    auto paths = random_paths(40, 3, 34);
    std::vector<SurvivalRecord> test;
    for (int i = 0; i < 15; ++i) {
        Stream rng(34, Phase::Oracle, 1, static_cast<std::uint64_t>(i));
        test.push_back(subject(22.0 * rng.uniform(), rng.uniform() < 0.6 ? 1 : 0, rng.normal()));
    }
    const auto w = waic(test, paths, part);
    double lppd = 0.0, pw = 0.0;
    for (const auto& r : test) {
        double e = 0.0, m = 0.0, m2 = 0.0;
        for (std::size_t s = 0; s < 40; ++s) {
            const double ws = paths.weights[static_cast<Eigen::Index>(s)];
            const double l = subject_loglik(paths.path(s), part, r);
            e += ws * std::exp(l);
            m += ws * l;
            m2 += ws * l * l;
        }
        lppd += std::log(e);
        pw += m2 - m * m;
    }
    CHECK(w.lppd == doctest::Approx(lppd).epsilon(1e-10));
    CHECK(w.p_waic == doctest::Approx(pw).epsilon(1e-8));
    CHECK(w.deviance == doctest::Approx(-2.0 * (lppd - pw)).epsilon(1e-10));
    paths.weights *= 7.5;
    CHECK(waic(test, paths, part).deviance == doctest::Approx(w.deviance).epsilon(1e-12));
}

TEST_CASE("survival prediction") {
    const auto part = partition_from_cuts({0, 5, 12, 20});
    const auto paths = random_paths(25, 3, 35);
    Vector z(2);
    z << 1.0, 0.7;
    CHECK(predict_survival(paths, part, z, 0.0) == 1.0);
    double prev = 1.0;
    for (int k = 0; k < 100; ++k) {
        const double t = 20.0 * k / 99.0;
        const double s = predict_survival(paths, part, z, t);
        REQUIRE(s <= prev);
        REQUIRE(s >= 0.0);
        prev = s;
    }
    const auto one = random_paths(1, 3, 36);
    CHECK(predict_survival(one, part, z, 9.0) ==
          doctest::Approx(survival_probability(one.path(0), part, 9.0, z)).epsilon(1e-14));
    CHECK_THROWS_AS(predict_survival(paths, part, z, 20.5), DomainError);
    CHECK_THROWS_AS(predict_survival(paths, part, z, -0.1), DomainError);
}

TEST_CASE("EDM of a model against itself vanishes") {
    const auto part = partition_from_cuts({0, 5, 12, 20});
    const auto one = random_paths(1, 3, 37);
    const RowMatrix truth = one.path(0);
    RowMatrix x(4, 1);
    x << -1.0, 0.0, 0.5, 2.0;
    const auto r = edm(truth, part, one, part, x);
    CHECK(std::abs(r.value) <= 1e-6);
    CHECK(r.skipped_nodes == 0);
    CHECK(r.total_nodes == 4 * 400);
}

TEST_CASE("EDM of two constant hazards matches a fine quadrature") {
    const auto part = partition_from_cuts({0, 1});
    RowMatrix truth(1, 2), fitted(1, 2);
    truth << 0.0, 0.0;
    fitted << std::log(2.0), 0.0;
    const RowMatrix x = RowMatrix::Zero(1, 1);
    const auto r = edm(truth, part, PathSet::single(fitted), part, x);
    const double F = 1.0 - std::exp(-1.0);
    const double Fh = 1.0 - std::exp(-2.0);
    const double ref = oracle::trapezoid(
        [&](double u) {
            const double p = std::exp(-u) / F;
            const double q = 2.0 * std::exp(-2.0 * u) / Fh;
            return p * std::log(p / q);
        },
        0.0, 1.0, 1000000);
    CHECK(r.value == doctest::Approx(ref).epsilon(1e-4));
    CHECK(r.value > 0.0);
    CHECK(std::abs(r.value - ref) <= 1e-4);
}

TEST_CASE("EDM is stable when the node count doubles") {
    const auto part = partition_from_cuts({0, 5, 12, 20});
    const auto truth_set = random_paths(1, 3, 38);
    const auto fitted = random_paths(60, 3, 39);
    RowMatrix x(3, 1);
    x << -0.5, 0.2, 1.4;
    EdmOptions a;
    EdmOptions b;
    b.nodes = 800;
    const double va = edm(truth_set.path(0), part, fitted, part, x, a).value;
    const double vb = edm(truth_set.path(0), part, fitted, part, x, b).value;
    CHECK(std::abs(va - vb) <= 1e-3 * std::max(1.0, std::abs(vb)));
}

TEST_CASE("EDM checks its horizon") {
    const auto part = partition_from_cuts({0, 5});
    const auto one = random_paths(1, 1, 40);
    EdmOptions o;
    o.horizon = 6.0;
    CHECK_THROWS_AS(edm(one.path(0), part, one, part, RowMatrix::Zero(1, 1), o), DomainError);
}

TEST_CASE("ESS arithmetic") {
    std::vector<Matrix> means{Matrix::Constant(1, 2, 1.0), Matrix::Constant(1, 2, 3.0)};
    means[1](0, 1) = 1.0;
    std::vector<Matrix> vars{Matrix::Constant(1, 2, 2.0), Matrix::Constant(1, 2, 4.0)};
    const auto r = ess_report(means, vars, 2.0);
    CHECK(r.replicates == 2);
    CHECK(r.mu(0, 0) == 2.0);
    CHECK(r.sigma2(0, 0) == 3.0);
    CHECK(r.mse(0, 0) == 1.0);
    CHECK(r.ess(0, 0) == 3.0);
    CHECK(std::isinf(r.ess(0, 1)));
    CHECK(r.infinite(0, 1));
    CHECK_FALSE(r.infinite(0, 0));
    CHECK(r.ess_per_second(0, 0) == 1.5);

    std::vector<Matrix> scaled_m, scaled_v;
    for (const auto& m : means) scaled_m.push_back(5.0 * m);
    for (const auto& v : vars) scaled_v.push_back(25.0 * v);
    CHECK(ess_report(scaled_m, scaled_v, 2.0).ess(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK_THROWS_AS(ess_report({means[0]}, {vars[0]}, 1.0), ConfigError);
}
