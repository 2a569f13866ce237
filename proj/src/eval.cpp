#include "pslib/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "parallel.hpp"
#include "pslib/errors.hpp"
#include "pslib/format.hpp"
#include "pslib/model.hpp"

namespace pslib {

namespace {

double weight_total(const Eigen::Ref<const Vector>& weights) {
    const double total = weights.sum();
    if (!(total > 0.0) || !std::isfinite(total)) throw DegeneracyError("path weights do not have a positive finite sum");
    if ((weights.array() < 0.0).any()) throw DegeneracyError("negative path weight");
    return total;
}

Vector normalized_weights(const Eigen::Ref<const Vector>& weights) { return weights / weight_total(weights); }

}  // namespace

double posterior_expectation(const Eigen::Ref<const Vector>& g, const Eigen::Ref<const Vector>& weights) {
    if (g.size() != weights.size()) throw ConfigError("values and weights differ in length");
    const double total = weight_total(weights);
    double acc = 0.0;
    for (Eigen::Index s = 0; s < weights.size(); ++s) {
        if (weights[s] != 0.0) acc += weights[s] * g[s];
    }
    return acc / total;
}

double posterior_expectation(const PathSet& paths, const std::function<double(Eigen::Map<const RowMatrix>)>& g) {
    Vector values(static_cast<Eigen::Index>(paths.size()));
    for (std::size_t s = 0; s < paths.size(); ++s) values[static_cast<Eigen::Index>(s)] = g(paths.path(s));
    return posterior_expectation(values, paths.weights);
}

Matrix path_log_likelihoods(const std::vector<SurvivalRecord>& test, const PathSet& paths,
                            const IntervalPartition& partition, int threads) {
    if (paths.intervals != partition.intervals()) throw ConfigError("paths and partition disagree on J");
    const ExpandedPanel panel = expand_exposures(test, partition);
    if (!test.empty() && panel.dim != paths.dim) throw ConfigError("test covariates do not match the fitted model");
    const std::size_t d = paths.dim;
    Matrix ll = Matrix::Zero(static_cast<Eigen::Index>(paths.size()), static_cast<Eigen::Index>(test.size()));
    NumericCounters unused;
    detail::parallel_for(paths.size(), threads, unused, [&](std::size_t s, NumericCounters&) {
        const double* row = paths.values.data() + s * paths.values.cols();
        const auto si = static_cast<Eigen::Index>(s);
        for (std::size_t j = 0; j < panel.intervals(); ++j) {
            const IntervalSlice& slice = panel.slices[j];
            const double* beta = row + j * d;
            for (std::size_t i = 0; i < slice.size(); ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                double eta = 0.0;
                for (std::size_t c = 0; c < d; ++c) eta += slice.design(ii, static_cast<Eigen::Index>(c)) * beta[c];
                double term = slice.event[ii] * eta;
                if (slice.exposure[ii] > 0.0) term -= slice.exposure[ii] * std::exp(eta);
                ll(si, static_cast<Eigen::Index>(slice.subjects[i])) += term;
            }
        }
    });
    return ll;
}

WaicResult waic(const std::vector<SurvivalRecord>& test, const PathSet& paths, const IntervalPartition& partition,
                int threads) {
    const Vector w = normalized_weights(paths.weights);
    const Matrix ll = path_log_likelihoods(test, paths, partition, threads);

    WaicResult r;
    r.n_test = test.size();
    for (const auto& rec : test) {
        if (rec.time > partition.horizon()) ++r.truncated;
    }
    r.lppd_i.resize(static_cast<Eigen::Index>(test.size()));
    r.p_i.resize(static_cast<Eigen::Index>(test.size()));
    for (Eigen::Index i = 0; i < ll.cols(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        double mean = 0.0;
        for (Eigen::Index s = 0; s < ll.rows(); ++s) {
            if (w[s] == 0.0) continue;
            mx = std::max(mx, ll(s, i));
            mean += w[s] * ll(s, i);
        }
        double acc = 0.0;
        double var = 0.0;
        for (Eigen::Index s = 0; s < ll.rows(); ++s) {
            if (w[s] == 0.0) continue;
            acc += w[s] * std::exp(ll(s, i) - mx);
            const double dev = ll(s, i) - mean;
            var += w[s] * dev * dev;
        }
        r.lppd_i[i] = mx + std::log(acc);
        r.p_i[i] = var;
    }
    r.lppd = r.lppd_i.sum();
    r.p_waic = r.p_i.sum();
    r.raw = r.lppd - r.p_waic;
    r.deviance = -2.0 * r.raw;
    return r;
}

double predict_survival(const PathSet& paths, const IntervalPartition& partition, const Eigen::Ref<const Vector>& z,
                        double t) {
    if (!(t >= 0.0) || t > partition.horizon()) {
        throw DomainError("time " + format_double(t) + " outside [0, " + format_double(partition.horizon()) + "]");
    }
    Vector values(static_cast<Eigen::Index>(paths.size()));
    for (std::size_t s = 0; s < paths.size(); ++s) {
        values[static_cast<Eigen::Index>(s)] = survival_probability(paths.path(s), partition, t, z);
    }
    return std::clamp(posterior_expectation(values, paths.weights), 0.0, 1.0);
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

// log(1 - e^x) for x <= 0.
double log1m_exp(double x) { return x > -0.693 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x)); }

// log F = log(1 - exp(-H)) from log H, accurate when H underflows.
double log_cdf_from_log_cumhaz(double log_H) {
    if (log_H == kNegInf) return kNegInf;
    if (log_H < -20.0) return log_H - 0.5 * std::exp(log_H);
    return log1m_exp(-std::exp(log_H));
}

}  // namespace

void log_survival_on_grid(const double* path, std::size_t dim, const IntervalPartition& partition,
                          const Eigen::Ref<const Vector>& z, const std::vector<double>& nodes, double* log_survival,
                          double* log_hazard, double* log_cdf) {
    const std::size_t J = partition.intervals();
    auto log_rate = [&](std::size_t j) {
        double eta = 0.0;
        for (std::size_t c = 0; c < dim; ++c) eta += z[static_cast<Eigen::Index>(c)] * path[j * dim + c];
        return eta;
    };
    std::size_t j = 0;
    double H = 0.0;          // cumulative hazard at the start of interval j
    double log_H = kNegInf;  // and its logarithm
    double eta = log_rate(0);
    double h = std::exp(eta);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const double u = nodes[k];
        while (j + 1 < J && u > partition.end(j)) {
            H += partition.width(j) * h;
            log_H = log_add(log_H, eta + std::log(partition.width(j)));
            ++j;
            eta = log_rate(j);
            h = std::exp(eta);
        }
        const double into = u - partition.start(j);
        log_survival[k] = -(into > 0.0 ? H + h * into : H);
        log_hazard[k] = eta;
        if (log_cdf) log_cdf[k] = log_cdf_from_log_cumhaz(into > 0.0 ? log_add(log_H, eta + std::log(into)) : log_H);
    }
}

namespace {

// log(1 - S(t)) of one path at a single time.
double log_cdf_at(const double* path, std::size_t dim, const IntervalPartition& partition,
                  const Eigen::Ref<const Vector>& z, double t) {
    double log_H = kNegInf;
    for (std::size_t j = 0; j < partition.intervals() && t > partition.start(j); ++j) {
        double eta = 0.0;
        for (std::size_t c = 0; c < dim; ++c) eta += z[static_cast<Eigen::Index>(c)] * path[j * dim + c];
        log_H = log_add(log_H, eta + std::log(std::min(t, partition.end(j)) - partition.start(j)));
    }
    return log_cdf_from_log_cumhaz(log_H);
}

// Running log-sum-exp per node.
struct LogAccumulator {
    std::vector<double> max, sum;
    explicit LogAccumulator(std::size_t n) : max(n, kNegInf), sum(n, 0.0) {}
    void add(std::size_t k, double x) {
        if (x == kNegInf) return;
        if (x > max[k]) {
            sum[k] = sum[k] * std::exp(max[k] - x) + 1.0;
            max[k] = x;
        } else {
            sum[k] += std::exp(x - max[k]);
        }
    }
    double value(std::size_t k) const { return max[k] == kNegInf ? kNegInf : max[k] + std::log(sum[k]); }
};

}  // namespace

EdmResult edm(const RowMatrix& truth, const IntervalPartition& truth_partition, const PathSet& fitted,
              const IntervalPartition& fitted_partition, const RowMatrix& covariates, const EdmOptions& options) {
    if (static_cast<std::size_t>(truth.rows()) != truth_partition.intervals()) {
        throw ConfigError("true path length does not match its partition");
    }
    if (fitted.intervals != fitted_partition.intervals()) throw ConfigError("fitted paths and partition disagree on J");
    if (static_cast<std::size_t>(truth.cols()) != fitted.dim || covariates.cols() + 1 != truth.cols()) {
        throw ConfigError("covariate dimension mismatch between truth, fit and test rows");
    }
    if (options.nodes < 2) throw ConfigError("EDM needs at least 2 quadrature nodes");
    const double horizon = options.horizon > 0.0 ? options.horizon : fitted_partition.horizon();
    if (horizon > fitted_partition.horizon() * (1.0 + 1e-12) || horizon > truth_partition.horizon() * (1.0 + 1e-12)) {
        throw DomainError("EDM horizon " + format_double(horizon) + " exceeds a model horizon");
    }

    const std::size_t N = options.nodes;
    std::vector<double> nodes(N);
    for (std::size_t k = 0; k < N; ++k) nodes[k] = horizon * static_cast<double>(k) / static_cast<double>(N - 1);
    nodes.back() = horizon;

    const std::size_t d = fitted.dim;
    const Vector w = normalized_weights(fitted.weights);
    RowMatrix mean_path;
    if (options.density == FittedDensity::PosteriorMean) mean_path = (w.transpose() * fitted.values).eval();

    const std::size_t n = static_cast<std::size_t>(covariates.rows());
    EdmResult result;
    result.per_subject.resize(static_cast<Eigen::Index>(n));
    result.total_nodes = N * n;
    std::vector<std::size_t> skipped(n, 0);
    std::vector<char> bad_truth(n, 0);

    NumericCounters unused;
    detail::parallel_for(n, options.threads, unused, [&](std::size_t i, NumericCounters&) {
        Vector z(static_cast<Eigen::Index>(d));
        z[0] = 1.0;
        z.tail(static_cast<Eigen::Index>(d) - 1) = covariates.row(static_cast<Eigen::Index>(i)).transpose();

        std::vector<double> lS(N), lh(N), lF(N), lSh(N), lfh(N), lFh(N);
        log_survival_on_grid(truth.data(), d, truth_partition, z, nodes, lS.data(), lh.data(), lF.data());
        if (options.density == FittedDensity::PosteriorMean) {
            log_survival_on_grid(mean_path.data(), d, fitted_partition, z, nodes, lSh.data(), lfh.data(), lFh.data());
            for (std::size_t k = 0; k < N; ++k) lfh[k] += lSh[k];
        } else {
            // mixtures over paths: f^ = sum w f_s, F^ = sum w F_s
            std::vector<double> a(N), b(N), c(N);
            LogAccumulator dens(N), cdf(N);
            for (std::size_t s = 0; s < fitted.size(); ++s) {
                const double ws = w[static_cast<Eigen::Index>(s)];
                if (ws == 0.0) continue;
                const double lw = std::log(ws);
                const double* path = fitted.values.data() + s * fitted.values.cols();
                log_survival_on_grid(path, d, fitted_partition, z, nodes, a.data(), b.data(),
                                     options.literal_denominator ? c.data() : nullptr);
                for (std::size_t k = 0; k < N; ++k) dens.add(k, lw + a[k] + b[k]);
                if (options.literal_denominator) {
                    for (std::size_t k = 0; k < N; ++k) cdf.add(k, lw + c[k]);
                } else {
                    cdf.add(N - 1, lw + log_cdf_at(path, d, fitted_partition, z, horizon));
                }
            }
            for (std::size_t k = 0; k < N; ++k) {
                lfh[k] = dens.value(k);
                lFh[k] = std::min(cdf.value(k), 0.0);
            }
        }

        const double log_F = lF.back();
        const double log_Fh = lFh.back();
        if (!std::isfinite(log_F)) {
            bad_truth[i] = 1;
            return;
        }
        double integral = 0.0;
        double last_u = 0.0;
        double last_g = 0.0;
        bool have_last = false;
        for (std::size_t k = 0; k < N; ++k) {
            const double log_p = lh[k] + lS[k] - log_F;
            double g = 0.0;
            if (log_p != kNegInf) {
                const double log_q = lfh[k] - (options.literal_denominator ? lFh[k] : log_Fh);
                if (!std::isfinite(log_q)) {
                    ++skipped[i];
                    continue;
                }
                g = std::exp(log_p) * (log_p - log_q);
            }
            if (have_last) integral += 0.5 * (g + last_g) * (nodes[k] - last_u);
            last_u = nodes[k];
            last_g = g;
            have_last = true;
        }
        result.per_subject[static_cast<Eigen::Index>(i)] = integral;
    });

    for (std::size_t i = 0; i < n; ++i) {
        if (bad_truth[i]) throw DomainError("true event probability by the horizon is zero for test row " + std::to_string(i));
        result.skipped_nodes += skipped[i];
    }
    if (static_cast<double>(result.skipped_nodes) > 0.05 * static_cast<double>(result.total_nodes)) {
        throw DomainError("EDM dropped " + std::to_string(result.skipped_nodes) + " of " +
                          std::to_string(result.total_nodes) + " quadrature nodes");
    }
    result.value = n > 0 ? result.per_subject.mean() : 0.0;
    return result;
}

EssReport ess_report(const std::vector<Matrix>& means, const std::vector<Matrix>& variances, double cpu_seconds) {
    const std::size_t M = means.size();
    if (M < 2) throw ConfigError("ESS needs at least 2 replicates");
    if (variances.size() != M) throw ConfigError("means and variances differ in replicate count");
    const Eigen::Index J = means[0].rows();
    const Eigen::Index d = means[0].cols();
    for (std::size_t m = 0; m < M; ++m) {
        if (means[m].rows() != J || means[m].cols() != d || variances[m].rows() != J || variances[m].cols() != d) {
            throw ConfigError("replicate summaries differ in shape");
        }
    }
    EssReport r;
    r.replicates = M;
    r.cpu_seconds = cpu_seconds;
    r.mu = Matrix::Zero(J, d);
    r.sigma2 = Matrix::Zero(J, d);
    r.mse = Matrix::Zero(J, d);
    for (std::size_t m = 0; m < M; ++m) {
        r.mu += means[m];
        r.sigma2 += variances[m];
    }
    r.mu /= static_cast<double>(M);
    r.sigma2 /= static_cast<double>(M);
    for (std::size_t m = 0; m < M; ++m) r.mse += (means[m] - r.mu).array().square().matrix();
    r.mse /= static_cast<double>(M);

    r.ess.resize(J, d);
    r.ess_per_second.resize(J, d);
    r.infinite.resize(J, d);
    for (Eigen::Index j = 0; j < J; ++j) {
        for (Eigen::Index c = 0; c < d; ++c) {
            const bool inf = r.mse(j, c) == 0.0;
            r.infinite(j, c) = inf;
            r.ess(j, c) = inf ? std::numeric_limits<double>::infinity() : r.sigma2(j, c) / r.mse(j, c);
            r.ess_per_second(j, c) = cpu_seconds > 0.0 ? r.ess(j, c) / cpu_seconds : r.ess(j, c);
        }
    }
    return r;
}

}  // namespace pslib
