#ifndef PSLIB_EVAL_HPP
#define PSLIB_EVAL_HPP

#include <cstddef>
#include <functional>
#include <vector>

#include "pslib/data.hpp"
#include "pslib/paths.hpp"
#include "pslib/types.hpp"

namespace pslib {

// Posterior-predictive evaluation over weighted full paths.

/// Self-normalized estimate sum g_s w_s / sum w_s. Throws DegeneracyError
/// when the weights do not have a positive finite sum.
double posterior_expectation(const Eigen::Ref<const Vector>& g, const Eigen::Ref<const Vector>& weights);
double posterior_expectation(const PathSet& paths, const std::function<double(Eigen::Map<const RowMatrix>)>& g);

/// log L(t*, d* | beta_{1:J}) of one test subject for every path, rows = paths.
/// Subjects are the columns; times beyond the horizon are truncated as in
/// expand_exposures.
Matrix path_log_likelihoods(const std::vector<SurvivalRecord>& test, const PathSet& paths,
                            const IntervalPartition& partition, int threads = 0);

struct WaicResult {
    double deviance = 0.0;  // -2 sum(lppd_i - p_i), lower is better
    double raw = 0.0;       // sum(lppd_i - p_i), higher is better
    double lppd = 0.0;
    double p_waic = 0.0;
    Vector lppd_i;
    Vector p_i;
    std::size_t n_test = 0;
    std::size_t truncated = 0;
};

WaicResult waic(const std::vector<SurvivalRecord>& test, const PathSet& paths, const IntervalPartition& partition,
                int threads = 0);

/// Weighted average of S(t | z*, path) over the paths. `z` includes the
/// leading 1. Throws DomainError for t outside [0, tau_J].
double predict_survival(const PathSet& paths, const IntervalPartition& partition, const Eigen::Ref<const Vector>& z,
                        double t);

enum class FittedDensity {
    Predictive,     // f^ = E_post[lambda S], F^ = 1 - E_post[S]
    PosteriorMean,  // plug-in at the weighted mean path
};

struct EdmOptions {
    double horizon = 0.0;  // 0: the fitted horizon tau_J
    std::size_t nodes = 400;
    bool literal_denominator = false;  // normalize the fitted density by F^(u) instead of F^(t)
    FittedDensity density = FittedDensity::Predictive;
    int threads = 0;
};

struct EdmResult {
    double value = 0.0;
    Vector per_subject;
    std::size_t skipped_nodes = 0;
    std::size_t total_nodes = 0;
};

/// Discrimination between the past-life densities of a known coefficient path
/// and a fitted model, averaged over covariate rows (without the leading 1).
/// Inner integral by trapezoid on a uniform grid, densities in log space;
/// nodes where the fitted density ratio is not positive and finite are
/// dropped and the rule runs on the remaining nodes. More than 5% dropped nodes throws DomainError.
EdmResult edm(const RowMatrix& truth, const IntervalPartition& truth_partition, const PathSet& fitted,
              const IntervalPartition& fitted_partition, const RowMatrix& covariates, const EdmOptions& options = {});

/// log S(u), log lambda(u) and, when `log_cdf` is set, log(1 - S(u)) of one
/// path on ascending nodes in [0, tau_J].
void log_survival_on_grid(const double* path, std::size_t dim, const IntervalPartition& partition,
                          const Eigen::Ref<const Vector>& z, const std::vector<double>& nodes, double* log_survival,
                          double* log_hazard, double* log_cdf = nullptr);

struct EssReport {
    std::size_t replicates = 0;
    Matrix mu;      // J x dim, across-run mean of the posterior means
    Matrix sigma2;  // across-run mean of the posterior variances
    Matrix mse;     // across-run mean squared deviation of the posterior means from mu
    Matrix ess;     // sigma2 / mse, +inf where mse == 0
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> infinite;
    double cpu_seconds = 0.0;  // mean per replicate
    Matrix ess_per_second;
};

/// `means[m]` and `variances[m]` are J x dim posterior summaries of run m.
EssReport ess_report(const std::vector<Matrix>& means, const std::vector<Matrix>& variances, double cpu_seconds);

}  // namespace pslib

#endif
