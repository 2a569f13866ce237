#include "pslib/sim.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "pslib/errors.hpp"
#include "pslib/rng.hpp"

namespace pslib {

void DgpConfig::validate() const {
    if (subjects < 1) throw ConfigError("simulation needs n >= 1");
    if (intervals < 1) throw ConfigError("simulation needs J >= 1");
    if (!(interval_width > 0.0)) throw ConfigError("interval width must be positive");
    if (!(censoring >= 0.0 && censoring < 1.0)) throw ConfigError("censoring proportion must lie in [0, 1)");
    if (!(rw_sd >= 0.0)) throw ConfigError("random-walk sd must be nonnegative");
}

RowMatrix simulate_truth(const DgpConfig& config) {
    config.validate();
    const auto J = static_cast<Eigen::Index>(config.intervals);
    const auto P = static_cast<Eigen::Index>(config.covariates);
    RowMatrix truth(J, P + 1);
    Stream rng(config.seed, Phase::SimPath, 0, 0);
    Vector beta = Vector::Zero(P);
    for (Eigen::Index j = 0; j < J; ++j) {
        for (Eigen::Index c = 0; c < P; ++c) beta[c] += config.rw_sd * rng.normal();
        truth(j, 0) = config.log_baseline ? *config.log_baseline : -11.0 + std::log(static_cast<double>(j + 1));
        truth.row(j).tail(P) = beta.transpose();
    }
    return truth;
}

double invert_survival(const Eigen::Ref<const Vector>& log_hazards, const IntervalPartition& partition, double u) {
    if (!(u > 0.0 && u <= 1.0)) throw DomainError("uniform draw must lie in (0, 1]");
    const double target = -std::log(u);
    double H = 0.0;
    for (std::size_t j = 0; j < partition.intervals(); ++j) {
        const double h = std::exp(log_hazards[static_cast<Eigen::Index>(j)]);
        const double next = H + h * partition.width(j);
        if (target <= next) return partition.start(j) + (target - H) / h;
        H = next;
    }
    return std::numeric_limits<double>::infinity();
}

Simulation simulate_dgp(const DgpConfig& config) {
    Simulation sim;
    sim.truth = simulate_truth(config);
    const std::size_t P = config.covariates;
    std::vector<double> cuts(config.intervals + 1);
    for (std::size_t j = 0; j <= config.intervals; ++j) cuts[j] = config.interval_width * static_cast<double>(j);
    sim.partition = partition_from_cuts(std::move(cuts));
    sim.partition.policy = EquidistantPolicy{config.interval_width, config.intervals};

    for (std::size_t c = 0; c < P; ++c) sim.data.covariate_names.push_back("x" + std::to_string(c + 1));
    sim.data.center_offsets.assign(P, 0.0);
    sim.data.records.resize(config.subjects);

    Vector z(static_cast<Eigen::Index>(P + 1));
    z[0] = 1.0;
    for (std::size_t i = 0; i < config.subjects; ++i) {
        Stream rng(config.seed, Phase::SimSubject, 0, i);
        SurvivalRecord& r = sim.data.records[i];
        r.id = std::to_string(i + 1);
        r.covariates.resize(static_cast<Eigen::Index>(P));
        for (std::size_t c = 0; c < P; ++c) r.covariates[static_cast<Eigen::Index>(c)] = rng.normal();
        z.tail(static_cast<Eigen::Index>(P)) = r.covariates;
        const Vector log_hazards = sim.truth * z;
        const double t = invert_survival(log_hazards, sim.partition, rng.uniform());
        const bool observed = rng.uniform() < 1.0 - config.censoring;
        if (std::isinf(t)) {
            r.time = sim.partition.horizon();
            r.event = 0;
            ++sim.truncated;
        } else {
            r.time = t;
            r.event = observed ? 1 : 0;
        }
    }
    return sim;
}

}  // namespace pslib
