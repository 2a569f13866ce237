#include "pslib/report.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <ostream>

#include "pslib/format.hpp"

namespace pslib {

std::vector<std::string> coefficient_names(const std::vector<std::string>& covariate_names) {
    std::vector<std::string> names{"intercept"};
    names.insert(names.end(), covariate_names.begin(), covariate_names.end());
    return names;
}

void write_trajectory_csv(std::ostream& out, const SmootherOutput& fit, const IntervalPartition& partition,
                          const std::vector<std::string>& names) {
    out << "interval,start,end";
    for (const auto& n : names) out << ',' << n << "_mean," << n << "_q025," << n << "_q975";
    out << '\n';
    for (std::size_t j = 0; j < fit.intervals(); ++j) {
        const ParticleSet& set = fit.smoothed[j];
        out << j + 1 << ',' << format_double(partition.start(j)) << ',' << format_double(partition.end(j));
        for (Eigen::Index c = 0; c < set.particles.cols(); ++c) {
            const Vector col = set.particles.col(c);
            out << ',' << format_double(fit.smoothed_summary[j].mean[c]) << ','
                << format_double(weighted_quantile(col, set.weights, 0.025)) << ','
                << format_double(weighted_quantile(col, set.weights, 0.975));
        }
        out << '\n';
    }
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json diagnostics_json(const SmootherOutput& fit, const bool include_timing) {
    const SmootherDiagnostics& d = fit.diagnostics;
    nlohmann::json j;
    j["intervals"] = fit.intervals();
    j["dim"] = fit.dim;
    j["phi"] = fit.phi;
    j["smoothing_particles"] = fit.intervals() ? fit.smoothed.front().size() : 0;
    j["ess"] = {{"forward", d.forward_ess}, {"backward", d.backward_ess}, {"smoothing", d.smoothing_ess}};
    j["path_ess"] = fit.paths.size() ? 1.0 / fit.paths.weights.squaredNorm() : 0.0;
    auto events = nlohmann::json::array();
    for (const auto& e : d.degeneracy) {
        events.push_back({{"phase", e.phase}, {"interval", e.interval + 1}, {"ess", e.ess}, {"max_weight", e.max_weight}});
    }
    j["degeneracy"] = events;
    j["numerics"] = {{"q_clamps", d.counters.q_clamps}, {"jitters", d.counters.jitters},
                     {"forward_proposals", d.forward_proposals}};
    if (include_timing) j["timing"] = {{"wall_seconds", d.wall_seconds}, {"cpu_seconds", d.cpu_seconds}};
    return j;
}

void write_particle_dump(std::ostream& out, const SmootherOutput& fit) {
    auto put = [&out](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        if constexpr (std::endian::native == std::endian::big) {
            bits = __builtin_bswap64(bits);
        }
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    };
    for (const auto& set : fit.smoothed) {
        for (Eigen::Index s = 0; s < set.particles.rows(); ++s) {
            put(set.weights[s]);
            for (Eigen::Index c = 0; c < set.particles.cols(); ++c) put(set.particles(s, c));
        }
    }
}

nlohmann::json waic_json(const WaicResult& w) {
    return {{"deviance", w.deviance}, {"raw", w.raw},          {"lppd", w.lppd},
            {"p_waic", w.p_waic},     {"n_test", w.n_test},    {"truncated", w.truncated}};
}

nlohmann::json ess_json(const EssReport& r, const bool include_timing) {
    auto grid = [](const Matrix& m) {
        auto rows = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.rows(); ++j) {
            auto row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number_or_null(m(j, c)));
            rows.push_back(row);
        }
        return rows;
    };
    auto flags = nlohmann::json::array();
    for (Eigen::Index j = 0; j < r.infinite.rows(); ++j) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < r.infinite.cols(); ++c) row.push_back(static_cast<bool>(r.infinite(j, c)));
        flags.push_back(row);
    }
    nlohmann::json j{{"replicates", r.replicates}, {"mu", grid(r.mu)},   {"sigma2", grid(r.sigma2)},
                     {"mse", grid(r.mse)},         {"ess", grid(r.ess)}, {"ess_infinite", flags}};
    if (include_timing) {
        j["cpu_seconds"] = r.cpu_seconds;
        j["ess_per_second"] = grid(r.ess_per_second);
    }
    return j;
}

nlohmann::json partition_json(const IntervalPartition& partition) {
    return {{"policy", describe(partition.policy)}, {"cuts", partition.cuts}};
}

}  // namespace pslib
