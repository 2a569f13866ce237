#include "pslib/smoother.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <numeric>

#include "parallel.hpp"
#include "pslib/errors.hpp"
#include "pslib/proposals.hpp"
#include "pslib/rng.hpp"

namespace pslib {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Normalized log weights (log-sum-exp with max shift).
Vector normalize_log(const Vector& lw) {
    double mx = kNegInf;
    for (Eigen::Index i = 0; i < lw.size(); ++i) {
        if (!std::isnan(lw[i])) mx = std::max(mx, lw[i]);
    }
    if (!std::isfinite(mx)) throw DegeneracyError("no finite log-weight to normalize");
    double total = 0.0;
    for (Eigen::Index i = 0; i < lw.size(); ++i) {
        if (!std::isnan(lw[i])) total += std::exp(lw[i] - mx);
    }
    const double log_total = mx + std::log(total);
    Vector out(lw.size());
    for (Eigen::Index i = 0; i < lw.size(); ++i) out[i] = std::isnan(lw[i]) ? kNegInf : lw[i] - log_total;
    return out;
}

std::vector<double> cumulative(const Vector& log_p) {
    std::vector<double> cdf(static_cast<std::size_t>(log_p.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < log_p.size(); ++i) {
        acc += std::exp(log_p[i]);
        cdf[static_cast<std::size_t>(i)] = acc;
    }
    return cdf;
}

std::size_t sample_index(const std::vector<double>& cdf, double u) {
    const double target = u * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    if (it == cdf.end()) --it;
    // skip zero-probability entries that share the cumulative value
    return static_cast<std::size_t>(it - cdf.begin());
}

const double* row_ptr(const RowMatrix& m, std::size_t i) { return m.data() + i * static_cast<std::size_t>(m.cols()); }
double* row_ptr(RowMatrix& m, std::size_t i) { return m.data() + i * static_cast<std::size_t>(m.cols()); }

bool linear_bayes(const SmootherConfig& config) { return config.proposal == ProposalKind::LinearBayes; }

void record_ess(const ParticleSet& set, const char* phase, std::size_t j, std::vector<double>& ess_out,
                SmootherDiagnostics& diag) {
    const double e = set.ess();
    ess_out[j] = e;
    if (e < 2.0) diag.degeneracy.push_back({phase, j, e, set.weights.maxCoeff()});
}

// Elementwise std::log / std::exp, keeping exp(-inf) exactly 0.
Vector log_of(const Vector& w) {
    return w.unaryExpr([](double v) { return std::log(v); });
}

Vector exp_of(const Vector& lw) {
    return lw.unaryExpr([](double v) { return std::exp(v); });
}

// Linear-Bayes proposals for every ancestor in `needed` that is not cached yet.
void ensure_proposals(ForwardRecord& rec, const ParticleSet& prev, const IntervalSlice& slice,
                      const std::vector<std::size_t>& needed, const SmootherConfig& config,
                      SmootherDiagnostics& diag) {
    std::vector<std::size_t> todo;
    std::vector<char> seen(prev.size(), 0);
    for (std::size_t a : needed) {
        if (!seen[a] && !rec.proposals[a]) todo.push_back(a);
        seen[a] = 1;
    }
    std::sort(todo.begin(), todo.end());
    detail::parallel_for(todo.size(), config.threads, diag.counters, [&](std::size_t i, NumericCounters& c) {
        const std::size_t a = todo[i];
        rec.proposals[a] = forward_proposal(row_ptr(prev.particles, a), rec.evolution, slice, &c);
    });
    diag.forward_proposals += todo.size();
}

// Draw of the forward filter shared by the forward step and the last
// smoothing step: ancestor from nu, proposal, APF importance weight.
double forward_draw(Stream& rng, std::size_t a, const ParticleSet& prev, const ForwardRecord& rec,
                    const IntervalSlice& slice, const SmootherConfig& config, double* out) {
    const double* anc = row_ptr(prev.particles, a);
    if (!linear_bayes(config)) {
        rec.transition.sample_shifted(rng, anc, 1.0, out);
        return interval_log_likelihood(slice, out) - rec.ancestor_loglik[static_cast<Eigen::Index>(a)];
    }
    const MvNormal& q = *rec.proposals[a];
    q.sample(rng, out);
    return interval_log_likelihood(slice, out) + rec.transition.log_density_shifted(out, anc, 1.0) -
           rec.ancestor_loglik[static_cast<Eigen::Index>(a)] - q.log_density(out);
}

void prepare_ancestor_weights(const ParticleSet& prev, const IntervalSlice& slice, const SmootherConfig& config,
                              Vector& ancestor_loglik, Vector& log_nu, SmootherDiagnostics& diag) {
    const std::size_t K = prev.size();
    ancestor_loglik.resize(static_cast<Eigen::Index>(K));
    detail::parallel_for(K, config.threads, diag.counters, [&](std::size_t k, NumericCounters&) {
        ancestor_loglik[static_cast<Eigen::Index>(k)] = interval_log_likelihood(slice, row_ptr(prev.particles, k));
    });
    log_nu = normalize_log(log_of(prev.weights) + ancestor_loglik);
}

}  // namespace

void SmootherConfig::validate() const {
    if (particles < 2) throw ConfigError("need at least 2 particles");
    if (oversampling < 1) throw ConfigError("smoothing oversampling R must be >= 1");
}

void ParticleSet::normalize() {
    const Vector lp = normalize_log(log_weights);
    weights = exp_of(lp);
}

double ParticleSet::ess() const {
    const double s2 = weights.squaredNorm();
    return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

GaussianSummary weighted_moments(const RowMatrix& particles, const Vector& log_weights) {
    const Vector w = exp_of(normalize_log(log_weights));
    const Eigen::Index d = particles.cols();
    GaussianSummary g;
    g.mean = particles.transpose() * w;
    g.cov = Matrix::Zero(d, d);
    for (Eigen::Index k = 0; k < particles.rows(); ++k) {
        if (w[k] == 0.0) continue;
        const Vector diff = particles.row(k).transpose() - g.mean;
        g.cov.noalias() += w[k] * diff * diff.transpose();
    }
    g.cov = 0.5 * (g.cov + g.cov.transpose());
    return g;
}

GaussianSummary weighted_moments(const ParticleSet& set) { return weighted_moments(set.particles, set.log_weights); }

double weighted_quantile(const Eigen::Ref<const Vector>& values, const Eigen::Ref<const Vector>& weights, double q) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
    const double total = weights.sum();
    double acc = 0.0;
    for (Eigen::Index i : order) {
        acc += weights[i];
        if (acc >= q * total) return values[i];
    }
    return values[order.back()];
}

// ---------------------------------------------------------------------------

ParticleSet initialize_forward(std::size_t dim, std::size_t intervals, const DiscountPrior& prior,
                               const SmootherConfig& /*config*/, FilterCache& cache) {
    const auto d = static_cast<Eigen::Index>(dim);
    cache.initial = prior.initial_summary(d);
    cache.initial_factor = MvNormal(cache.initial.mean, cache.initial.cov);
    cache.forward.assign(intervals, ForwardRecord{});
    cache.backward.assign(intervals, BackwardRecord{});

    // A single pseudo-particle at the initial mean; the first transition
    // carries the initial covariance as well.
    ParticleSet set;
    set.interval = 0;
    set.particles = cache.initial.mean.transpose();
    set.log_weights = Vector::Zero(1);
    set.ancestors.assign(1, 0);
    set.normalize();
    return set;
}

ParticleSet forward_step(const ParticleSet& prev, const IntervalSlice& slice, std::size_t j,
                         const DiscountPrior& prior, const SmootherConfig& config, FilterCache& cache,
                         SmootherDiagnostics& diag) {
    const std::size_t K = config.particles;
    const Eigen::Index d = prev.particles.cols();
    ForwardRecord& rec = cache.forward[j];

    // U_j = (1/phi - 1) Sigma_{j-1}, factorized by scaling the filter factor;
    // from the initial pseudo-particle the spread is Sigma_0 + U_1 = Sigma_0 / phi.
    const MvNormal& before = cache.filter_before(j);
    const double c = j == 0 ? 1.0 / prior.phi : 1.0 / prior.phi - 1.0;
    const Matrix lower_u = std::sqrt(c) * before.factor();
    rec.evolution = lower_u * lower_u.transpose();
    rec.transition = MvNormal::from_factor(Vector::Zero(d), lower_u);

    prepare_ancestor_weights(prev, slice, config, rec.ancestor_loglik, rec.log_nu, diag);
    const std::vector<double> cdf = cumulative(rec.log_nu);

    ParticleSet out;
    out.interval = j;
    out.particles.resize(static_cast<Eigen::Index>(K), d);
    out.log_weights.resize(static_cast<Eigen::Index>(K));
    out.ancestors.resize(K);

    std::vector<Stream> streams;
    streams.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        streams.emplace_back(config.seed, Phase::Forward, j, k);
        out.ancestors[k] = sample_index(cdf, streams.back().uniform());
    }
    if (linear_bayes(config)) {
        rec.proposals.assign(prev.size(), std::nullopt);
        ensure_proposals(rec, prev, slice, out.ancestors, config, diag);
    }

    detail::parallel_for(K, config.threads, diag.counters, [&](std::size_t k, NumericCounters&) {
        out.log_weights[static_cast<Eigen::Index>(k)] =
            forward_draw(streams[k], out.ancestors[k], prev, rec, slice, config, row_ptr(out.particles, k));
    });
    out.normalize();
    record_ess(out, "forward", j, diag.forward_ess, diag);

    rec.filtered = weighted_moments(out);
    rec.filtered_factor = MvNormal(rec.filtered.mean, rec.filtered.cov, &diag.counters);
    return out;
}

ParticleSet initialize_backward(const IntervalSlice& last_slice, const DiscountPrior& prior,
                                const SmootherConfig& config, FilterCache& cache, SmootherDiagnostics& diag) {
    const std::size_t j = cache.forward.size() - 1;
    const std::size_t K = config.particles;
    const MvNormal& before = cache.filter_before(j);
    const Eigen::Index d = before.dim();
    const double inflate = 1.0 / prior.phi;

    ParticleSet out;
    out.interval = j;
    out.particles.resize(static_cast<Eigen::Index>(K), d);
    out.log_weights.resize(static_cast<Eigen::Index>(K));
    out.ancestors.assign(K, 0);
    detail::parallel_for(K, config.threads, diag.counters, [&](std::size_t h, NumericCounters&) {
        Stream rng(config.seed, Phase::Backward, j, h);
        double* beta = row_ptr(out.particles, h);
        before.sample_shifted(rng, before.mean().data(), inflate, beta);
        out.ancestors[h] = h;
        out.log_weights[static_cast<Eigen::Index>(h)] =
            config.backward_init == BackwardInit::LikelihoodWeighted ? interval_log_likelihood(last_slice, beta) : 0.0;
    });
    out.normalize();
    record_ess(out, "backward", j, diag.backward_ess, diag);
    return out;
}

ParticleSet backward_step(const ParticleSet& next, const IntervalSlice& slice, std::size_t j,
                          const DiscountPrior& prior, const SmootherConfig& config, FilterCache& cache,
                          SmootherDiagnostics& diag) {
    const std::size_t K = next.size();
    const Eigen::Index d = next.particles.cols();
    const double phi = prior.phi;
    BackwardRecord& rec = cache.backward[j];

    if (config.backward_lookahead) {
        prepare_ancestor_weights(next, slice, config, rec.ancestor_loglik, rec.log_nu, diag);
    } else {
        rec.ancestor_loglik = Vector::Zero(static_cast<Eigen::Index>(K));
        rec.log_nu = normalize_log(log_of(next.weights));
    }
    const std::vector<double> cdf = cumulative(rec.log_nu);

    const MvNormal& filt = cache.forward[j].filtered_factor;  // mu_j, Sigma_j
    const MvNormal& gamma_here = cache.filter_before(j);      // gamma_j = N(mu_{j-1}, Sigma_{j-1}/phi)
    const MvNormal& transition_next = cache.forward[j + 1].transition;

    ParticleSet out;
    out.interval = j;
    out.particles.resize(static_cast<Eigen::Index>(K), d);
    out.log_weights.resize(static_cast<Eigen::Index>(K));
    out.ancestors.resize(K);

    detail::parallel_for(K, config.threads, diag.counters, [&](std::size_t h, NumericCounters&) {
        Stream rng(config.seed, Phase::Backward, j, h);
        const std::size_t a = sample_index(cdf, rng.uniform());
        out.ancestors[h] = a;
        const double* anc = row_ptr(next.particles, a);
        double* beta = row_ptr(out.particles, h);

        double mean_buf[64];
        std::vector<double> heap;
        double* mean = mean_buf;
        if (d > 64) {
            heap.resize(static_cast<std::size_t>(d));
            mean = heap.data();
        }
        for (Eigen::Index c = 0; c < d; ++c) mean[c] = (1.0 - phi) * filt.mean()[c] + phi * anc[c];
        filt.sample_shifted(rng, mean, 1.0 - phi, beta);

        double lw = interval_log_likelihood(slice, beta) + transition_next.log_density_shifted(anc, beta, 1.0) +
                    gamma_here.log_density_shifted(beta, gamma_here.mean().data(), 1.0 / phi) -
                    filt.log_density_shifted(beta, mean, 1.0 - phi) -
                    filt.log_density_shifted(anc, filt.mean().data(), 1.0 / phi) -
                    rec.ancestor_loglik[static_cast<Eigen::Index>(a)];
        out.log_weights[static_cast<Eigen::Index>(h)] = lw;
    });
    out.normalize();
    record_ess(out, "backward", j, diag.backward_ess, diag);
    return out;
}

ParticleSet smoothing_step(const ParticleSet& fwd_prev, const ParticleSet* bwd_next, const IntervalSlice& slice,
                           std::size_t j, const DiscountPrior& prior, const SmootherConfig& config,
                           FilterCache& cache, SmootherDiagnostics& diag) {
    const std::size_t S = config.particles * config.oversampling;
    const Eigen::Index d = fwd_prev.particles.cols();
    const double phi = prior.phi;
    ForwardRecord& rec = cache.forward[j];
    const bool last = bwd_next == nullptr;
    const bool lb = linear_bayes(config);

    const std::vector<double> cdf_f = cumulative(rec.log_nu);
    std::vector<double> cdf_b;
    if (!last) cdf_b = cumulative(cache.backward[j].log_nu);

    ParticleSet out;
    out.interval = j;
    out.particles.resize(static_cast<Eigen::Index>(S), d);
    out.log_weights.resize(static_cast<Eigen::Index>(S));
    out.ancestors.resize(S);

    // At the last interval the target is the forward filter itself; its draws
    // share the forward streams.
    const Phase phase = last ? Phase::Forward : Phase::Smoothing;
    std::vector<Stream> streams;
    std::vector<std::size_t> partner(last ? 0 : S);
    streams.reserve(S);
    for (std::size_t s = 0; s < S; ++s) {
        streams.emplace_back(config.seed, phase, j, s);
        out.ancestors[s] = sample_index(cdf_f, streams.back().uniform());
        if (!last) partner[s] = sample_index(cdf_b, streams.back().uniform());
    }
    if (lb) {
        if (rec.proposals.size() != fwd_prev.size()) rec.proposals.assign(fwd_prev.size(), std::nullopt);
        ensure_proposals(rec, fwd_prev, slice, out.ancestors, config, diag);
    }

    if (last) {
        detail::parallel_for(S, config.threads, diag.counters, [&](std::size_t s, NumericCounters&) {
            out.log_weights[static_cast<Eigen::Index>(s)] =
                forward_draw(streams[s], out.ancestors[s], fwd_prev, rec, slice, config, row_ptr(out.particles, s));
        });
    } else {
        const BackwardRecord& brec = cache.backward[j];
        const MvNormal& filt = rec.filtered_factor;  // gamma_{j+1} = N(mu_j, Sigma_j / phi)
        const MvNormal& transition_next = cache.forward[j + 1].transition;
        detail::parallel_for(S, config.threads, diag.counters, [&](std::size_t s, NumericCounters&) {
            Stream& rng = streams[s];
            const std::size_t k = out.ancestors[s];
            const std::size_t h = partner[s];
            const double* fa = row_ptr(fwd_prev.particles, k);
            const double* ba = row_ptr(bwd_next->particles, h);
            double* beta = row_ptr(out.particles, s);

            double lw = 0.0;
            if (lb) {
                const MvNormal& q = *rec.proposals[k];
                double mean_buf[64];
                std::vector<double> heap;
                double* mean = mean_buf;
                if (d > 64) {
                    heap.resize(static_cast<std::size_t>(d));
                    mean = heap.data();
                }
                for (Eigen::Index c = 0; c < d; ++c) mean[c] = (1.0 - phi) * q.mean()[c] + phi * ba[c];
                q.sample_shifted(rng, mean, 1.0 - phi, beta);
                lw = rec.transition.log_density_shifted(beta, fa, 1.0) + interval_log_likelihood(slice, beta) -
                     rec.ancestor_loglik[static_cast<Eigen::Index>(k)] - q.log_density_shifted(beta, mean, 1.0 - phi) -
                     brec.ancestor_loglik[static_cast<Eigen::Index>(h)];
            } else {
                rec.transition.sample_shifted(rng, fa, 1.0, beta);
                lw = interval_log_likelihood(slice, beta) - rec.ancestor_loglik[static_cast<Eigen::Index>(k)] -
                     brec.ancestor_loglik[static_cast<Eigen::Index>(h)];
            }
            lw += transition_next.log_density_shifted(ba, beta, 1.0) -
                  filt.log_density_shifted(ba, filt.mean().data(), 1.0 / phi);
            out.log_weights[static_cast<Eigen::Index>(s)] = lw;
        });
    }
    out.normalize();
    record_ess(out, "smoothing", j, diag.smoothing_ess, diag);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Timer {
    std::chrono::steady_clock::time_point wall = std::chrono::steady_clock::now();
    std::clock_t cpu = std::clock();

    void stop(SmootherDiagnostics& diag) const {
        diag.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall).count();
        diag.cpu_seconds = static_cast<double>(std::clock() - cpu) / CLOCKS_PER_SEC;
    }
};

void check_inputs(const ExpandedPanel& panel, const DiscountPrior& prior, const SmootherConfig& config) {
    prior.validate();
    config.validate();
    if (panel.intervals() == 0) throw ConfigError("panel has no intervals");
}

PathSet build_paths(const std::vector<ParticleSet>& forward_sets, const std::vector<ParticleSet>& smoothed,
                    const SmootherConfig& config) {
    const std::size_t J = smoothed.size();
    const std::size_t d = static_cast<std::size_t>(smoothed.front().particles.cols());
    const std::size_t S = smoothed.back().size();
    PathSet paths;
    paths.intervals = J;
    paths.dim = d;
    paths.values.resize(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(J * d));

    if (config.paths == PathMode::Genealogy) {
        const ParticleSet& tail = smoothed.back();
        for (std::size_t s = 0; s < S; ++s) {
            double* row = row_ptr(paths.values, s);
            std::copy_n(row_ptr(tail.particles, s), d, row + (J - 1) * d);
            std::size_t idx = tail.ancestors[s];
            for (std::size_t jj = J - 1; jj-- > 0;) {
                const ParticleSet& set = forward_sets[jj + 1];
                std::copy_n(row_ptr(set.particles, idx), d, row + jj * d);
                idx = set.ancestors[idx];
            }
        }
        paths.weights = tail.weights;
    } else {
        std::vector<std::vector<double>> cdfs;
        for (const auto& set : smoothed) cdfs.push_back(cumulative(log_of(set.weights)));
        for (std::size_t s = 0; s < S; ++s) {
            double* row = row_ptr(paths.values, s);
            for (std::size_t jj = 0; jj < J; ++jj) {
                Stream rng(config.seed, Phase::Smoothing, J + 1 + jj, s);
                const std::size_t idx = sample_index(cdfs[jj], rng.uniform());
                std::copy_n(row_ptr(smoothed[jj].particles, idx), d, row + jj * d);
            }
        }
        paths.weights = Vector::Constant(static_cast<Eigen::Index>(S), 1.0 / static_cast<double>(S));
    }
    return paths;
}

}  // namespace

ForwardOutput run_forward_filter(const ExpandedPanel& panel, const DiscountPrior& prior,
                                 const SmootherConfig& config) {
    check_inputs(panel, prior, config);
    const Timer timer;
    const std::size_t J = panel.intervals();
    ForwardOutput out;
    out.diagnostics.forward_ess.assign(J, 0.0);
    out.sets.reserve(J + 1);
    out.sets.push_back(initialize_forward(panel.dim, J, prior, config, out.cache));
    for (std::size_t j = 0; j < J; ++j) {
        out.sets.push_back(forward_step(out.sets.back(), panel.slices[j], j, prior, config, out.cache, out.diagnostics));
    }
    timer.stop(out.diagnostics);
    return out;
}

SmootherOutput run_two_filter_smoother(const ExpandedPanel& panel, const IntervalPartition& partition,
                                       const DiscountPrior& prior, const SmootherConfig& config) {
    check_inputs(panel, prior, config);
    if (partition.intervals() != panel.intervals()) throw ConfigError("panel and partition disagree on J");
    const Timer timer;
    const std::size_t J = panel.intervals();

    SmootherOutput out;
    out.dim = panel.dim;
    out.phi = prior.phi;
    SmootherDiagnostics& diag = out.diagnostics;
    diag.forward_ess.assign(J, 0.0);
    diag.backward_ess.assign(J, 0.0);
    diag.smoothing_ess.assign(J, 0.0);

    FilterCache cache;
    std::vector<ParticleSet> fwd;
    fwd.reserve(J + 1);
    fwd.push_back(initialize_forward(panel.dim, J, prior, config, cache));
    for (std::size_t j = 0; j < J; ++j) {
        fwd.push_back(forward_step(fwd.back(), panel.slices[j], j, prior, config, cache, diag));
    }

    std::vector<ParticleSet> bwd(J);
    bwd[J - 1] = initialize_backward(panel.slices[J - 1], prior, config, cache, diag);
    for (std::size_t j = J - 1; j-- > 0;) {
        bwd[j] = backward_step(bwd[j + 1], panel.slices[j], j, prior, config, cache, diag);
    }

    out.smoothed.reserve(J);
    for (std::size_t j = 0; j < J; ++j) {
        const ParticleSet* next = j + 1 < J ? &bwd[j + 1] : nullptr;
        out.smoothed.push_back(smoothing_step(fwd[j], next, panel.slices[j], j, prior, config, cache, diag));
    }

    out.initial = cache.initial;
    for (std::size_t j = 0; j < J; ++j) {
        out.smoothed_summary.push_back(weighted_moments(out.smoothed[j]));
        out.filtered_summary.push_back(cache.forward[j].filtered);
        out.evolution_variance.push_back(cache.forward[j].evolution);
    }
    out.paths = build_paths(fwd, out.smoothed, config);
    timer.stop(diag);
    return out;
}

}  // namespace pslib
