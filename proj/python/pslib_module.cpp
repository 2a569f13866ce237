#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pslib/cli.hpp"
#include "pslib/errors.hpp"
#include "pslib/eval.hpp"
#include "pslib/sim.hpp"
#include "pslib/smoother.hpp"

namespace py = pybind11;
using namespace pslib;

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<SurvivalRecord> to_records(const Eigen::Ref<const Vector>& time, const Eigen::Ref<const Eigen::VectorXi>& event,
                                       const Eigen::Ref<const RowMajor>& covariates) {
    if (time.size() != event.size() || time.size() != covariates.rows()) {
        throw ConfigError("time, event and covariates need the same number of rows");
    }
    std::vector<SurvivalRecord> recs(static_cast<std::size_t>(time.size()));
    for (Eigen::Index i = 0; i < time.size(); ++i) {
        auto& r = recs[static_cast<std::size_t>(i)];
        r.id = std::to_string(i);
        r.time = time[i];
        r.event = event[i];
        r.covariates = covariates.row(i).transpose();
    }
    return recs;
}

struct Fit {
    SmootherOutput out;
    IntervalPartition partition;

    RowMajor means() const {
        RowMajor m(static_cast<Eigen::Index>(out.intervals()), static_cast<Eigen::Index>(out.dim));
        for (std::size_t j = 0; j < out.intervals(); ++j) m.row(static_cast<Eigen::Index>(j)) = out.smoothed_summary[j].mean;
        return m;
    }

    std::vector<Matrix> covariances() const {
        std::vector<Matrix> c;
        for (const auto& s : out.smoothed_summary) c.push_back(s.cov);
        return c;
    }
};

Fit fit(const Eigen::Ref<const Vector>& time, const Eigen::Ref<const Eigen::VectorXi>& event,
        const Eigen::Ref<const RowMajor>& covariates, std::vector<double> cuts, double phi, std::size_t particles,
        std::uint64_t seed, double initial_variance, const std::string& proposal, int threads,
        bool backward_lookahead) {
    const auto recs = to_records(time, event, covariates);
    Fit f;
    f.partition = partition_from_cuts(std::move(cuts));
    DiscountPrior prior;
    prior.phi = phi;
    prior.initial_variance = initial_variance;
    SmootherConfig cfg;
    cfg.particles = particles;
    cfg.seed = seed;
    cfg.threads = threads;
    cfg.backward_lookahead = backward_lookahead;
    if (proposal == "bootstrap") {
        cfg.proposal = ProposalKind::Bootstrap;
    } else if (proposal != "linear-bayes") {
        throw ConfigError("proposal must be 'linear-bayes' or 'bootstrap'");
    }
    py::gil_scoped_release release;
    const ExpandedPanel panel = expand_exposures(recs, f.partition);
    f.out = run_two_filter_smoother(panel, f.partition, prior, cfg);
    return f;
}

py::dict waic_dict(const WaicResult& w) {
    py::dict d;
    d["deviance"] = w.deviance;
    d["raw"] = w.raw;
    d["lppd"] = w.lppd;
    d["p_waic"] = w.p_waic;
    d["n_test"] = w.n_test;
    d["truncated"] = w.truncated;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Particle smoother with linear-Bayes proposals for piecewise exponential hazard models";
    py::register_exception<Error>(m, "PslibError");

    m.def(
        "simulate",
        [](std::size_t covariates, std::size_t subjects, std::size_t intervals, double censoring, std::uint64_t seed,
           double interval_width, double rw_sd, std::optional<double> log_baseline) {
            DgpConfig c;
            c.covariates = covariates;
            c.subjects = subjects;
            c.intervals = intervals;
            c.censoring = censoring;
            c.seed = seed;
            c.interval_width = interval_width;
            c.rw_sd = rw_sd;
            c.log_baseline = log_baseline;
            const Simulation sim = simulate_dgp(c);
            const auto n = static_cast<Eigen::Index>(sim.data.records.size());
            Vector time(n);
            Eigen::VectorXi event(n);
            RowMajor X(n, static_cast<Eigen::Index>(covariates));
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto& r = sim.data.records[static_cast<std::size_t>(i)];
                time[i] = r.time;
                event[i] = r.event;
                if (covariates > 0) X.row(i) = r.covariates.transpose();
            }
            py::dict d;
            d["time"] = time;
            d["event"] = event;
            d["covariates"] = X;
            d["truth"] = RowMajor(sim.truth);
            d["cuts"] = sim.partition.cuts;
            d["truncated"] = sim.truncated;
            return d;
        },
        py::arg("covariates") = 1, py::arg("subjects") = 1000, py::arg("intervals") = 26, py::arg("censoring") = 0.1,
        py::arg("seed") = 0, py::arg("interval_width") = 20.0, py::arg("rw_sd") = 0.5,
        py::arg("log_baseline") = py::none(),
        "Simulate survival data from the piecewise exponential random-walk DGP.");

    py::class_<Fit>(m, "Fit")
        .def_property_readonly("means", &Fit::means, "Smoothed posterior means, one row per interval.")
        .def_property_readonly("covariances", &Fit::covariances)
        .def_property_readonly("cuts", [](const Fit& f) { return f.partition.cuts; })
        .def_property_readonly("forward_ess", [](const Fit& f) { return f.out.diagnostics.forward_ess; })
        .def_property_readonly("backward_ess", [](const Fit& f) { return f.out.diagnostics.backward_ess; })
        .def_property_readonly("smoothing_ess", [](const Fit& f) { return f.out.diagnostics.smoothing_ess; })
        .def_property_readonly("paths", [](const Fit& f) { return RowMajor(f.out.paths.values); })
        .def_property_readonly("path_weights", [](const Fit& f) { return Vector(f.out.paths.weights); })
        .def_property_readonly("wall_seconds", [](const Fit& f) { return f.out.diagnostics.wall_seconds; })
        .def(
            "waic",
            [](const Fit& f, const Eigen::Ref<const Vector>& time, const Eigen::Ref<const Eigen::VectorXi>& event,
               const Eigen::Ref<const RowMajor>& covariates) {
                return waic_dict(waic(to_records(time, event, covariates), f.out.paths, f.partition));
            },
            py::arg("time"), py::arg("event"), py::arg("covariates"), "WAIC of held-out records.")
        .def(
            "predict",
            [](const Fit& f, const Eigen::Ref<const Vector>& x, const std::vector<double>& times) {
                Vector z(x.size() + 1);
                z[0] = 1.0;
                z.tail(x.size()) = x;
                std::vector<double> s;
                for (double t : times) s.push_back(predict_survival(f.out.paths, f.partition, z, t));
                return s;
            },
            py::arg("x"), py::arg("times"), "Posterior-predictive survival S(t | x) for covariates x.");

    m.def("fit", &fit, py::arg("time"), py::arg("event"), py::arg("covariates"), py::arg("cuts"),
          py::arg("phi") = 0.45, py::arg("particles") = 2000, py::arg("seed") = 0,
          py::arg("initial_variance") = 100.0, py::arg("proposal") = "linear-bayes", py::arg("threads") = 0,
          py::arg("backward_lookahead") = false,
          "Run the two-filter particle smoother on survival records and interval cuts.");

    m.def(
        "edm",
        [](const Eigen::Ref<const RowMajor>& truth, std::vector<double> truth_cuts, const Fit& f,
           const Eigen::Ref<const RowMajor>& covariates, std::size_t nodes) {
            EdmOptions opt;
            opt.nodes = nodes;
            return edm(RowMatrix(truth), partition_from_cuts(std::move(truth_cuts)), f.out.paths, f.partition,
                       RowMatrix(covariates), opt)
                .value;
        },
        py::arg("truth"), py::arg("truth_cuts"), py::arg("fit"), py::arg("covariates"), py::arg("nodes") = 400,
        "Expected discrimination between a known coefficient path and a fit.");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = run_cli(args, out, err);
            return std::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run the command-line tool in-process; returns (exit code, stdout, stderr).");
}
