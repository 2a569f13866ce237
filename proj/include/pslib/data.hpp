#ifndef PSLIB_DATA_HPP
#define PSLIB_DATA_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "pslib/types.hpp"

namespace pslib {

struct SurvivalRecord {
    std::string id;
    double time = 0.0;
    int event = 0;  // 1 = event observed, 0 = censored
    Vector covariates;
};

/// Column mapping for survival CSV files. An empty `covariates` list selects
/// every column other than id/time/event, in file order.
struct CsvSchema {
    std::string id = "id";
    std::string time = "time";
    std::string event = "event";
    std::vector<std::string> covariates;
    std::vector<std::string> center;  // covariates to mean-center
};

struct SurvivalDataset {
    std::vector<std::string> covariate_names;
    std::vector<double> center_offsets;  // subtracted mean per covariate, 0 when not centered
    std::vector<SurvivalRecord> records;

    std::size_t covariate_count() const { return covariate_names.size(); }
};

SurvivalDataset parse_survival_csv(std::istream& in, const CsvSchema& schema);
SurvivalDataset parse_survival_csv(const std::string& path, const CsvSchema& schema);

void write_survival_csv(std::ostream& out, const SurvivalDataset& data);

// ---------------------------------------------------------------------------
// Interval partitions

struct EventTimesPolicy {};

struct EquidistantPolicy {
    double width = 20.0;
    std::size_t intervals = 0;  // 0: as many as needed to cover the largest time
};

struct EqualEventsPolicy {
    std::size_t events = 30;
};

using PartitionPolicy = std::variant<EventTimesPolicy, EquidistantPolicy, EqualEventsPolicy>;

/// Cuts 0 = tau_0 < tau_1 < ... < tau_J. Intervals are indexed 0..J-1 in
/// code; interval j covers (cuts[j], cuts[j+1]].
struct IntervalPartition {
    std::vector<double> cuts;
    PartitionPolicy policy;

    std::size_t intervals() const { return cuts.empty() ? 0 : cuts.size() - 1; }
    double start(std::size_t j) const { return cuts[j]; }
    double end(std::size_t j) const { return cuts[j + 1]; }
    double width(std::size_t j) const { return cuts[j + 1] - cuts[j]; }
    double horizon() const { return cuts.back(); }

    // Interval holding time t; a time sitting on a cut belongs to the earlier
    // interval, t = 0 to the first. Requires 0 <= t <= horizon().
    std::size_t locate(double t) const;

    // Throws ConfigError unless cuts start at 0 and strictly increase.
    void validate() const;
};

std::string describe(const PartitionPolicy& policy);

IntervalPartition build_partition(const std::vector<SurvivalRecord>& records,
                                  const PartitionPolicy& policy);

IntervalPartition partition_from_cuts(std::vector<double> cuts);

// ---------------------------------------------------------------------------
// Interval-expanded data

/// Entries of one interval, in input order. Row i of `design` is z_i = (1, x_i').
struct IntervalSlice {
    std::vector<std::size_t> subjects;
    Vector exposure;
    Vector event;
    RowMatrix design;

    std::size_t size() const { return subjects.size(); }
    IntervalSlice subset(std::size_t first, std::size_t count) const;
};

struct ExpandedPanel {
    std::vector<IntervalSlice> slices;
    std::size_t dim = 0;           // P + 1
    std::size_t truncated = 0;     // subjects whose time exceeded tau_J
    std::size_t subjects = 0;

    std::size_t intervals() const { return slices.size(); }
};

// Exposure of a subject with time t in interval [lo, hi].
inline double interval_exposure(double t, double lo, double hi) {
    const double v = t - lo < hi - lo ? t - lo : hi - lo;
    return v > 0.0 ? v : 0.0;
}

ExpandedPanel expand_exposures(const std::vector<SurvivalRecord>& records,
                               const IntervalPartition& partition);

}  // namespace pslib

#endif
