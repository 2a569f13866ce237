#include "pslib/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "pslib/errors.hpp"
#include "pslib/format.hpp"

namespace pslib {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
    return std::string(s.substr(b, e - b));
}

// Comma-separated fields; double quotes may wrap a field and "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(trim(field));
    return out;
}

bool parse_number(const std::string& s, double& value) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last && std::isfinite(value);
}

std::size_t column_index(const std::map<std::string, std::size_t>& header, const std::string& name) {
    auto it = header.find(name);
    if (it == header.end()) throw SchemaError("missing column '" + name + "'");
    return it->second;
}

}  // namespace

SurvivalDataset parse_survival_csv(std::istream& in, const CsvSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty input: header row required");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM

    const auto names = split_csv_line(line);
    std::map<std::string, std::size_t> header;
    for (std::size_t c = 0; c < names.size(); ++c) header.emplace(names[c], c);

    const std::size_t id_col = column_index(header, schema.id);
    const std::size_t time_col = column_index(header, schema.time);
    const std::size_t event_col = column_index(header, schema.event);

    SurvivalDataset data;
    std::vector<std::size_t> cov_cols;
    if (schema.covariates.empty()) {
        for (std::size_t c = 0; c < names.size(); ++c) {
            if (c == id_col || c == time_col || c == event_col) continue;
            cov_cols.push_back(c);
            data.covariate_names.push_back(names[c]);
        }
    } else {
        for (const auto& name : schema.covariates) {
            cov_cols.push_back(column_index(header, name));
            data.covariate_names.push_back(name);
        }
    }
    const std::size_t p = cov_cols.size();

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto fields = split_csv_line(line);
        if (fields.size() != names.size()) {
            throw ValidationError(row, "expected " + std::to_string(names.size()) + " fields, found " +
                                           std::to_string(fields.size()));
        }
        SurvivalRecord rec;
        rec.id = fields[id_col];
        if (!parse_number(fields[time_col], rec.time)) {
            throw ValidationError(row, "time '" + fields[time_col] + "' is not a real number");
        }
        if (rec.time < 0.0) throw ValidationError(row, "negative time " + fields[time_col]);
        double ev = 0.0;
        if (!parse_number(fields[event_col], ev) || (ev != 0.0 && ev != 1.0)) {
            throw ValidationError(row, "event '" + fields[event_col] + "' is not 0 or 1");
        }
        rec.event = static_cast<int>(ev);
        rec.covariates.resize(static_cast<Eigen::Index>(p));
        for (std::size_t c = 0; c < p; ++c) {
            double v = 0.0;
            if (!parse_number(fields[cov_cols[c]], v)) {
                throw ValidationError(row, "covariate '" + data.covariate_names[c] + "' value '" +
                                               fields[cov_cols[c]] + "' is missing or not numeric");
            }
            rec.covariates[static_cast<Eigen::Index>(c)] = v;
        }
        data.records.push_back(std::move(rec));
    }

    data.center_offsets.assign(p, 0.0);
    for (const auto& name : schema.center) {
        auto it = std::find(data.covariate_names.begin(), data.covariate_names.end(), name);
        if (it == data.covariate_names.end()) {
            throw SchemaError("cannot center '" + name + "': not a selected covariate");
        }
        const auto c = static_cast<Eigen::Index>(it - data.covariate_names.begin());
        if (data.records.empty()) continue;
        double mean = 0.0;
        for (const auto& r : data.records) mean += r.covariates[c];
        mean /= static_cast<double>(data.records.size());
        for (auto& r : data.records) r.covariates[c] -= mean;
        data.center_offsets[static_cast<std::size_t>(c)] = mean;
    }
    return data;
}

SurvivalDataset parse_survival_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return parse_survival_csv(in, schema);
}

void write_survival_csv(std::ostream& out, const SurvivalDataset& data) {
    out << "id,time,event";
    for (const auto& n : data.covariate_names) out << ',' << n;
    out << '\n';
    for (const auto& r : data.records) {
        out << r.id << ',' << format_double(r.time) << ',' << r.event;
        for (Eigen::Index c = 0; c < r.covariates.size(); ++c) out << ',' << format_double(r.covariates[c]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------

std::size_t IntervalPartition::locate(double t) const {
    // first cut >= t, minus one; t = 0 maps to interval 0
    auto it = std::lower_bound(cuts.begin() + 1, cuts.end(), t);
    if (it == cuts.end()) throw DomainError("time " + format_double(t) + " beyond horizon " + format_double(horizon()));
    return static_cast<std::size_t>(it - cuts.begin()) - 1;
}

void IntervalPartition::validate() const {
    if (cuts.size() < 2) throw ConfigError("partition needs at least one interval");
    if (cuts.front() != 0.0) throw ConfigError("partition must start at 0");
    for (std::size_t i = 1; i < cuts.size(); ++i) {
        if (!(cuts[i] > cuts[i - 1])) throw ConfigError("partition cuts must be strictly increasing");
    }
}

std::string describe(const PartitionPolicy& policy) {
    struct Visitor {
        std::string operator()(const EventTimesPolicy&) const { return "event-times"; }
        std::string operator()(const EquidistantPolicy& p) const {
            return "equidistant(" + format_double(p.width) + ")";
        }
        std::string operator()(const EqualEventsPolicy& p) const {
            return "equal-events(" + std::to_string(p.events) + ")";
        }
    };
    return std::visit(Visitor{}, policy);
}

IntervalPartition partition_from_cuts(std::vector<double> cuts) {
    IntervalPartition part{std::move(cuts), EventTimesPolicy{}};
    part.validate();
    return part;
}

namespace {

// Cuts after tau_0 with the last one pushed out to the largest observed time.
std::vector<double> close_cuts(std::vector<double> inner, double max_time) {
    std::vector<double> cuts{0.0};
    for (double c : inner) {
        if (c > cuts.back()) cuts.push_back(c);
    }
    if (cuts.size() == 1) {
        cuts.push_back(max_time);
    } else if (max_time > cuts.back()) {
        cuts.back() = max_time;
    }
    return cuts;
}

}  // namespace

IntervalPartition build_partition(const std::vector<SurvivalRecord>& records, const PartitionPolicy& policy) {
    double max_time = 0.0;
    std::vector<double> event_times;
    for (const auto& r : records) {
        max_time = std::max(max_time, r.time);
        if (r.event == 1) event_times.push_back(r.time);
    }
    std::sort(event_times.begin(), event_times.end());

    IntervalPartition part;
    part.policy = policy;

    if (const auto* eq = std::get_if<EquidistantPolicy>(&policy)) {
        if (!(eq->width > 0.0)) throw ConfigError("equidistant width must be positive");
        std::size_t count = eq->intervals;
        if (count == 0) count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(max_time / eq->width)));
        part.cuts.resize(count + 1);
        for (std::size_t k = 0; k <= count; ++k) part.cuts[k] = static_cast<double>(k) * eq->width;
    } else if (std::holds_alternative<EventTimesPolicy>(policy)) {
        if (event_times.empty()) throw ConfigError("event-times partition requires at least one event");
        auto last = std::unique(event_times.begin(), event_times.end());
        part.cuts = close_cuts(std::vector<double>(event_times.begin(), last), max_time);
    } else {
        const std::size_t per = std::get<EqualEventsPolicy>(policy).events;
        if (event_times.empty()) throw ConfigError("equal-events partition requires at least one event");
        if (per == 0) throw ConfigError("equal-events partition needs E >= 1");
        if (per > event_times.size()) {
            throw ConfigError("E = " + std::to_string(per) + " exceeds the " + std::to_string(event_times.size()) +
                              " observed events");
        }
        // floor(N / E) intervals; the remainder joins the last one
        const std::size_t count = event_times.size() / per;
        std::vector<double> inner;
        for (std::size_t k = 1; k <= count; ++k) inner.push_back(event_times[k * per - 1]);
        part.cuts = close_cuts(std::move(inner), max_time);
    }
    part.validate();
    return part;
}

// ---------------------------------------------------------------------------

IntervalSlice IntervalSlice::subset(std::size_t first, std::size_t count) const {
    IntervalSlice out;
    const auto f = static_cast<Eigen::Index>(first);
    const auto n = static_cast<Eigen::Index>(count);
    out.subjects.assign(subjects.begin() + static_cast<std::ptrdiff_t>(first),
                        subjects.begin() + static_cast<std::ptrdiff_t>(first + count));
    out.exposure = exposure.segment(f, n);
    out.event = event.segment(f, n);
    out.design = design.middleRows(f, n);
    return out;
}

ExpandedPanel expand_exposures(const std::vector<SurvivalRecord>& records, const IntervalPartition& partition) {
    partition.validate();
    const std::size_t J = partition.intervals();
    const std::size_t p = records.empty() ? 0 : static_cast<std::size_t>(records.front().covariates.size());

    ExpandedPanel panel;
    panel.dim = p + 1;
    panel.subjects = records.size();

    struct Entry {
        std::size_t subject;
        double exposure;
        double event;
    };
    std::vector<std::vector<Entry>> entries(J);

    const double horizon = partition.horizon();
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (static_cast<std::size_t>(r.covariates.size()) != p) {
            throw ValidationError(i + 1, "covariate count differs from the first record");
        }
        double t = r.time;
        int event = r.event;
        if (t > horizon) {
            t = horizon;
            event = 0;
            ++panel.truncated;
        }
        const std::size_t h = partition.locate(t);
        for (std::size_t j = 0; j <= h; ++j) {
            const double e = interval_exposure(t, partition.start(j), partition.end(j));
            const double d = (j == h) ? static_cast<double>(event) : 0.0;
            if (e == 0.0 && d == 0.0) continue;
            entries[j].push_back({i, e, d});
        }
    }

    panel.slices.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
        auto& s = panel.slices[j];
        const auto n = static_cast<Eigen::Index>(entries[j].size());
        s.exposure.resize(n);
        s.event.resize(n);
        s.design.resize(n, static_cast<Eigen::Index>(panel.dim));
        s.subjects.reserve(entries[j].size());
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto& en = entries[j][static_cast<std::size_t>(k)];
            s.subjects.push_back(en.subject);
            s.exposure[k] = en.exposure;
            s.event[k] = en.event;
            s.design(k, 0) = 1.0;
            if (p > 0) s.design.row(k).tail(static_cast<Eigen::Index>(p)) = records[en.subject].covariates.transpose();
        }
    }
    return panel;
}

}  // namespace pslib
