#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tilt/error.hpp"
#include "tilt/numeric.hpp"
#include "tilt/random.hpp"

namespace tilt {

struct Dataset {
    std::size_t n = 0;
    std::size_t p = 0;
    std::vector<double> features;  // row-major n x p
    std::vector<double> targets;   // length n
    std::vector<std::string> group_labels;  // empty when absent
    std::vector<std::string> feature_names;
    std::string target_name = "target";
    std::string group_name;  // empty when absent

    bool has_groups() const { return !group_labels.empty(); }

    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * p, p};
    }

    void validate() const {
        if (n < 1) throw data_error("dataset must contain at least one row");
        if (features.size() != n * p || targets.size() != n)
            throw data_error("dataset buffers inconsistent with n, p");
        if (!group_labels.empty() && group_labels.size() != n)
            throw data_error("group labels must cover every row");
        if (feature_names.size() != p)
            throw data_error("feature names must cover every column");
        if (!all_finite(features) || !all_finite(targets))
            throw data_error("dataset contains non-finite values");
    }

    bool binary_targets() const {
        for (double y : targets)
            if (y != 0.0 && y != 1.0) return false;
        return true;
    }
};

namespace detail {

// RFC-4180-ish records: quoted fields may contain commas, newlines and
// doubled quotes.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get();
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            record.push_back(std::move(field));
            field.clear();
            records.push_back(std::move(record));
            record.clear();
        } else {
            field.push_back(c);
        }
    }
    if (any && (!field.empty() || !record.empty())) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace detail

struct LoadResult {
    Dataset dataset;
    std::size_t dropped_rows = 0;
};

// Header required. Numeric feature columns pass through; categorical columns
// are one-hot encoded over lexicographically sorted categories with the first
// dropped. Rows with any empty cell are dropped and counted.
inline LoadResult load_csv(std::istream& in, const std::string& target_column,
                           const std::string& group_column = "",
                           const std::string& positive_label = "") {
    auto records = detail::parse_csv(in);
    if (records.empty()) throw data_error("CSV is empty");
    const auto& header = records.front();

    auto column_of = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw data_error("column '" + name + "' not found in CSV header");
        return static_cast<std::size_t>(it - header.begin());
    };

    std::size_t target_idx = column_of(target_column);
    bool has_group = !group_column.empty();
    std::size_t group_idx = has_group ? column_of(group_column) : 0;

    std::vector<std::vector<std::string>> rows;
    std::size_t dropped = 0;
    for (std::size_t r = 1; r < records.size(); ++r) {
        auto& rec = records[r];
        if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
        if (rec.size() != header.size())
            throw data_error("row " + std::to_string(r) + " has " +
                             std::to_string(rec.size()) + " fields, expected " +
                             std::to_string(header.size()));
        bool missing = std::any_of(rec.begin(), rec.end(),
                                   [](const std::string& f) { return f.empty(); });
        if (missing) {
            ++dropped;
            continue;
        }
        rows.push_back(std::move(rec));
    }
    if (rows.empty()) throw data_error("no usable rows: all rows were dropped");

    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == target_idx) continue;
        if (has_group && c == group_idx) continue;
        feature_cols.push_back(c);
    }

    Dataset ds;
    ds.n = rows.size();
    ds.target_name = target_column;

    // Targets.
    ds.targets.resize(ds.n);
    if (!positive_label.empty()) {
        for (std::size_t i = 0; i < ds.n; ++i)
            ds.targets[i] = rows[i][target_idx] == positive_label ? 1.0 : 0.0;
    } else {
        for (std::size_t i = 0; i < ds.n; ++i) {
            double v;
            if (!detail::parse_double(rows[i][target_idx], v))
                throw config_error("target column '" + target_column +
                                   "' is not numeric; pass a positive label to binarize");
            ds.targets[i] = v;
        }
    }

    if (has_group) {
        ds.group_name = group_column;
        ds.group_labels.resize(ds.n);
        for (std::size_t i = 0; i < ds.n; ++i) ds.group_labels[i] = rows[i][group_idx];
    }

    // Feature columns: numeric iff every cell parses.
    std::vector<std::vector<double>> columns;
    for (std::size_t c : feature_cols) {
        bool numeric = true;
        std::vector<double> values(ds.n);
        for (std::size_t i = 0; i < ds.n; ++i) {
            if (!detail::parse_double(rows[i][c], values[i])) {
                numeric = false;
                break;
            }
        }
        if (numeric) {
            ds.feature_names.push_back(header[c]);
            columns.push_back(std::move(values));
        } else {
            std::set<std::string> categories;
            for (std::size_t i = 0; i < ds.n; ++i) categories.insert(rows[i][c]);
            bool first = true;
            for (const auto& cat : categories) {
                if (first) {  // dropped level
                    first = false;
                    continue;
                }
                std::vector<double> indicator(ds.n);
                for (std::size_t i = 0; i < ds.n; ++i)
                    indicator[i] = rows[i][c] == cat ? 1.0 : 0.0;
                ds.feature_names.push_back(header[c] + "=" + cat);
                columns.push_back(std::move(indicator));
            }
        }
    }

    ds.p = columns.size();
    ds.features.resize(ds.n * ds.p);
    for (std::size_t i = 0; i < ds.n; ++i)
        for (std::size_t j = 0; j < ds.p; ++j)
            ds.features[i * ds.p + j] = columns[j][i];

    ds.validate();
    return {std::move(ds), dropped};
}

inline LoadResult load_csv(const std::string& path, const std::string& target_column,
                           const std::string& group_column = "",
                           const std::string& positive_label = "") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open '" + path + "'");
    return load_csv(in, target_column, group_column, positive_label);
}

inline void save_csv(const Dataset& ds, std::ostream& out) {
    for (std::size_t j = 0; j < ds.p; ++j)
        out << detail::csv_escape(ds.feature_names[j]) << ',';
    out << detail::csv_escape(ds.target_name);
    if (ds.has_groups()) out << ',' << detail::csv_escape(ds.group_name);
    out << '\n';
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < ds.p; ++j)
            out << detail::format_double(ds.features[i * ds.p + j]) << ',';
        out << detail::format_double(ds.targets[i]);
        if (ds.has_groups()) out << ',' << detail::csv_escape(ds.group_labels[i]);
        out << '\n';
    }
}

inline void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open '" + path + "' for writing");
    save_csv(ds, out);
}

// Per-feature centering/scaling parameters, reusable on held-out data.
struct Standardizer {
    std::vector<double> means;
    std::vector<double> stds;          // population convention (divide by n)
    std::vector<bool> constant_column;
};

inline Dataset apply(const Standardizer& s, const Dataset& ds) {
    if (s.means.size() != ds.p)
        throw dimension_error("standardizer was fit on a different feature count");
    Dataset out = ds;
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < ds.p; ++j) {
            double& v = out.features[i * ds.p + j];
            v = s.constant_column[j] ? 0.0 : (v - s.means[j]) / s.stds[j];
        }
    }
    return out;
}

inline std::pair<Dataset, Standardizer> standardize(const Dataset& ds) {
    if (ds.n < 2) throw data_error("standardize requires at least two rows");
    Standardizer s;
    s.means.resize(ds.p);
    s.stds.resize(ds.p);
    s.constant_column.resize(ds.p);
    for (std::size_t j = 0; j < ds.p; ++j) {
        KahanSum<> sum;
        for (std::size_t i = 0; i < ds.n; ++i) sum.add(ds.features[i * ds.p + j]);
        double mean = sum.value() / static_cast<double>(ds.n);
        KahanSum<> sq;
        for (std::size_t i = 0; i < ds.n; ++i) {
            double d = ds.features[i * ds.p + j] - mean;
            sq.add(d * d);
        }
        double sd = std::sqrt(sq.value() / static_cast<double>(ds.n));
        s.means[j] = mean;
        bool constant = sd <= 1e-12 * std::max(1.0, std::abs(mean));
        s.constant_column[j] = constant;
        s.stds[j] = constant ? 1.0 : sd;
    }
    return {apply(s, ds), std::move(s)};
}

namespace detail {

inline Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.n = idx.size();
    out.p = ds.p;
    out.feature_names = ds.feature_names;
    out.target_name = ds.target_name;
    out.group_name = ds.group_name;
    out.features.resize(out.n * out.p);
    out.targets.resize(out.n);
    if (ds.has_groups()) out.group_labels.resize(out.n);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        std::size_t i = idx[k];
        std::copy_n(ds.features.data() + i * ds.p, ds.p,
                    out.features.data() + k * out.p);
        out.targets[k] = ds.targets[i];
        if (ds.has_groups()) out.group_labels[k] = ds.group_labels[i];
    }
    return out;
}

inline void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.below(i)]);
}

}  // namespace detail

// Seeded disjoint/exhaustive split. With stratify, test counts are rounded
// per group so proportions hold within one observation per group.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double test_fraction,
                                         std::uint64_t seed, bool stratify = false) {
    if (ds.n < 2) throw data_error("split requires at least two rows");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw invalid_parameter("test fraction must lie in (0, 1)");
    if (stratify && !ds.has_groups())
        throw config_error("stratified split requires group labels");

    Rng rng(seed);
    std::vector<std::size_t> test_idx, train_idx;
    if (!stratify) {
        std::vector<std::size_t> idx(ds.n);
        for (std::size_t i = 0; i < ds.n; ++i) idx[i] = i;
        detail::shuffle_indices(idx, rng);
        std::size_t n_test = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(ds.n)));
        if (n_test == 0 || n_test == ds.n)
            throw invalid_parameter("test fraction yields an empty split");
        test_idx.assign(idx.begin(), idx.begin() + static_cast<long>(n_test));
        train_idx.assign(idx.begin() + static_cast<long>(n_test), idx.end());
    } else {
        std::map<std::string, std::vector<std::size_t>> by_group;
        for (std::size_t i = 0; i < ds.n; ++i) by_group[ds.group_labels[i]].push_back(i);
        for (auto& [label, members] : by_group) {
            detail::shuffle_indices(members, rng);
            std::size_t n_test = static_cast<std::size_t>(
                std::llround(test_fraction * static_cast<double>(members.size())));
            for (std::size_t k = 0; k < members.size(); ++k)
                (k < n_test ? test_idx : train_idx).push_back(members[k]);
        }
        if (test_idx.empty() || train_idx.empty())
            throw invalid_parameter("test fraction yields an empty split");
    }
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    return {detail::take_rows(ds, train_idx), detail::take_rows(ds, test_idx)};
}

enum class synthetic_kind { linear_noise, two_group_logistic };
enum class noise_kind { gaussian, skewed_exponential };

struct SyntheticConfig {
    synthetic_kind kind = synthetic_kind::linear_noise;
    std::size_t n = 100;
    std::size_t p = 1;
    noise_kind noise = noise_kind::gaussian;
    double sigma = 1.0;   // gaussian scale
    double rate = 1.0;    // exponential rate; noise is Exp(rate) - 1/rate
    double group_imbalance = 0.5;  // minority-group fraction
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 1 || p < 1) throw invalid_parameter("synthetic n and p must be >= 1");
        if (sigma < 0.0 || !std::isfinite(sigma))
            throw invalid_parameter("sigma must be finite and >= 0");
        if (rate <= 0.0 || !std::isfinite(rate))
            throw invalid_parameter("rate must be finite and > 0");
        if (!(group_imbalance > 0.0 && group_imbalance < 1.0))
            throw invalid_parameter("group imbalance must lie in (0, 1)");
    }
};

struct GeneratedData {
    Dataset data;
    std::vector<double> theta_star;
    std::vector<double> theta_shift;  // two-group coefficient shift, else empty
};

inline double centered_noise(const SyntheticConfig& cfg, Rng& rng) {
    if (cfg.noise == noise_kind::gaussian) return rng.gaussian(0.0, cfg.sigma);
    return rng.exponential(cfg.rate) - 1.0 / cfg.rate;
}

inline GeneratedData generate(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    GeneratedData out;
    Dataset& ds = out.data;
    ds.n = cfg.n;
    ds.p = cfg.p;
    ds.features.resize(cfg.n * cfg.p);
    ds.targets.resize(cfg.n);
    for (std::size_t j = 0; j < cfg.p; ++j)
        ds.feature_names.push_back("x" + std::to_string(j));
    ds.target_name = "y";

    if (cfg.kind == synthetic_kind::linear_noise) {
        out.theta_star.resize(cfg.p);
        for (auto& t : out.theta_star) t = rng.gaussian();
        for (std::size_t i = 0; i < cfg.n; ++i) {
            double mean = 0.0;
            for (std::size_t j = 0; j < cfg.p; ++j) {
                double x = rng.gaussian();
                ds.features[i * cfg.p + j] = x;
                mean += x * out.theta_star[j];
            }
            ds.targets[i] = mean + centered_noise(cfg, rng);
        }
    } else {
        double scale = 1.0 / std::sqrt(static_cast<double>(cfg.p));
        out.theta_star.resize(cfg.p);
        out.theta_shift.resize(cfg.p);
        for (auto& t : out.theta_star) t = rng.gaussian(0.0, scale);
        for (auto& t : out.theta_shift) t = rng.gaussian(0.0, scale);
        ds.group_name = "group";
        ds.group_labels.resize(cfg.n);
        for (std::size_t i = 0; i < cfg.n; ++i) {
            bool minority = rng.bernoulli(cfg.group_imbalance);
            ds.group_labels[i] = minority ? "g1" : "g0";
            double logit = 0.0;
            for (std::size_t j = 0; j < cfg.p; ++j) {
                double x = rng.gaussian();
                ds.features[i * cfg.p + j] = x;
                logit += x * (out.theta_star[j] + (minority ? out.theta_shift[j] : 0.0));
            }
            double prob = 1.0 / (1.0 + std::exp(-logit));
            ds.targets[i] = rng.bernoulli(prob) ? 1.0 : 0.0;
        }
    }
    ds.validate();
    return out;
}

}  // namespace tilt
