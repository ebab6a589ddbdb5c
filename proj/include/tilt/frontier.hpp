#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tilt/dataset.hpp"
#include "tilt/error.hpp"
#include "tilt/loss.hpp"
#include "tilt/model.hpp"
#include "tilt/solver.hpp"

namespace tilt {

// One point of the average-vs-maximum loss tradeoff.
struct FrontierRecord {
    double lambda = 0.0;
    std::string model_id;
    std::string split;  // "train" or "test"
    double avg_individual_loss = 0.0;
    double max_individual_loss = 0.0;
    std::vector<double> group_avg_losses;  // aligned with FrontierResult::group_names
    double avg_group_loss = 0.0;
    double max_group_loss = 0.0;
    std::optional<double> gamma_hat;
    bool converged = true;
};

struct FrontierResult {
    std::string model_id;
    std::vector<std::string> group_names;  // empty when the dataset has no groups
    std::vector<FrontierRecord> records;
    std::vector<SolveReport> reports;  // one per lambda, solver diagnostics
};

// Groups in sorted label order so output columns are stable.
inline std::pair<GroupPartition, std::vector<std::string>>
partition_from_labels(const std::vector<std::string>& labels) {
    std::set<std::string> distinct(labels.begin(), labels.end());
    std::vector<std::string> names(distinct.begin(), distinct.end());
    std::vector<std::vector<int>> membership(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = std::lower_bound(names.begin(), names.end(), labels[i]);
        membership[i] = {static_cast<int>(it - names.begin())};
    }
    return {GroupPartition(std::move(membership), static_cast<int>(names.size())),
            std::move(names)};
}

// Individual and group metrics of one solved point. Without group labels the
// group metrics fall back to the singleton partition, i.e. the individual
// metrics, and no per-group columns are produced.
inline FrontierRecord evaluate_point(const ModelSpec& spec,
                                     std::span<const double> theta,
                                     const Dataset& data, double lambda,
                                     const std::string& split = "train",
                                     int threads = 1) {
    FrontierRecord rec;
    rec.lambda = lambda;
    rec.model_id = spec.id();
    rec.split = split;

    LossProfile profile = loss_profile(spec, theta, data, threads);
    TiltParam tilt(lambda);
    rec.avg_individual_loss = utilitarian_value(profile);
    rec.max_individual_loss = rawlsian_value(profile);
    rec.gamma_hat = decompose(profile, tilt).gamma;

    if (data.has_groups()) {
        auto [partition, names] = partition_from_labels(data.group_labels);
        rec.group_avg_losses = group_average_losses(profile, partition);
        KahanSum<> acc;
        for (double a : rec.group_avg_losses) acc.add(a);
        rec.avg_group_loss =
            acc.value() / static_cast<double>(rec.group_avg_losses.size());
        rec.max_group_loss = *std::max_element(rec.group_avg_losses.begin(),
                                               rec.group_avg_losses.end());
    } else {
        rec.avg_group_loss = rec.avg_individual_loss;
        rec.max_group_loss = rec.max_individual_loss;
    }
    return rec;
}

// Sweep the grid on the train split, then evaluate every solution on train
// and (when provided) the held-out split. Non-converged solves are flagged
// and still emitted.
inline FrontierResult build_frontier(const ModelSpec& spec, const Dataset& train,
                                     const Dataset* test,
                                     const std::vector<double>& lambda_grid,
                                     const SolverConfig& config,
                                     bool start_from_utilitarian = false) {
    check_lambda_grid(lambda_grid);
    FrontierResult result;
    result.model_id = spec.id();
    if (train.has_groups())
        result.group_names = partition_from_labels(train.group_labels).second;

    result.reports = sweep(spec, train, lambda_grid, config, start_from_utilitarian);
    for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
        const SolveReport& rep = result.reports[k];
        FrontierRecord rec = evaluate_point(spec, rep.theta_hat, train,
                                            lambda_grid[k], "train", config.threads);
        rec.converged = rep.converged;
        result.records.push_back(std::move(rec));
        if (test != nullptr) {
            FrontierRecord t = evaluate_point(spec, rep.theta_hat, *test,
                                              lambda_grid[k], "test", config.threads);
            t.converged = rep.converged;
            result.records.push_back(std::move(t));
        }
    }
    return result;
}

inline void write_frontier_csv(const FrontierResult& result, std::ostream& out) {
    out << "lambda,model_id,split,avg_individual_loss,max_individual_loss,"
           "avg_group_loss,max_group_loss,gamma_hat,converged";
    for (const auto& name : result.group_names)
        out << ',' << detail::csv_escape("group_avg_" + name);
    out << '\n';
    for (const auto& rec : result.records) {
        out << detail::format_double(rec.lambda) << ',' << rec.model_id << ','
            << rec.split << ',' << detail::format_double(rec.avg_individual_loss)
            << ',' << detail::format_double(rec.max_individual_loss) << ','
            << detail::format_double(rec.avg_group_loss) << ','
            << detail::format_double(rec.max_group_loss) << ','
            << (rec.gamma_hat ? detail::format_double(*rec.gamma_hat)
                              : std::string("nan"))
            << ',' << (rec.converged ? "true" : "false");
        for (double a : rec.group_avg_losses) out << ',' << detail::format_double(a);
        out << '\n';
    }
}

inline nlohmann::json record_to_json(const FrontierResult& result,
                                     const FrontierRecord& rec) {
    nlohmann::json j{{"lambda", rec.lambda},
                     {"model_id", rec.model_id},
                     {"split", rec.split},
                     {"avg_individual_loss", rec.avg_individual_loss},
                     {"max_individual_loss", rec.max_individual_loss},
                     {"avg_group_loss", rec.avg_group_loss},
                     {"max_group_loss", rec.max_group_loss},
                     {"converged", rec.converged}};
    if (rec.gamma_hat) j["gamma_hat"] = *rec.gamma_hat;
    else j["gamma_hat"] = nullptr;
    nlohmann::json groups = nlohmann::json::object();
    for (std::size_t g = 0; g < rec.group_avg_losses.size(); ++g)
        groups[result.group_names[g]] = rec.group_avg_losses[g];
    j["group_avg_losses"] = groups;
    return j;
}

inline void write_frontier_jsonl(const FrontierResult& result, std::ostream& out) {
    for (const auto& rec : result.records)
        out << record_to_json(result, rec).dump() << '\n';
}

}  // namespace tilt
