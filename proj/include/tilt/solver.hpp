#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tilt/error.hpp"
#include "tilt/loss.hpp"
#include "tilt/model.hpp"
#include "tilt/numeric.hpp"

namespace tilt {

enum class step_rule_kind { prop5_fixed, backtracking };

struct SolverConfig {
    step_rule_kind step_rule = step_rule_kind::backtracking;
    // Curvature constants for the fixed step rule; required when selected.
    double prop5_C = 0.0;
    double prop5_C_min = 0.0;
    double prop5_C_max = 0.0;
    int max_iters = 100000;
    double grad_tol = 1e-8;
    std::uint64_t seed = 0;
    double beta_shrink = 0.5;
    double c_armijo = 1e-4;
    double divergence_threshold = 1e12;
    int threads = 1;

    void validate() const {
        if (max_iters < 1) throw invalid_parameter("max_iters must be >= 1");
        if (!(grad_tol > 0.0)) throw invalid_parameter("grad_tol must be > 0");
        if (!(beta_shrink > 0.0 && beta_shrink < 1.0))
            throw invalid_parameter("beta_shrink must lie in (0, 1)");
        if (!(c_armijo > 0.0 && c_armijo < 1.0))
            throw invalid_parameter("c_armijo must lie in (0, 1)");
        if (step_rule == step_rule_kind::prop5_fixed) {
            if (!(prop5_C > 0.0 && prop5_C_min > 0.0 && prop5_C_max > 0.0))
                throw invalid_parameter("fixed step rule requires positive C, C_min, C_max");
            if (prop5_C_min > prop5_C_max)
                throw invalid_parameter("C_min must not exceed C_max");
        }
    }
};

struct SolveReport {
    std::vector<double> theta_hat;
    double objective = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;
};

// alpha = 1 / (C_max + 2 C lambda); strictly decreasing in lambda.
inline double prop5_step_size(double C, double C_max, double lambda) {
    if (!(C > 0.0) || !(C_max > 0.0) || !(lambda > 0.0))
        throw invalid_parameter("step size constants must be > 0");
    return 1.0 / (C_max + 2.0 * C * lambda);
}

// Gradient descent on an arbitrary value-and-gradient callable. fixed_step of
// 0 selects Armijo backtracking with a doubling warm-started trial step.
template <typename Fn>
SolveReport gd_minimize(Fn&& value_and_grad, std::vector<double> init,
                        const SolverConfig& config, double fixed_step = 0.0) {
    config.validate();
    if (!all_finite(init)) throw invalid_input("initial point is not finite");

    std::vector<double> theta = std::move(init);
    Objective cur = value_and_grad(theta);
    if (!std::isfinite(cur.value))
        throw divergence_error("objective not finite at the initial point", theta,
                               cur.value, 0);

    SolveReport report;
    report.objective_trace.push_back(cur.value);

    double trial_step = 1.0;
    int k = 0;
    double gnorm = norm2(cur.grad);
    std::vector<double> candidate(theta.size());
    while (k < config.max_iters && gnorm > config.grad_tol) {
        bool stalled = false;
        if (fixed_step > 0.0) {
            for (std::size_t j = 0; j < theta.size(); ++j)
                candidate[j] = theta[j] - fixed_step * cur.grad[j];
            Objective next = value_and_grad(candidate);
            if (!std::isfinite(next.value) || next.value > config.divergence_threshold)
                throw divergence_error("gradient step produced a non-finite or runaway objective",
                                       theta, next.value, k + 1);
            theta.swap(candidate);
            cur = std::move(next);
        } else {
            double alpha = trial_step * 2.0;
            double g2 = gnorm * gnorm;
            // Below eps_f the Armijo decrease rounds away and the comparison
            // is vacuous; progress is then judged by the gradient norm, which
            // stays accurate when objective differences do not (the tilted
            // value carries evaluation noise on the order of eps / lambda).
            double eps_f = 8.0 * std::numeric_limits<double>::epsilon() *
                           (1.0 + std::abs(cur.value));
            double value_slack = 1.5e-8 * (1.0 + std::abs(cur.value));
            Objective next;
            bool accepted = false;
            while (alpha > 1e-20) {
                for (std::size_t j = 0; j < theta.size(); ++j)
                    candidate[j] = theta[j] - alpha * cur.grad[j];
                next = value_and_grad(candidate);
                if (std::isfinite(next.value)) {
                    double needed = config.c_armijo * alpha * g2;
                    if (needed > eps_f) {
                        if (next.value <= cur.value - needed) {
                            accepted = true;
                            break;
                        }
                    } else if (next.value <= cur.value + value_slack &&
                               norm2(next.grad) < gnorm * (1.0 - 1e-12)) {
                        accepted = true;
                        break;
                    }
                }
                alpha *= config.beta_shrink;
            }
            if (!accepted) {
                // No descent step exists at numerical resolution.
                stalled = true;
            } else {
                if (next.value > config.divergence_threshold)
                    throw divergence_error("objective exceeded the divergence threshold",
                                           theta, next.value, k + 1);
                trial_step = alpha;
                theta.swap(candidate);
                cur = std::move(next);
            }
        }
        if (stalled) break;
        ++k;
        report.objective_trace.push_back(cur.value);
        gnorm = norm2(cur.grad);
    }

    report.theta_hat = std::move(theta);
    report.objective = cur.value;
    report.grad_norm = gnorm;
    report.iterations = k;
    report.converged = gnorm <= config.grad_tol;
    return report;
}

// Minimize L(theta; lambda) over the dataset.
inline SolveReport minimize(const ModelSpec& spec, const Dataset& data,
                            const TiltParam& tilt, const SolverConfig& config,
                            std::vector<double> init) {
    double step = 0.0;
    if (config.step_rule == step_rule_kind::prop5_fixed) {
        config.validate();
        step = prop5_step_size(config.prop5_C, config.prop5_C_max, tilt.value());
    }
    auto fn = [&](const std::vector<double>& theta) {
        return tilted_objective_and_grad(spec, theta, data, tilt, config.threads);
    };
    return gd_minimize(fn, std::move(init), config, step);
}

// Minimize the mean loss (the utilitarian problem).
inline SolveReport minimize_mean(const ModelSpec& spec, const Dataset& data,
                                 const SolverConfig& config, std::vector<double> init) {
    auto fn = [&](const std::vector<double>& theta) {
        return mean_objective_and_grad(spec, theta, data, config.threads);
    };
    return gd_minimize(fn, std::move(init), config, 0.0);
}

inline std::vector<double> geometric_grid(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi >= lo) || count < 1)
        throw invalid_parameter("grid requires 0 < lo <= hi and count >= 1");
    if (count == 1) return {lo};
    std::vector<double> grid(static_cast<std::size_t>(count));
    double step = (std::log(hi) - std::log(lo)) / (count - 1);
    for (int k = 0; k < count; ++k)
        grid[static_cast<std::size_t>(k)] = std::exp(std::log(lo) + step * k);
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

inline void check_lambda_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw invalid_parameter("lambda grid is empty");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(grid[k] > 0.0) || !std::isfinite(grid[k]))
            throw invalid_parameter("lambda grid entries must be finite and > 0");
        if (k > 0 && grid[k] <= grid[k - 1])
            throw invalid_parameter("lambda grid must be strictly ascending");
    }
}

// Solve along an ascending lambda grid, warm-starting each solve from the
// previous solution. A diverged solve is recorded converged=false and the
// sweep continues from the last successful iterate.
inline std::vector<SolveReport> sweep(const ModelSpec& spec, const Dataset& data,
                                      const std::vector<double>& lambda_grid,
                                      const SolverConfig& config,
                                      bool start_from_utilitarian = false) {
    check_lambda_grid(lambda_grid);
    std::vector<double> start = spec.initial_params(config.seed);
    if (start_from_utilitarian)
        start = minimize_mean(spec, data, config, std::move(start)).theta_hat;

    std::vector<SolveReport> reports;
    reports.reserve(lambda_grid.size());
    for (double lambda : lambda_grid) {
        try {
            reports.push_back(minimize(spec, data, TiltParam(lambda), config, start));
            if (all_finite(reports.back().theta_hat)) start = reports.back().theta_hat;
        } catch (const divergence_error& e) {
            SolveReport failed;
            failed.theta_hat = e.iterate;
            failed.objective = e.objective;
            failed.grad_norm = std::numeric_limits<double>::quiet_NaN();
            failed.iterations = e.iteration;
            failed.converged = false;
            reports.push_back(std::move(failed));
            // keep warm-starting from the last good point
        }
    }
    return reports;
}

}  // namespace tilt
