#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tilt/dataset.hpp"
#include "tilt/error.hpp"
#include "tilt/loss.hpp"
#include "tilt/model.hpp"
#include "tilt/random.hpp"
#include "tilt/solver.hpp"

namespace tilt {

struct CheckReport {
    std::string check_id;
    bool passed = false;
    bool inconclusive = false;
    std::vector<double> measured;
    std::vector<double> threshold;
    std::string details;
};

inline nlohmann::json to_json(const CheckReport& r) {
    return {{"check_id", r.check_id},     {"passed", r.passed},
            {"inconclusive", r.inconclusive}, {"measured", r.measured},
            {"threshold", r.threshold},   {"details", r.details}};
}

inline void write_check_jsonl(const std::vector<CheckReport>& reports,
                              std::ostream& out) {
    for (const auto& r : reports) out << to_json(r).dump() << '\n';
}

namespace oracle {

// Transparent 1-D grid search: full scan at the given resolution, then two
// (by default) refinement passes around the best point at 10x resolution.
// Deliberately independent of the gradient-based solver.
struct GridResult {
    double theta = 0.0;
    double value = 0.0;
    bool interior = false;  // false when the best point sits on the box edge
};

template <typename Fn>
GridResult grid_minimize_1d(Fn&& fn, double lo, double hi, double resolution,
                            int refinements = 2) {
    GridResult best;
    double cur_lo = lo, cur_hi = hi, step = resolution;
    for (int pass = 0; pass <= refinements; ++pass) {
        double best_theta = cur_lo;
        double best_value = fn(cur_lo);
        for (double t = cur_lo + step; t <= cur_hi + step * 0.5; t += step) {
            double v = fn(t);
            if (v < best_value) {
                best_value = v;
                best_theta = t;
            }
        }
        best.theta = best_theta;
        best.value = best_value;
        best.interior = best_theta > lo + step * 0.5 && best_theta < hi - step * 0.5;
        cur_lo = std::max(lo, best_theta - step);
        cur_hi = std::min(hi, best_theta + step);
        step /= 10.0;
    }
    return best;
}

// Descending-sort lexicographic comparison; returns true when a strictly
// precedes b in the leximax order.
inline bool leximax_less(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end(), std::greater<>());
    std::sort(b.begin(), b.end(), std::greater<>());
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace oracle

namespace detail {

// The hand-built convex instance: univariate no-intercept squared loss on
// x = [1, 2], y = [0, 10]. Mean minimizer 4, minimax minimizer 10/3.
inline Dataset two_point_instance() {
    Dataset ds;
    ds.n = 2;
    ds.p = 1;
    ds.features = {1.0, 2.0};
    ds.targets = {0.0, 10.0};
    ds.feature_names = {"x0"};
    return ds;
}

inline ModelSpec no_intercept_linear() {
    ModelSpec spec;
    spec.family = model_family::linear_squared;
    spec.input_dim = 1;
    spec.fit_intercept = false;
    return spec;
}

// (theta - y_i)^2 family as x = 1 features.
inline Dataset quadratic_instance(std::vector<double> targets) {
    Dataset ds;
    ds.n = targets.size();
    ds.p = 1;
    ds.features.assign(ds.n, 1.0);
    ds.targets = std::move(targets);
    ds.feature_names = {"x0"};
    return ds;
}

inline double max_loss_over(const ModelSpec& spec, const Dataset& data, double theta) {
    std::vector<double> t{theta};
    double worst = 0.0;
    for (std::size_t i = 0; i < data.n; ++i)
        worst = std::max(worst, per_sample_loss(spec, t, data.row(i), data.targets[i]));
    return worst;
}

inline std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        os << v[i];
    }
    return os.str();
}

}  // namespace detail

// Solutions at extreme lambda approach the mean minimizer and the minimax
// minimizer; the latter is checked against a grid-search oracle.
inline CheckReport check_minimizer_limits(Dataset data) {
    CheckReport report;
    report.check_id = "minimizer_limits";
    ModelSpec spec = detail::no_intercept_linear();

    SolverConfig config;
    config.grad_tol = 1e-11;
    config.max_iters = 200000;
    std::vector<double> init{0.0};

    double theta_small =
        minimize(spec, data, TiltParam(1e-4), config, init).theta_hat[0];
    double theta_large =
        minimize(spec, data, TiltParam(1e3), config, init).theta_hat[0];

    // Closed-form mean minimizer for the no-intercept linear family.
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) {
        sxy += data.features[i] * data.targets[i];
        sxx += data.features[i] * data.features[i];
    }
    double theta_mean = sxy / sxx;

    // Brute-force minimax over the hull of the per-sample zero-loss points.
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < data.n; ++i) {
        double z = data.targets[i] / data.features[i];
        lo = std::min(lo, z);
        hi = std::max(hi, z);
    }
    auto minimax = oracle::grid_minimize_1d(
        [&](double t) { return detail::max_loss_over(spec, data, t); }, lo - 1.0,
        hi + 1.0, 1e-4);
    if (!minimax.interior) {
        report.inconclusive = true;
        report.details = "grid oracle did not bracket an interior minimum";
        return report;
    }

    double err_small = std::abs(theta_small - theta_mean);
    double err_large = std::abs(theta_large - minimax.theta);
    report.measured = {err_small, err_large};
    report.threshold = {1e-3, 5e-2};
    report.passed = err_small <= 1e-3 && err_large <= 5e-2;
    std::ostringstream os;
    os << "theta(1e-4)=" << theta_small << " vs mean minimizer " << theta_mean
       << "; theta(1e3)=" << theta_large << " vs minimax oracle " << minimax.theta;
    report.details = os.str();
    return report;
}

inline CheckReport check_minimizer_limits() {
    return check_minimizer_limits(detail::two_point_instance());
}

// At large lambda the tilted ordering of finite profiles recovers the leximax
// minimum (descending-sort lexicographic oracle).
inline CheckReport check_leximax_limit(const std::vector<std::vector<double>>& profiles,
                                       const std::string& id = "leximax_limit") {
    CheckReport report;
    report.check_id = id;
    if (profiles.size() < 1) throw invalid_input("need at least one profile");
    if (profiles.size() == 1) {
        report.passed = true;
        report.details = "single profile: trivially the leximax minimum";
        return report;
    }

    std::size_t oracle_idx = 0;
    bool tie = false;
    for (std::size_t i = 1; i < profiles.size(); ++i) {
        if (oracle::leximax_less(profiles[i], profiles[oracle_idx])) {
            oracle_idx = i;
            tie = false;
        } else if (!oracle::leximax_less(profiles[oracle_idx], profiles[i])) {
            tie = true;
        }
    }
    if (tie) {
        report.inconclusive = true;
        report.details = "no unique leximax minimum";
        return report;
    }

    std::ostringstream os;
    std::size_t argmin_at_largest = 0;
    for (double lambda : {10.0, 50.0, 250.0}) {
        std::size_t argmin = 0;
        double best = 1e300;
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            double v = tilted_value(LossProfile(profiles[i]), TiltParam(lambda));
            if (v < best) {
                best = v;
                argmin = i;
            }
        }
        os << "lambda=" << lambda << " argmin=" << argmin << "; ";
        argmin_at_largest = argmin;
    }
    report.measured = {static_cast<double>(argmin_at_largest)};
    report.threshold = {static_cast<double>(oracle_idx)};
    report.passed = argmin_at_largest == oracle_idx;
    report.details = os.str() + "oracle=" + std::to_string(oracle_idx);
    return report;
}

inline CheckReport check_leximax_limit() {
    // Max-separated and max-tied examples; both must recover the oracle pick.
    CheckReport a = check_leximax_limit({{1.0, 2.0, 3.0}, {0.5, 2.75, 2.75}},
                                        "leximax_limit");
    CheckReport b = check_leximax_limit({{2.0, 2.0}, {2.0, 1.9}}, "leximax_limit");
    CheckReport report;
    report.check_id = "leximax_limit";
    report.passed = a.passed && b.passed;
    report.inconclusive = a.inconclusive || b.inconclusive;
    report.measured = {a.measured.empty() ? -1.0 : a.measured[0],
                       b.measured.empty() ? -1.0 : b.measured[0]};
    report.threshold = {a.threshold.empty() ? -1.0 : a.threshold[0],
                        b.threshold.empty() ? -1.0 : b.threshold[0]};
    report.details = "max-separated: [" + a.details + "]; max-tied: [" + b.details + "]";
    return report;
}

// The optimum satisfies the twisted-measure least-squares identity
// theta = sum(w x y) / sum(w x^2) with w the tilt weights at the optimum.
inline CheckReport check_regression_fixed_point() {
    CheckReport report;
    report.check_id = "regression_fixed_point";
    Dataset data = detail::two_point_instance();
    ModelSpec spec = detail::no_intercept_linear();

    SolverConfig config;
    config.grad_tol = 1e-12;
    config.max_iters = 200000;
    std::vector<double> init{0.0};

    // lambda -> 0 limit is ordinary least squares.
    double theta_ols_limit =
        minimize(spec, data, TiltParam(1e-8), config, init).theta_hat[0];
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) {
        sxy += data.features[i] * data.targets[i];
        sxx += data.features[i] * data.features[i];
    }
    double ols_err = std::abs(theta_ols_limit - sxy / sxx);

    // Twisted-measure self-consistency at lambda = 0.05.
    TiltParam tilt(0.05);
    double theta_hat = minimize(spec, data, tilt, config, init).theta_hat[0];
    LossProfile profile = loss_profile(spec, std::vector<double>{theta_hat}, data);
    std::vector<double> w = tilt_weights(profile, tilt);
    double wxy = 0.0, wxx = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) {
        wxy += w[i] * data.features[i] * data.targets[i];
        wxx += w[i] * data.features[i] * data.features[i];
    }
    double residual = std::abs(theta_hat - wxy / wxx) / std::abs(theta_hat);

    // Large-lambda concentration: the argmax-loss observations carry nearly
    // all of the twisted measure at lambda = 50 / gap.
    const auto& losses = profile.values();
    double lmax = *std::max_element(losses.begin(), losses.end());
    double second = -1e300;
    for (double l : losses)
        if (l < lmax) second = std::max(second, l);
    double gap = lmax - second;
    std::vector<double> wc = tilt_weights(profile, TiltParam(50.0 / gap));
    double mass = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i)
        if (losses[i] >= lmax - 1e-9 * std::max(1.0, lmax)) mass += wc[i];

    report.measured = {ols_err, residual, mass};
    report.threshold = {1e-4, 1e-8, 0.99};
    report.passed = ols_err <= 1e-4 && residual <= 1e-8 && mass >= 0.99;
    std::ostringstream os;
    os << "ols_err=" << ols_err << " fixed_point_residual=" << residual
       << " max_set_mass=" << mass << " (theta_hat=" << theta_hat << ")";
    report.details = os.str();
    return report;
}

// Monte Carlo mean of grad L(theta*) across resamples: near zero under
// symmetric noise, biased away from zero under skewed noise. Features are
// drawn with nonzero mean so a first-order bias is visible in the gradient.
inline CheckReport check_identifiability(noise_kind noise, int trials = 400,
                                         std::uint64_t seed = 20240001) {
    if (trials < 2) throw invalid_parameter("need at least two trials");
    CheckReport report;
    report.check_id = noise == noise_kind::gaussian ? "identifiability_symmetric"
                                                    : "identifiability_skewed";
    const std::size_t n = 500;
    const double theta_star = 2.0;
    ModelSpec spec = detail::no_intercept_linear();
    std::vector<double> theta{theta_star};

    Rng rng(seed);
    std::ostringstream os;
    bool pass = true;
    for (double lambda : {0.1, 1.0}) {
        std::vector<double> grads(static_cast<std::size_t>(trials));
        for (int t = 0; t < trials; ++t) {
            Dataset ds;
            ds.n = n;
            ds.p = 1;
            ds.feature_names = {"x0"};
            ds.features.resize(n);
            ds.targets.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                double x = 1.0 + rng.gaussian();
                double eps = noise == noise_kind::gaussian
                                 ? rng.gaussian()
                                 : rng.exponential(1.0) - 1.0;
                ds.features[i] = x;
                ds.targets[i] = theta_star * x + eps;
            }
            grads[static_cast<std::size_t>(t)] =
                tilted_objective_and_grad(spec, theta, ds, TiltParam(lambda)).grad[0];
        }
        double mean = kahan_sum(grads) / trials;
        double ss = 0.0;
        for (double g : grads) ss += (g - mean) * (g - mean);
        double se = std::sqrt(ss / (trials - 1)) / std::sqrt(double(trials));
        double zscore = std::abs(mean) / se;
        report.measured.push_back(zscore);
        if (noise == noise_kind::gaussian) {
            report.threshold.push_back(3.0);
            pass = pass && zscore <= 3.0;
        } else {
            report.threshold.push_back(5.0);
            pass = pass && zscore >= 5.0;
        }
        os << "lambda=" << lambda << ": mean=" << mean << " se=" << se
           << " |z|=" << zscore << "; ";
    }
    report.passed = pass;
    report.details = os.str();
    return report;
}

// Fixed-step descent on the quadratic family stays under the geometric
// suboptimality envelope at every iteration.
inline CheckReport check_gd_rate(std::vector<double> targets = {0.0, 1.0},
                                 double theta0 = 5.0) {
    CheckReport report;
    report.check_id = "gd_rate";
    Dataset data = detail::quadratic_instance(std::move(targets));
    ModelSpec spec = detail::no_intercept_linear();

    // Curvature constants of (theta - y_i)^2 on the iterate bounding box.
    const double c_min = 2.0, c_max = 2.0;
    double box_lo = theta0, box_hi = theta0;
    for (double y : data.targets) {
        box_lo = std::min(box_lo, y);
        box_hi = std::max(box_hi, y);
    }
    double grad_bound = 0.0;
    for (double y : data.targets) {
        grad_bound = std::max(grad_bound, std::abs(2.0 * (box_lo - y)));
        grad_bound = std::max(grad_bound, std::abs(2.0 * (box_hi - y)));
    }
    // Degenerate box (start at the optimum of a constant-target instance):
    // any positive C keeps the step rule valid, the gradient is already zero.
    const double C = std::max(grad_bound * grad_bound, 1.0);

    std::ostringstream os;
    bool pass = true;
    double worst_violation = 0.0;
    for (double lambda : {0.1, 1.0, 5.0}) {
        SolverConfig fixed;
        fixed.step_rule = step_rule_kind::prop5_fixed;
        fixed.prop5_C = C;
        fixed.prop5_C_min = c_min;
        fixed.prop5_C_max = c_max;
        fixed.max_iters = 500;
        fixed.grad_tol = 1e-15;
        SolveReport run =
            minimize(spec, data, TiltParam(lambda), fixed, {theta0});

        SolverConfig tight;
        tight.grad_tol = 1e-12;
        tight.max_iters = 500000;
        double ref = minimize(spec, data, TiltParam(lambda), tight, {theta0}).objective;
        for (double v : run.objective_trace) ref = std::min(ref, v);

        double rho = 1.0 - c_min / (c_max + 2.0 * C * lambda);
        double initial_gap = run.objective_trace.front() - ref;
        double envelope = initial_gap;
        for (std::size_t k = 0; k < run.objective_trace.size(); ++k) {
            double sub = run.objective_trace[k] - ref;
            worst_violation = std::max(worst_violation, sub - envelope);
            if (sub > envelope + 1e-9) pass = false;
            envelope *= rho;
        }
        double steps = static_cast<double>(run.objective_trace.size() - 1);
        double final_sub = run.objective_trace.back() - ref;
        os << "lambda=" << lambda << ": rho=" << rho << " measured_rate="
           << (initial_gap > 0.0 && final_sub > 0.0
                   ? std::pow(final_sub / initial_gap, 1.0 / steps)
                   : 0.0)
           << "; ";
    }
    report.measured = {worst_violation};
    report.threshold = {1e-9};
    report.passed = pass;
    report.details = os.str() + "C=" + std::to_string(C);
    return report;
}

// On a finite parameter grid, minimizing L coincides index-by-index with
// maximizing mean exponential utility.
inline CheckReport check_prop1_argmin_equivalence() {
    CheckReport report;
    report.check_id = "prop1_argmin_equivalence";
    Dataset data = detail::quadratic_instance({0.0, 1.0});
    ModelSpec spec = detail::no_intercept_linear();

    const int points = 1001;
    std::ostringstream os;
    bool pass = true;
    for (double lambda : {0.1, 1.0, 10.0}) {
        std::size_t argmin_l = 0, argmax_u = 0;
        double best_l = 1e300, best_u = -1e300;
        bool tie = false;
        for (int k = 0; k < points; ++k) {
            double theta = 5.0 * k / (points - 1);
            std::vector<double> t{theta};
            LossProfile profile = loss_profile(spec, t, data);
            double l = tilted_value(profile, TiltParam(lambda));
            // Expected utility with u(l) = -exp(lambda l), evaluated naively;
            // lambda * max loss stays far from overflow on this instance.
            KahanSum<> acc;
            for (double li : profile.values()) acc.add(-std::exp(lambda * li));
            double u = acc.value() / static_cast<double>(profile.size());
            if (l < best_l) {
                best_l = l;
                argmin_l = static_cast<std::size_t>(k);
            } else if (l == best_l) {
                tie = true;
            }
            if (u > best_u) {
                best_u = u;
                argmax_u = static_cast<std::size_t>(k);
            }
        }
        if (tie) {
            report.inconclusive = true;
            report.details = "tied grid values";
            return report;
        }
        pass = pass && argmin_l == argmax_u;
        report.measured.push_back(static_cast<double>(argmin_l));
        report.threshold.push_back(static_cast<double>(argmax_u));
        os << "lambda=" << lambda << ": argmin_L=" << argmin_l
           << " argmax_U=" << argmax_u << "; ";
    }
    report.passed = pass;
    report.details = os.str();
    return report;
}

// gamma-decomposition of the optimum bounds the mean + max penalized problem:
// penalized(profile, gamma) equals L/gamma, and the penalized minimum over
// theta cannot exceed it.
struct RegBoundInstance {
    std::vector<double> x, y;
    double lambda;
};

inline CheckReport check_regularization_bound(
    const std::vector<RegBoundInstance>& instances) {
    CheckReport report;
    report.check_id = "regularization_bound";
    ModelSpec spec = detail::no_intercept_linear();
    std::ostringstream os;
    bool pass = true;
    double worst_identity = 0.0, worst_overshoot = -1e300;
    for (const auto& inst : instances) {
        Dataset data;
        data.n = inst.x.size();
        data.p = 1;
        data.features = inst.x;
        data.targets = inst.y;
        data.feature_names = {"x0"};

        SolverConfig config;
        config.grad_tol = 1e-10;
        config.max_iters = 500000;
        TiltParam tilt(inst.lambda);
        SolveReport solved = minimize(spec, data, tilt, config, {0.0});
        LossProfile profile = loss_profile(spec, solved.theta_hat, data);
        TiltDecomposition d = decompose(profile, tilt);
        if (!d.gamma) {
            report.inconclusive = true;
            report.details = "degenerate profile: mean equals max";
            return report;
        }
        double gamma = *d.gamma;
        double bound = d.value / gamma;
        double identity_err = std::abs(penalized_value(profile, gamma) - bound);
        worst_identity = std::max(worst_identity, identity_err);

        // Grid-search the penalized problem directly.
        double lo = 1e300, hi = -1e300;
        for (std::size_t i = 0; i < data.n; ++i) {
            double z = data.targets[i] / data.features[i];
            lo = std::min(lo, z);
            hi = std::max(hi, z);
        }
        auto best = oracle::grid_minimize_1d(
            [&](double t) {
                LossProfile p = loss_profile(spec, std::vector<double>{t}, data);
                return penalized_value(p, gamma);
            },
            lo - 1.0, hi + 1.0, 1e-4);
        double overshoot = best.value - bound;  // must be <= ~0
        worst_overshoot = std::max(worst_overshoot, overshoot);
        if (identity_err > 1e-9 || overshoot > 1e-6) pass = false;
        os << "lambda=" << inst.lambda << ": gamma=" << gamma
           << " identity_err=" << identity_err << " penalized_min-bound=" << overshoot
           << "; ";
    }
    report.measured = {worst_identity, worst_overshoot};
    report.threshold = {1e-9, 1e-6};
    report.passed = pass;
    report.details = os.str();
    return report;
}

inline CheckReport check_regularization_bound() {
    return check_regularization_bound({
        {{1.0, 2.0}, {0.0, 10.0}, 0.05},
        {{1.0, 1.0, 1.0}, {0.0, 1.0, 10.0}, 0.3},
        {{1.0, 3.0}, {2.0, 8.0}, 0.2},
    });
}

inline const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names = {
        "minimizer_limits",          "leximax_limit",
        "regression_fixed_point",    "identifiability_symmetric",
        "identifiability_skewed",    "gd_rate",
        "prop1_argmin_equivalence",  "regularization_bound",
    };
    return names;
}

inline CheckReport run_check(const std::string& name) {
    if (name == "minimizer_limits") return check_minimizer_limits();
    if (name == "leximax_limit") return check_leximax_limit();
    if (name == "regression_fixed_point") return check_regression_fixed_point();
    if (name == "identifiability_symmetric")
        return check_identifiability(noise_kind::gaussian);
    if (name == "identifiability_skewed")
        return check_identifiability(noise_kind::skewed_exponential);
    if (name == "gd_rate") return check_gd_rate();
    if (name == "prop1_argmin_equivalence") return check_prop1_argmin_equivalence();
    if (name == "regularization_bound") return check_regularization_bound();
    throw config_error("unknown check '" + name + "'");
}

inline std::vector<CheckReport> run_all_checks() {
    std::vector<CheckReport> reports;
    for (const auto& name : check_names()) reports.push_back(run_check(name));
    return reports;
}

}  // namespace tilt
