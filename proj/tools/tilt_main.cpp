// Command-line front end: lambda-sweep frontiers, the verification suite, and
// synthetic dataset generation.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tilt/tilt.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_solver = 1;
constexpr int exit_config = 2;
constexpr int exit_data = 3;

int thread_cap_from_env() {
    const char* raw = std::getenv("TILT_FRONTIER_THREADS");
    if (raw == nullptr) return 1;
    int v = std::atoi(raw);
    if (v < 1) return 1;
    return std::min(v, 64);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<std::size_t> parse_widths(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& part : split_commas(s)) {
        long v = std::atol(part.c_str());
        if (v < 1) throw tilt::config_error("invalid hidden width '" + part + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// One `key=value` per line; blank lines and `#` comments ignored.
std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tilt::config_error("cannot open config file '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw tilt::config_error("config line is not key=value: '" + t + "'");
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return kv;
}

double to_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    double x = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size() || v.empty())
        throw tilt::config_error("config key '" + key + "' is not a number: '" + v + "'");
    return x;
}

long to_long(const std::string& key, const std::string& v) {
    char* end = nullptr;
    long x = std::strtol(v.c_str(), &end, 10);
    if (end != v.c_str() + v.size() || v.empty())
        throw tilt::config_error("config key '" + key + "' is not an integer: '" + v + "'");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw tilt::config_error("config key '" + key + "' is not a boolean: '" + v + "'");
}

// Config-file values fill in every option the command line left untouched.
using Setter = std::function<void(const std::string&, const std::string&)>;

void merge_config(CLI::App* cmd, const std::string& config_path,
                  const std::map<std::string, Setter>& table) {
    if (config_path.empty()) return;
    for (const auto& [key, value] : read_config_file(config_path)) {
        auto it = table.find(key);
        if (it == table.end())
            throw tilt::config_error("unknown config key '" + key + "'");
        if (cmd->count("--" + key) == 0) it->second(key, value);
    }
}

std::string format_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct FrontierArgs {
    std::string data_path;
    std::string target;
    std::string group;
    std::string positive_label;
    std::string models = "logistic";
    std::string hidden;
    std::string activation = "relu";
    double lambda_min = 1e-3;
    double lambda_max = 1e2;
    int lambda_count = 25;
    std::uint64_t seed = 0;
    std::string out_dir = "tilt-out";
    double test_fraction = 0.0;
    bool start_from_utilitarian = false;
    double grad_tol = 1e-8;
    int max_iters = 200000;
    std::string config_path;
};

void write_resolved_frontier_config(const FrontierArgs& a, const fs::path& dir) {
    std::ofstream out(dir / "resolved_config.txt", std::ios::binary);
    out << "# " << tilt::version_string << "\n"
        << "data=" << a.data_path << "\n"
        << "target=" << a.target << "\n"
        << "group=" << a.group << "\n"
        << "positive-label=" << a.positive_label << "\n"
        << "model=" << a.models << "\n"
        << "hidden=" << a.hidden << "\n"
        << "activation=" << a.activation << "\n"
        << "lambda-min=" << format_num(a.lambda_min) << "\n"
        << "lambda-max=" << format_num(a.lambda_max) << "\n"
        << "lambda-count=" << a.lambda_count << "\n"
        << "seed=" << a.seed << "\n"
        << "test-fraction=" << format_num(a.test_fraction) << "\n"
        << "start-from-utilitarian=" << (a.start_from_utilitarian ? "true" : "false")
        << "\n"
        << "grad-tol=" << format_num(a.grad_tol) << "\n"
        << "max-iters=" << a.max_iters << "\n";
}

int run_frontier(FrontierArgs& args, CLI::App* cmd) {
    const std::map<std::string, Setter> table = {
        {"data", [&](const std::string&, const std::string& v) { args.data_path = v; }},
        {"target", [&](const std::string&, const std::string& v) { args.target = v; }},
        {"group", [&](const std::string&, const std::string& v) { args.group = v; }},
        {"positive-label",
         [&](const std::string&, const std::string& v) { args.positive_label = v; }},
        {"model", [&](const std::string&, const std::string& v) { args.models = v; }},
        {"models", [&](const std::string&, const std::string& v) { args.models = v; }},
        {"hidden", [&](const std::string&, const std::string& v) { args.hidden = v; }},
        {"activation",
         [&](const std::string&, const std::string& v) { args.activation = v; }},
        {"lambda-min",
         [&](const std::string& k, const std::string& v) { args.lambda_min = to_double(k, v); }},
        {"lambda-max",
         [&](const std::string& k, const std::string& v) { args.lambda_max = to_double(k, v); }},
        {"lambda-count",
         [&](const std::string& k, const std::string& v) {
             args.lambda_count = static_cast<int>(to_long(k, v));
         }},
        {"seed",
         [&](const std::string& k, const std::string& v) {
             args.seed = static_cast<std::uint64_t>(to_long(k, v));
         }},
        {"out", [&](const std::string&, const std::string& v) { args.out_dir = v; }},
        {"test-fraction",
         [&](const std::string& k, const std::string& v) {
             args.test_fraction = to_double(k, v);
         }},
        {"start-from-utilitarian",
         [&](const std::string& k, const std::string& v) {
             args.start_from_utilitarian = to_bool(k, v);
         }},
        {"grad-tol",
         [&](const std::string& k, const std::string& v) { args.grad_tol = to_double(k, v); }},
        {"max-iters",
         [&](const std::string& k, const std::string& v) {
             args.max_iters = static_cast<int>(to_long(k, v));
         }},
    };
    merge_config(cmd, args.config_path, table);
    if (args.data_path.empty()) throw tilt::config_error("--data is required");
    if (args.target.empty()) throw tilt::config_error("--target is required");
    if (args.activation != "relu" && args.activation != "tanh")
        throw tilt::config_error("unknown activation '" + args.activation + "'");

    tilt::LoadResult loaded =
        tilt::load_csv(args.data_path, args.target, args.group, args.positive_label);
    if (loaded.dropped_rows > 0)
        std::cerr << "dropped " << loaded.dropped_rows
                  << " rows with missing values\n";

    fs::create_directories(args.out_dir);
    write_resolved_frontier_config(args, args.out_dir);

    const tilt::Dataset* test_ptr = nullptr;
    tilt::Dataset train = std::move(loaded.dataset);
    tilt::Dataset test;
    if (args.test_fraction > 0.0) {
        auto parts = tilt::split(train, args.test_fraction, args.seed);
        train = std::move(parts.first);
        test = std::move(parts.second);
        test_ptr = &test;
    }
    // Features are standardized on train statistics; held-out rows reuse them.
    auto [train_scaled, scaler] = tilt::standardize(train);
    train = std::move(train_scaled);
    if (test_ptr != nullptr) test = tilt::apply(scaler, test);

    std::vector<double> grid =
        tilt::geometric_grid(args.lambda_min, args.lambda_max, args.lambda_count);

    tilt::SolverConfig config;
    config.grad_tol = args.grad_tol;
    config.max_iters = args.max_iters;
    config.seed = args.seed;
    config.threads = thread_cap_from_env();

    tilt::activation_kind act = args.activation == "tanh"
                                    ? tilt::activation_kind::tanh
                                    : tilt::activation_kind::relu;

    bool any_converged = false;
    for (const std::string& id : split_commas(args.models)) {
        tilt::ModelSpec spec =
            tilt::make_model(id, train.p, parse_widths(args.hidden), act);
        if (spec.family != tilt::model_family::linear_squared &&
            !train.binary_targets())
            throw tilt::config_error(
                "model '" + id +
                "' needs binary targets; pass --positive-label to binarize");

        tilt::FrontierResult result = tilt::build_frontier(
            spec, train, test_ptr, grid, config, args.start_from_utilitarian);

        for (const auto& rec : result.records) {
            if (rec.split != "train") continue;
            std::cout << "model=" << rec.model_id << " lambda=" << rec.lambda
                      << " avg=" << rec.avg_individual_loss
                      << " max=" << rec.max_individual_loss << " gamma="
                      << (rec.gamma_hat ? std::to_string(*rec.gamma_hat) : "nan")
                      << " converged=" << (rec.converged ? "true" : "false")
                      << "\n";
            any_converged = any_converged || rec.converged;
        }

        fs::path base = fs::path(args.out_dir) / ("frontier_" + spec.id());
        std::ofstream csv(base.string() + ".csv", std::ios::binary);
        tilt::write_frontier_csv(result, csv);
        std::ofstream jsonl(base.string() + ".jsonl", std::ios::binary);
        tilt::write_frontier_jsonl(result, jsonl);
    }
    return any_converged ? exit_ok : exit_solver;
}

struct VerifyArgs {
    std::string checks;
    std::string out_dir = ".";
    std::string config_path;
};

int run_verify(VerifyArgs& args, CLI::App* cmd) {
    const std::map<std::string, Setter> table = {
        {"checks", [&](const std::string&, const std::string& v) { args.checks = v; }},
        {"out", [&](const std::string&, const std::string& v) { args.out_dir = v; }},
    };
    merge_config(cmd, args.config_path, table);

    std::vector<tilt::CheckReport> reports;
    if (args.checks.empty()) {
        reports = tilt::run_all_checks();
    } else {
        for (const std::string& name : split_commas(args.checks))
            reports.push_back(tilt::run_check(name));
    }
    fs::create_directories(args.out_dir);
    std::ofstream out(fs::path(args.out_dir) / "checks.jsonl", std::ios::binary);
    tilt::write_check_jsonl(reports, out);
    std::ofstream cfg(fs::path(args.out_dir) / "resolved_config.txt", std::ios::binary);
    cfg << "# " << tilt::version_string << "\n"
        << "checks=" << args.checks << "\n";

    bool all_passed = true;
    for (const auto& r : reports) {
        std::cout << (r.passed ? "PASS " : (r.inconclusive ? "INCONCLUSIVE " : "FAIL "))
                  << r.check_id << ": " << r.details << "\n";
        all_passed = all_passed && r.passed;
    }
    return all_passed ? exit_ok : exit_solver;
}

struct GenArgs {
    std::string kind = "linear-noise";
    std::size_t n = 100;
    std::size_t p = 1;
    std::string noise = "gaussian";
    double sigma = 1.0;
    double rate = 1.0;
    double group_imbalance = 0.5;
    std::uint64_t seed = 0;
    std::string out_file = "synthetic.csv";
    std::string config_path;
};

int run_gen(GenArgs& args, CLI::App* cmd) {
    const std::map<std::string, Setter> table = {
        {"kind", [&](const std::string&, const std::string& v) { args.kind = v; }},
        {"n",
         [&](const std::string& k, const std::string& v) {
             args.n = static_cast<std::size_t>(to_long(k, v));
         }},
        {"p",
         [&](const std::string& k, const std::string& v) {
             args.p = static_cast<std::size_t>(to_long(k, v));
         }},
        {"noise", [&](const std::string&, const std::string& v) { args.noise = v; }},
        {"sigma",
         [&](const std::string& k, const std::string& v) { args.sigma = to_double(k, v); }},
        {"rate",
         [&](const std::string& k, const std::string& v) { args.rate = to_double(k, v); }},
        {"group-imbalance",
         [&](const std::string& k, const std::string& v) {
             args.group_imbalance = to_double(k, v);
         }},
        {"seed",
         [&](const std::string& k, const std::string& v) {
             args.seed = static_cast<std::uint64_t>(to_long(k, v));
         }},
        {"out", [&](const std::string&, const std::string& v) { args.out_file = v; }},
    };
    merge_config(cmd, args.config_path, table);

    tilt::SyntheticConfig cfg;
    if (args.kind == "linear-noise") cfg.kind = tilt::synthetic_kind::linear_noise;
    else if (args.kind == "two-group-logistic")
        cfg.kind = tilt::synthetic_kind::two_group_logistic;
    else throw tilt::config_error("unknown kind '" + args.kind + "'");
    if (args.noise == "gaussian") cfg.noise = tilt::noise_kind::gaussian;
    else if (args.noise == "skewed-exponential")
        cfg.noise = tilt::noise_kind::skewed_exponential;
    else throw tilt::config_error("unknown noise '" + args.noise + "'");
    cfg.n = args.n;
    cfg.p = args.p;
    cfg.sigma = args.sigma;
    cfg.rate = args.rate;
    cfg.group_imbalance = args.group_imbalance;
    cfg.seed = args.seed;

    tilt::GeneratedData gen = tilt::generate(cfg);
    tilt::save_csv(gen.data, args.out_file);

    nlohmann::json meta{{"kind", args.kind},
                        {"n", cfg.n},
                        {"p", cfg.p},
                        {"noise", args.noise},
                        {"sigma", cfg.sigma},
                        {"rate", cfg.rate},
                        {"group_imbalance", cfg.group_imbalance},
                        {"seed", cfg.seed},
                        {"theta_star", gen.theta_star},
                        {"version", tilt::version_string}};
    if (!gen.theta_shift.empty()) meta["theta_shift"] = gen.theta_shift;
    std::ofstream meta_out(args.out_file + ".meta.json", std::ios::binary);
    meta_out << meta.dump(2) << '\n';

    std::cout << "wrote " << gen.data.n << " rows to " << args.out_file << "\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tilted loss objectives: sweep between mean-loss and worst-case-loss optima"};
    app.require_subcommand(1);

    FrontierArgs fargs;
    CLI::App* frontier = app.add_subcommand(
        "frontier", "Sweep lambda and emit the average-vs-maximum loss tradeoff");
    frontier->add_option("--data", fargs.data_path, "input CSV");
    frontier->add_option("--target", fargs.target, "target column");
    frontier->add_option("--group", fargs.group, "group label column");
    frontier->add_option("--positive-label", fargs.positive_label,
                         "target value treated as 1");
    frontier->add_option("--model,--models", fargs.models,
                         "comma-separated model ids (linear, logistic, mlpK)");
    frontier->add_option("--hidden", fargs.hidden, "mlp hidden widths, comma-separated");
    frontier->add_option("--activation", fargs.activation, "relu or tanh");
    frontier->add_option("--lambda-min", fargs.lambda_min, "smallest lambda");
    frontier->add_option("--lambda-max", fargs.lambda_max, "largest lambda");
    frontier->add_option("--lambda-count", fargs.lambda_count, "grid size");
    frontier->add_option("--seed", fargs.seed, "seed for init and splits");
    frontier->add_option("--out", fargs.out_dir, "output directory");
    frontier->add_option("--test-fraction", fargs.test_fraction,
                         "held-out fraction (0 = train only)");
    frontier->add_flag("--start-from-utilitarian", fargs.start_from_utilitarian,
                       "warm-start the sweep from the mean-loss minimizer");
    frontier->add_option("--grad-tol", fargs.grad_tol, "solver gradient tolerance");
    frontier->add_option("--max-iters", fargs.max_iters, "solver iteration cap");
    frontier->add_option("--config", fargs.config_path,
                         "key=value config file; flags win");

    VerifyArgs vargs;
    CLI::App* verify = app.add_subcommand("verify", "Run the numerical check suite");
    verify->add_option("--checks", vargs.checks,
                       "comma-separated check names (default: all)");
    verify->add_option("--out", vargs.out_dir, "directory for checks.jsonl");
    verify->add_option("--config", vargs.config_path,
                       "key=value config file; flags win");

    GenArgs gargs;
    CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic dataset CSV");
    gen->add_option("--kind", gargs.kind, "linear-noise or two-group-logistic");
    gen->add_option("--n", gargs.n, "rows");
    gen->add_option("--p", gargs.p, "features");
    gen->add_option("--noise", gargs.noise, "gaussian or skewed-exponential");
    gen->add_option("--sigma", gargs.sigma, "gaussian noise scale");
    gen->add_option("--rate", gargs.rate, "exponential noise rate");
    gen->add_option("--group-imbalance", gargs.group_imbalance,
                    "minority group fraction");
    gen->add_option("--seed", gargs.seed, "generator seed");
    gen->add_option("--out", gargs.out_file, "output CSV path");
    gen->add_option("--config", gargs.config_path, "key=value config file; flags win");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_ok : exit_config;
    }

    try {
        if (frontier->parsed()) return run_frontier(fargs, frontier);
        if (verify->parsed()) return run_verify(vargs, verify);
        if (gen->parsed()) return run_gen(gargs, gen);
    } catch (const tilt::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const tilt::invalid_parameter& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const tilt::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return exit_data;
    } catch (const tilt::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_solver;
    }
    return exit_config;
}
