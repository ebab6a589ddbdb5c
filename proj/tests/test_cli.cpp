#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string cli = TILT_CLI_PATH;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("tilt_cli_test_" + std::to_string(std::rand()) +
                std::to_string(std::chrono::steady_clock::now().time_since_epoch().count() % 100000));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

int run(const std::string& args, const fs::path& log) {
    std::string cmd = cli + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("gen writes a csv and a metadata sidecar", "[cli]") {
    TempDir tmp;
    fs::path csv = tmp.path / "synth.csv";
    int code = run("gen --kind two-group-logistic --n 80 --p 3 --seed 5 --out " +
                       csv.string(),
                   tmp.path / "log.txt");
    REQUIRE(code == 0);
    CHECK(fs::exists(csv));
    CHECK(fs::exists(csv.string() + ".meta.json"));
    std::string meta = slurp(csv.string() + ".meta.json");
    CHECK(meta.find("theta_star") != std::string::npos);
    CHECK(meta.find("\"seed\": 5") != std::string::npos);

    // Same seed and config: byte-identical output.
    fs::path csv2 = tmp.path / "synth2.csv";
    REQUIRE(run("gen --kind two-group-logistic --n 80 --p 3 --seed 5 --out " +
                    csv2.string(),
                tmp.path / "log_rep.txt") == 0);
    CHECK(slurp(csv) == slurp(csv2));

    // Invalid config exits 2.
    CHECK(run("gen --kind nope --out " + (tmp.path / "x.csv").string(),
              tmp.path / "log2.txt") == 2);
    CHECK(run("gen --n 0 --out " + (tmp.path / "y.csv").string(),
              tmp.path / "log3.txt") == 2);
}

TEST_CASE("frontier end to end on generated data", "[cli]") {
    TempDir tmp;
    fs::path csv = tmp.path / "synth.csv";
    REQUIRE(run("gen --kind two-group-logistic --n 120 --p 3 --seed 9 --out " +
                    csv.string(),
                tmp.path / "gen.txt") == 0);

    fs::path out = tmp.path / "out";
    int code = run("frontier --data " + csv.string() +
                       " --target y --group group --model logistic"
                       " --lambda-min 0.01 --lambda-max 10 --lambda-count 5"
                       " --seed 1 --out " + out.string(),
                   tmp.path / "run.txt");
    REQUIRE(code == 0);
    CHECK(fs::exists(out / "frontier_logistic.csv"));
    CHECK(fs::exists(out / "frontier_logistic.jsonl"));
    CHECK(fs::exists(out / "resolved_config.txt"));

    std::string config_echo = slurp(out / "resolved_config.txt");
    CHECK(config_echo.find("tilt 0.1.0") != std::string::npos);
    CHECK(config_echo.find("lambda-count=5") != std::string::npos);

    std::string table = slurp(out / "frontier_logistic.csv");
    std::istringstream lines(table);
    std::string line;
    int rows = -1;  // skip header
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 5);

    std::string summary = slurp(tmp.path / "run.txt");
    CHECK(summary.find("lambda=") != std::string::npos);

    // A second run with the same flags is byte-identical.
    fs::path out2 = tmp.path / "out2";
    REQUIRE(run("frontier --data " + csv.string() +
                    " --target y --group group --model logistic"
                    " --lambda-min 0.01 --lambda-max 10 --lambda-count 5"
                    " --seed 1 --out " + out2.string(),
                tmp.path / "run2.txt") == 0);
    CHECK(slurp(out / "frontier_logistic.csv") == slurp(out2 / "frontier_logistic.csv"));
    CHECK(slurp(out / "frontier_logistic.jsonl") ==
          slurp(out2 / "frontier_logistic.jsonl"));

    // The thread cap changes scheduling only, never bytes.
    fs::path out_mt = tmp.path / "out_mt";
    {
        std::string cmd = "TILT_FRONTIER_THREADS=4 " + cli + " frontier --data " +
                          csv.string() +
                          " --target y --group group --model logistic"
                          " --lambda-min 0.01 --lambda-max 10 --lambda-count 5"
                          " --seed 1 --out " + out_mt.string() + " > " +
                          (tmp.path / "mt.txt").string() + " 2>&1";
        REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    }
    CHECK(slurp(out / "frontier_logistic.csv") ==
          slurp(out_mt / "frontier_logistic.csv"));

    // With a held-out fraction there is one train and one test row per lambda.
    fs::path out3 = tmp.path / "out3";
    REQUIRE(run("frontier --data " + csv.string() +
                    " --target y --group group --model logistic"
                    " --lambda-min 0.01 --lambda-max 10 --lambda-count 5"
                    " --test-fraction 0.25 --seed 1 --out " + out3.string(),
                tmp.path / "run3.txt") == 0);
    std::istringstream split_lines(slurp(out3 / "frontier_logistic.csv"));
    int train_rows = 0, test_rows = 0;
    std::string split_line;
    std::getline(split_lines, split_line);  // header
    while (std::getline(split_lines, split_line)) {
        if (split_line.find(",train,") != std::string::npos) ++train_rows;
        if (split_line.find(",test,") != std::string::npos) ++test_rows;
    }
    CHECK(train_rows == 5);
    CHECK(test_rows == 5);
}

TEST_CASE("frontier model ladder writes one file per model", "[cli]") {
    TempDir tmp;
    fs::path csv = tmp.path / "synth.csv";
    REQUIRE(run("gen --kind two-group-logistic --n 60 --p 2 --seed 3 --out " +
                    csv.string(),
                tmp.path / "gen.txt") == 0);
    fs::path out = tmp.path / "out";
    int code = run("frontier --data " + csv.string() +
                       " --target y --models logistic,mlp1,mlp2,mlp3,mlp4 --hidden 4"
                       " --lambda-min 0.1 --lambda-max 1 --lambda-count 2"
                       " --max-iters 200 --grad-tol 1e-3 --seed 1 --out " +
                       out.string(),
                   tmp.path / "run.txt");
    REQUIRE(code == 0);
    for (const std::string id : {"logistic", "mlp1", "mlp2", "mlp3", "mlp4"})
        CHECK(fs::exists(out / ("frontier_" + id + ".csv")));
}

TEST_CASE("frontier exit codes and error messages", "[cli]") {
    TempDir tmp;
    fs::path csv = tmp.path / "synth.csv";
    REQUIRE(run("gen --n 30 --p 2 --seed 2 --out " + csv.string(),
                tmp.path / "gen.txt") == 0);

    // Missing target column: data error names the column and exits 3.
    fs::path log = tmp.path / "missing.txt";
    CHECK(run("frontier --data " + csv.string() + " --target nope --out " +
                  (tmp.path / "o1").string(),
              log) == 3);
    CHECK(slurp(log).find("nope") != std::string::npos);

    // Missing file is a data error too.
    CHECK(run("frontier --data /definitely/not/here.csv --target y --out " +
                  (tmp.path / "o2").string(),
              tmp.path / "nf.txt") == 3);

    // Classification model on a real-valued target is a config error.
    CHECK(run("frontier --data " + csv.string() + " --target y --model logistic"
                  " --out " + (tmp.path / "o3").string(),
              tmp.path / "cfg.txt") == 2);

    // Unknown model id.
    CHECK(run("frontier --data " + csv.string() + " --target y --model gbm --out " +
                  (tmp.path / "o4").string(),
              tmp.path / "cfg2.txt") == 2);

    // Bad lambda grid.
    CHECK(run("frontier --data " + csv.string() +
                  " --target y --model linear --lambda-min 10 --lambda-max 1 --out " +
                  (tmp.path / "o5").string(),
              tmp.path / "cfg3.txt") == 2);
}

TEST_CASE("config file values are used and flags override them", "[cli]") {
    TempDir tmp;
    fs::path csv = tmp.path / "synth.csv";
    REQUIRE(run("gen --kind two-group-logistic --n 50 --p 2 --seed 4 --out " +
                    csv.string(),
                tmp.path / "gen.txt") == 0);

    fs::path cfg = tmp.path / "run.cfg";
    {
        std::ofstream out(cfg);
        out << "# frontier settings\n";
        out << "data=" << csv.string() << "\n";
        out << "target=y\n";
        out << "model=logistic\n";
        out << "lambda-count=3\n";
        out << "lambda-min=0.1\n";
        out << "lambda-max=1\n";
    }

    fs::path out1 = tmp.path / "from_config";
    REQUIRE(run("frontier --config " + cfg.string() + " --out " + out1.string(),
                tmp.path / "r1.txt") == 0);
    std::string table = slurp(out1 / "frontier_logistic.csv");
    std::istringstream lines(table);
    std::string line;
    int rows = -1;
    while (std::getline(lines, line)) ++rows;
    CHECK(rows == 3);

    // Flag overrides the file's lambda-count.
    fs::path out2 = tmp.path / "override";
    REQUIRE(run("frontier --config " + cfg.string() + " --lambda-count 4 --out " +
                    out2.string(),
                tmp.path / "r2.txt") == 0);
    std::string table2 = slurp(out2 / "frontier_logistic.csv");
    std::istringstream lines2(table2);
    int rows2 = -1;
    while (std::getline(lines2, line)) ++rows2;
    CHECK(rows2 == 4);
}

TEST_CASE("verify subcommand runs subsets and rejects unknown names", "[cli]") {
    TempDir tmp;
    fs::path out = tmp.path / "v";
    int code = run("verify --checks prop1_argmin_equivalence,gd_rate --out " +
                       out.string(),
                   tmp.path / "v.txt");
    CHECK(code == 0);
    std::string log = slurp(tmp.path / "v.txt");
    CHECK(log.find("PASS prop1_argmin_equivalence") != std::string::npos);
    CHECK(log.find("PASS gd_rate") != std::string::npos);
    CHECK(fs::exists(out / "checks.jsonl"));

    CHECK(run("verify --checks not_a_check --out " + out.string(),
              tmp.path / "bad.txt") == 2);
}
