#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cr/data.hpp"
#include "cr/grad.hpp"
#include "cr/polynet.hpp"

namespace cr {
namespace exp {

inline constexpr const char* kVersion = "1.0.0";

// Deterministic shortest round-trip formatting for every double that lands in
// a CSV; reruns must be byte-identical.
std::string fmt_double(double v);

// Flat key = value config files, '#' comments. CLI flags override afterwards.
using KeyValues = std::map<std::string, std::string>;
KeyValues load_config(const std::string& path);

std::vector<std::uint64_t> parse_seed_list(const std::string& csv);

// The eight Table-style method ids: {POLY,RELU} x {BASE,DREG,IGPEN,SN}.
struct Method {
    std::string name;
    Activation act = Activation::Poly;
    Regularizer reg;
};
Method method_from_string(const std::string& name, double lambda);
std::vector<std::string> default_methods();

// Writes `path` atomically (temp file + rename).
void write_file(const std::string& path, const std::string& content);

// Manifest JSON: resolved config, seeds, version, precision, wall-clock.
void write_manifest(const std::string& out_dir, const std::string& experiment,
                    const KeyValues& resolved, const std::vector<std::uint64_t>& seeds,
                    int precision, double wall_seconds);

struct MnistBenchConfig {
    std::string out_dir = "out/mnist";
    std::string images_path;  // empty -> procedural digit fixture
    std::string labels_path;
    std::size_t train_n = 10000;
    std::size_t test_n = 2000;
    std::size_t limit = 0;  // caps train_n when nonzero
    std::vector<std::string> methods = default_methods();
    std::vector<std::pair<std::size_t, std::size_t>> capacities = {{32, 16}};
    std::vector<std::uint64_t> seeds = {1337, 1339, 2024};
    std::size_t epochs = 30;
    double lambda = 1e-3;
    int precision = 64;
    std::uint64_t data_seed = 7;
};

struct MnistRunRow {
    std::string method;
    std::size_t h1 = 0, h2 = 0;
    std::uint64_t seed = 0;
    double acc = 0.0;
    double ig_mean = 0.0, ig_p95 = 0.0, ig_p99 = 0.0, ig_max = 0.0, tail_ratio = 0.0;
    std::string status = "ok";
    double max_sigma = 0.0;  // largest post-training sigma(W), SN audit
};

struct MnistBenchResult {
    std::vector<MnistRunRow> rows;
    std::string csv_path;
};
MnistBenchResult run_mnist_bench(const MnistBenchConfig& cfg);

struct LambdaSweepConfig {
    std::string out_dir = "out/lambda";
    std::vector<FamilyKind> families = kAllFamilies;
    std::vector<double> lambdas;  // empty -> paper grid + 10^-2.5
    std::vector<std::uint64_t> seeds = {1337};
    std::size_t dim = 10;
    std::size_t n = 4096;
    std::size_t hidden = 16;
    std::size_t epochs = 400;
    int precision = 64;
};
std::vector<double> default_lambda_grid();

struct LambdaSweepRow {
    std::string family;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    double mse = 0.0;
    double grad_p90 = 0.0;
    std::string status = "ok";
};

struct LambdaSweepResult {
    std::vector<LambdaSweepRow> rows;
    std::string csv_path;
};
LambdaSweepResult run_lambda_sweep(const LambdaSweepConfig& cfg);

// Nearest hidden width whose parameter count hits `budget`; throws when the
// best achievable count is off by more than 10%.
std::size_t solve_width_for_budget(std::size_t input_dim, std::size_t degree,
                                   std::size_t budget, bool poly);

struct FairFightConfig {
    std::string out_dir = "out/fairfight";
    std::vector<FamilyKind> families = kAllFamilies;
    std::vector<std::uint64_t> seeds = {1337};
    std::size_t dim = 10;
    std::size_t n = 4096;
    std::size_t budget_small = 3300;
    std::size_t budget_large = 51200;
    double lambda = 0.0031622776601683794;  // 10^-2.5
    std::size_t epochs = 300;
    int precision = 64;
};

struct FairFightRow {
    std::string model;
    std::size_t params = 0;
    double test_mse = 0.0;  // suite average over families and seeds
};

struct FairFightResult {
    std::vector<FairFightRow> rows;  // summary, one per model
    std::string csv_path;
    std::string long_csv_path;
};
FairFightResult run_fairfight(const FairFightConfig& cfg);

struct ScalingSweepConfig {
    std::string out_dir = "out/scaling";
    std::vector<std::size_t> d_grid = {16, 32, 64, 128};
    std::vector<std::size_t> h_grid = {4, 8, 16, 32, 64, 128};
    std::size_t fixed_h = 16;  // width for the D sweep
    std::size_t fixed_d = 16;  // input dim for the H sweep
    std::vector<std::uint64_t> seeds = {1337};
    std::size_t n = 4096;
    std::size_t epochs = 40;
    double lambda = 0.0031622776601683794;
    int precision = 64;
};

struct ScalingRow {
    std::string axis;  // "D" or "H"
    std::size_t value = 0;
    std::string model;  // "CR" or "MLP"
    std::uint64_t seed = 0;
    double test_mse = 0.0;
    std::string status = "ok";
};

struct ScalingSweepResult {
    std::vector<ScalingRow> rows;
    std::string csv_path;
};
ScalingSweepResult run_scaling_sweep(const ScalingSweepConfig& cfg);

struct OrdinalConfig {
    std::string out_dir = "out/ordinal";
    std::string csv_path;  // embedding CSV; empty -> synthetic fixture
    std::size_t n = 2000;
    int num_classes = 5;
    double noise = 0.3;
    std::vector<std::uint64_t> seeds = {1337};
    std::size_t hidden = 16;
    std::size_t epochs = 40;
    double lambda = 0.0031622776601683794;  // A.3 grid pick
    int precision = 64;
};

struct OrdinalRow {
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double qwk = 0.0;
    std::vector<double> thresholds;
};

struct OrdinalResult {
    std::vector<OrdinalRow> rows;
    std::string csv_path;
};
OrdinalResult run_ordinal(const OrdinalConfig& cfg);

struct AttackConfig {
    std::string out_dir = "out/attack";
    std::string checkpoint;  // network JSON; empty -> train a small digit net
    std::size_t eval_n = 500;
    std::size_t limit = 0;
    std::vector<double> epsilons = {0.0, 2.0 / 255.0, 4.0 / 255.0, 8.0 / 255.0};
    std::size_t pgd_steps = 10;
    std::uint64_t seed = 1337;
    std::size_t train_epochs = 15;
    int precision = 64;
};

struct AttackRow {
    std::string probe;   // clean | pgd | gaussian | impulse
    double param = 0.0;  // epsilon or severity
    double accuracy = 0.0;
};

struct AttackResult {
    std::vector<AttackRow> rows;
    std::string csv_path;
};
AttackResult run_attack(const AttackConfig& cfg);

struct TrainRunConfig {
    std::string out_dir = "out/train";
    std::string family = "smooth";  // or "digits"
    std::size_t dim = 10;
    std::size_t n = 4096;
    std::vector<std::size_t> hidden = {16};
    std::string method = "POLY_DREG";
    double lambda = 0.0031622776601683794;
    std::uint64_t seed = 1337;
    std::size_t epochs = 40;
    int precision = 64;
};
// Trains one model, writes network.json + report.json + manifest.
TrainReport run_train(const TrainRunConfig& cfg);

// Paired tests (t, Wilcoxon, sign) on `metric` between two methods of an
// mnist-bench results CSV, matched on (h1, h2, seed). Returns the output CSV.
std::string run_stats(const std::string& results_csv, const std::string& method_a,
                      const std::string& method_b, const std::string& metric,
                      const std::string& out_dir);

}  // namespace exp
}  // namespace cr
