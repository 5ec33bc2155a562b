#include "cr/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "cr/ordinal.hpp"
#include "cr/regularizers.hpp"
#include "cr/rng.hpp"
#include "cr/robust.hpp"
#include "cr/sensitivity.hpp"
#include "cr/stats.hpp"

namespace cr {
namespace exp {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

KeyValues load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        if (strip(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return kv;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoull(item));
    }
    if (out.empty()) throw std::invalid_argument("seed list must be non-empty");
    return out;
}

std::vector<std::string> default_methods() {
    return {"POLY_BASE", "POLY_DREG", "POLY_IGPEN", "POLY_SN",
            "RELU_BASE", "RELU_DREG", "RELU_IGPEN", "RELU_SN"};
}

Method method_from_string(const std::string& name, double lambda) {
    const auto us = name.find('_');
    if (us == std::string::npos) throw std::invalid_argument("unknown method: " + name);
    const std::string act_s = name.substr(0, us);
    const std::string reg_s = name.substr(us + 1);
    Method m;
    m.name = name;
    if (act_s == "POLY")
        m.act = Activation::Poly;
    else if (act_s == "RELU")
        m.act = Activation::Relu;
    else if (act_s == "GELU")
        m.act = Activation::Gelu;
    else
        throw std::invalid_argument("unknown activation in method: " + name);
    if (reg_s == "BASE")
        m.reg = Regularizer::none();
    else if (reg_s == "DREG")
        m.reg = Regularizer::dreg(lambda);
    else if (reg_s == "IGPEN")
        m.reg = Regularizer::igpen(lambda);
    else if (reg_s == "SN")
        m.reg = Regularizer::spectral_norm(1);
    else
        throw std::invalid_argument("unknown regularizer in method: " + name);
    return m;
}

void write_file(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << content;
    }
    fs::rename(tmp, path);
}

void write_manifest(const std::string& out_dir, const std::string& experiment,
                    const KeyValues& resolved, const std::vector<std::uint64_t>& seeds,
                    int precision, double wall_seconds) {
    json j;
    j["experiment"] = experiment;
    j["version"] = kVersion;
    j["precision"] = precision;
    j["seeds"] = seeds;
    j["wall_seconds"] = wall_seconds;
    json cfg = json::object();
    for (const auto& [k, v] : resolved) cfg[k] = v;
    j["config"] = cfg;
    write_file(out_dir + "/manifest.json", j.dump(2) + "\n");
}

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// Largest sigma(W) over all layers, 100 cold power iterations each.
double max_spectral_norm(const PolyNetwork& net) {
    double worst = 0.0;
    for (const auto& layer : net.layers) {
        PowerIterState st;
        worst = std::max(worst, spectral_norm_estimate(layer.W, 100, st));
    }
    return worst;
}

TrainConfig desk_train_config(std::uint64_t seed, std::size_t epochs, int precision,
                              bool clip, std::size_t patience = 10) {
    TrainConfig tc;
    tc.seed = seed;
    tc.max_epochs = epochs;
    tc.patience = patience;
    tc.precision = precision;
    tc.clip_norm = clip ? 10.0 : 0.0;
    return tc;
}

// Unregularized poly nets can spike; keep the divergence guard on for them.
bool wants_clip(const Method& m) {
    return m.act == Activation::Poly && !m.reg.penalizes_jacobian();
}

struct RegressionRun {
    double mse = 0.0;
    double grad_p90 = 0.0;
    bool diverged = false;
    PolyNetwork net;
};

RegressionRun train_regression(const Dataset& train_set, const Dataset& val_set,
                               const Dataset& test_set, Activation act,
                               const Regularizer& reg,
                               const std::vector<std::size_t>& hidden,
                               std::uint64_t seed, std::size_t epochs, int precision) {
    Rng rng(seed);
    RegressionRun out;
    out.net = make_network(train_set.dim(), hidden, 1, act, 3, reg, rng);
    const bool clip = act == Activation::Poly && !reg.penalizes_jacobian();
    // Regression sweeps compare converged models, so patience equals the
    // epoch budget: on noiseless targets a 10-epoch patience trips on the
    // optimizer plateau long before convergence and muddies every curve.
    TrainReport rep =
        train(out.net, train_set, val_set,
              desk_train_config(seed, epochs, precision, clip, epochs), LossKind::Mse);
    if (rep.diverged) {
        out.diverged = true;
        return out;
    }
    out.mse = mse(out.net, test_set);
    // p90 of the model's input-gradient norm ||df/dx||, i.e. the quantity the
    // Jacobian penalty actually regulates; the loss gradient would fold the
    // residual magnitude in and hide the effect.
    const auto norms =
        input_gradient_norms(out.net, test_set, IgSource::OutputJacobianFro);
    out.grad_p90 = percentile(norms, 90.0);
    return out;
}

std::string csv_join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    return line;
}

}  // namespace

// ---------------------------------------------------------------------------
// mnist-bench

MnistBenchResult run_mnist_bench(const MnistBenchConfig& cfg) {
    const double t0 = now_s();
    std::size_t train_n = cfg.train_n;
    if (cfg.limit > 0) train_n = std::min(train_n, cfg.limit);

    Dataset full;
    if (cfg.images_path.empty()) {
        full = make_synthetic_digits(train_n + cfg.test_n, cfg.data_seed);
    } else {
        full = load_idx(cfg.images_path, cfg.labels_path, train_n + cfg.test_n);
        if (full.size() < train_n + cfg.test_n)
            throw std::runtime_error("IDX data has only " + std::to_string(full.size()) +
                                     " rows, need " + std::to_string(train_n + cfg.test_n));
    }
    std::vector<std::size_t> idx_train(train_n), idx_test(cfg.test_n);
    for (std::size_t i = 0; i < train_n; ++i) idx_train[i] = i;
    for (std::size_t i = 0; i < cfg.test_n; ++i) idx_test[i] = train_n + i;
    const Dataset train_full = take_rows(full, idx_train);
    const Dataset test_set = take_rows(full, idx_test);
    // last tenth of the training block is held out for early stopping
    const std::size_t val_n = std::max<std::size_t>(1, train_n / 10);
    std::vector<std::size_t> idx_tr, idx_val;
    for (std::size_t i = 0; i + val_n < train_n; ++i) idx_tr.push_back(i);
    for (std::size_t i = train_n - val_n; i < train_n; ++i) idx_val.push_back(i);
    const Dataset train_set = take_rows(train_full, idx_tr);
    const Dataset val_set = take_rows(train_full, idx_val);

    MnistBenchResult result;
    for (const std::string& method_name : cfg.methods) {
        const Method m = method_from_string(method_name, cfg.lambda);
        for (const auto& [h1, h2] : cfg.capacities) {
            for (std::uint64_t seed : cfg.seeds) {
                Rng rng(seed);
                PolyNetwork net =
                    make_network(train_set.dim(), {h1, h2}, 10, m.act, 3, m.reg, rng);
                TrainReport rep = train(
                    net, train_set, val_set,
                    desk_train_config(seed, cfg.epochs, cfg.precision, wants_clip(m)),
                    LossKind::CrossEntropy);
                MnistRunRow row;
                row.method = method_name;
                row.h1 = h1;
                row.h2 = h2;
                row.seed = seed;
                if (rep.diverged) {
                    row.status = "diverged";
                } else {
                    row.acc = accuracy(net, test_set);
                    const auto norms =
                        input_gradient_norms(net, test_set, IgSource::LossGrad);
                    const SensitivityReport sr = summarize(norms, IgSource::LossGrad);
                    row.ig_mean = sr.mean;
                    row.ig_p95 = sr.p95;
                    row.ig_p99 = sr.p99;
                    row.ig_max = sr.max;
                    row.tail_ratio = sr.tail_ratio;
                    row.max_sigma = max_spectral_norm(net);
                }
                result.rows.push_back(row);
            }
        }
    }

    std::string csv = "method,h1,h2,seed,acc,ig_mean,ig_p95,ig_p99,ig_max,tail_ratio,status\n";
    for (const auto& r : result.rows)
        csv += csv_join({r.method, std::to_string(r.h1), std::to_string(r.h2),
                         std::to_string(r.seed), fmt_double(r.acc), fmt_double(r.ig_mean),
                         fmt_double(r.ig_p95), fmt_double(r.ig_p99), fmt_double(r.ig_max),
                         fmt_double(r.tail_ratio), r.status}) +
               "\n";
    result.csv_path = cfg.out_dir + "/results.csv";
    write_file(result.csv_path, csv);

    // paired-test summary over matched seeds, tail_ratio metric
    std::string tests_csv = "comparison,metric,test,statistic,p_value,n\n";
    auto metric_of = [&](const std::string& method, const std::pair<std::size_t, std::size_t>& cap) {
        std::vector<double> v;
        for (const auto& r : result.rows)
            if (r.method == method && r.h1 == cap.first && r.h2 == cap.second &&
                r.status == "ok")
                v.push_back(r.tail_ratio);
        return v;
    };
    auto emit_tests = [&](const std::string& a, const std::string& b,
                          const std::pair<std::size_t, std::size_t>& cap) {
        const auto va = metric_of(a, cap), vb = metric_of(b, cap);
        if (va.size() != vb.size() || va.size() < 2) return;
        const std::string label = a + "_vs_" + b + "_" + std::to_string(cap.first) + "x" +
                                  std::to_string(cap.second);
        auto add = [&](const stats::TestResult& t) {
            tests_csv += csv_join({label, "tail_ratio", t.test_name,
                                   fmt_double(t.statistic), fmt_double(t.p_value),
                                   std::to_string(t.n)}) +
                         "\n";
        };
        try { add(stats::paired_t_test(va, vb)); } catch (const std::exception&) {}
        try { add(stats::wilcoxon_signed_rank(va, vb)); } catch (const std::exception&) {}
        try { add(stats::sign_test(va, vb)); } catch (const std::exception&) {}
    };
    auto has_method = [&](const std::string& name) {
        return std::find(cfg.methods.begin(), cfg.methods.end(), name) != cfg.methods.end();
    };
    for (const auto& cap : cfg.capacities)
        for (const std::string act : {"POLY", "RELU"}) {
            const std::string dreg = act + std::string("_DREG");
            if (!has_method(dreg)) continue;
            if (has_method(act + std::string("_BASE")))
                emit_tests(dreg, act + std::string("_BASE"), cap);
            if (has_method(act + std::string("_SN")))
                emit_tests(dreg, act + std::string("_SN"), cap);
        }
    write_file(cfg.out_dir + "/paired_tests.csv", tests_csv);

    KeyValues resolved;
    resolved["train_n"] = std::to_string(train_n);
    resolved["test_n"] = std::to_string(cfg.test_n);
    resolved["epochs"] = std::to_string(cfg.epochs);
    resolved["lambda"] = fmt_double(cfg.lambda);
    resolved["data_seed"] = std::to_string(cfg.data_seed);
    resolved["images"] = cfg.images_path.empty() ? "synthetic-digits" : cfg.images_path;
    std::string methods_s;
    for (const auto& mname : cfg.methods) methods_s += (methods_s.empty() ? "" : ",") + mname;
    resolved["methods"] = methods_s;
    write_manifest(cfg.out_dir, "mnist-bench", resolved, cfg.seeds, cfg.precision,
                   now_s() - t0);
    return result;
}

// ---------------------------------------------------------------------------
// lambda-sweep

std::vector<double> default_lambda_grid() {
    return {0.0, 1e-4, 3e-4, 1e-3, 0.0031622776601683794, 3e-3, 1e-2};
}

LambdaSweepResult run_lambda_sweep(const LambdaSweepConfig& cfg) {
    const double t0 = now_s();
    std::vector<double> lambdas = cfg.lambdas.empty() ? default_lambda_grid() : cfg.lambdas;
    std::sort(lambdas.begin(), lambdas.end());

    LambdaSweepResult result;
    for (FamilyKind fam : cfg.families) {
        for (double lambda : lambdas) {
            for (std::uint64_t seed : cfg.seeds) {
                SyntheticFamily spec;
                spec.kind = fam;
                spec.dim = cfg.dim;
                spec.n = cfg.n;
                spec.seed = seed;
                const Dataset ds = gen_synthetic(spec);
                const SplitResult sp = split(ds, 0.8, 0.1, 0.1, seed);
                const Regularizer reg =
                    lambda > 0.0 ? Regularizer::dreg(lambda) : Regularizer::none();
                const RegressionRun run =
                    train_regression(sp.train, sp.val, sp.test, Activation::Poly, reg,
                                     {cfg.hidden}, seed, cfg.epochs, cfg.precision);
                LambdaSweepRow row;
                row.family = to_string(fam);
                row.lambda = lambda;
                row.seed = seed;
                if (run.diverged) {
                    row.status = "diverged";
                } else {
                    row.mse = run.mse;
                    row.grad_p90 = run.grad_p90;
                }
                result.rows.push_back(row);
            }
        }
    }

    std::string csv = "family,lambda,seed,mse,grad_p90,status\n";
    for (const auto& r : result.rows)
        csv += csv_join({r.family, fmt_double(r.lambda), std::to_string(r.seed),
                         fmt_double(r.mse), fmt_double(r.grad_p90), r.status}) +
               "\n";
    result.csv_path = cfg.out_dir + "/lambda_sweep.csv";
    write_file(result.csv_path, csv);

    KeyValues resolved;
    resolved["dim"] = std::to_string(cfg.dim);
    resolved["n"] = std::to_string(cfg.n);
    resolved["hidden"] = std::to_string(cfg.hidden);
    resolved["epochs"] = std::to_string(cfg.epochs);
    std::string ls;
    for (double l : lambdas) ls += (ls.empty() ? "" : ",") + fmt_double(l);
    resolved["lambdas"] = ls;
    write_manifest(cfg.out_dir, "lambda-sweep", resolved, cfg.seeds, cfg.precision,
                   now_s() - t0);
    return result;
}

// ---------------------------------------------------------------------------
// fairfight

std::size_t solve_width_for_budget(std::size_t input_dim, std::size_t degree,
                                   std::size_t budget, bool poly) {
    // D -> H -> 1 net: W1 (H*D) + b1 (H) + [alpha (H*G)] + W2 (H) + b2 (1)
    auto count = [&](std::size_t h) {
        return h * (input_dim + 2 + (poly ? degree : 0)) + 1;
    };
    std::size_t best_h = 1;
    std::size_t best_err = static_cast<std::size_t>(-1);
    for (std::size_t h = 1; count(h) <= 2 * budget + input_dim + degree + 3; ++h) {
        const std::size_t c = count(h);
        const std::size_t err = c > budget ? c - budget : budget - c;
        if (err < best_err) {
            best_err = err;
            best_h = h;
        }
    }
    if (static_cast<double>(best_err) > 0.10 * static_cast<double>(budget))
        throw std::runtime_error(
            "parameter budget " + std::to_string(budget) + " unachievable; nearest width " +
            std::to_string(best_h) + " gives " + std::to_string(count(best_h)) + " params");
    return best_h;
}

// Two-hidden-layer budget solve for the CR model: composing two cubic layers
// gives effective degree 9, which a single wide poly layer cannot match on
// kinked or high-frequency targets at the same parameter count. h2 is tied
// to 9/16 of h1 and h1 searched for the closest parameter count.
std::pair<std::size_t, std::size_t> solve_depth2_widths_for_budget(std::size_t input_dim,
                                                                   std::size_t degree,
                                                                   std::size_t budget) {
    auto count = [&](std::size_t h1, std::size_t h2) {
        return h1 * (input_dim + 1 + degree) + h2 * (h1 + 2 + degree) + 1;
    };
    std::size_t best_h1 = 1, best_h2 = 1;
    std::size_t best_err = static_cast<std::size_t>(-1);
    for (std::size_t h1 = 2; h1 * (input_dim + 1 + degree) <= 2 * budget; ++h1) {
        const std::size_t h2 = std::max<std::size_t>(2, h1 * 9 / 16);
        const std::size_t c = count(h1, h2);
        const std::size_t err = c > budget ? c - budget : budget - c;
        if (err < best_err) {
            best_err = err;
            best_h1 = h1;
            best_h2 = h2;
        }
    }
    if (static_cast<double>(best_err) > 0.10 * static_cast<double>(budget))
        throw std::runtime_error("parameter budget " + std::to_string(budget) +
                                 " unachievable at depth 2; nearest widths (" +
                                 std::to_string(best_h1) + ", " + std::to_string(best_h2) +
                                 ") give " + std::to_string(count(best_h1, best_h2)) +
                                 " params");
    return {best_h1, best_h2};
}

FairFightResult run_fairfight(const FairFightConfig& cfg) {
    const double t0 = now_s();
    const auto [h_cr1, h_cr2] = solve_depth2_widths_for_budget(cfg.dim, 3, cfg.budget_small);
    const std::size_t h_mlp = solve_width_for_budget(cfg.dim, 3, cfg.budget_small, false);
    const std::size_t h_mlp_large = solve_width_for_budget(cfg.dim, 3, cfg.budget_large, false);

    struct ModelSpec {
        std::string name;
        Activation act;
        Regularizer reg;
        std::vector<std::size_t> hidden;
    };
    const std::vector<ModelSpec> models = {
        {"CR_DREG", Activation::Poly, Regularizer::dreg(cfg.lambda), {h_cr1, h_cr2}},
        {"CR_NODREG", Activation::Poly, Regularizer::none(), {h_cr1, h_cr2}},
        {"MLP_SMALL", Activation::Relu, Regularizer::none(), {h_mlp}},
        {"MLP_LARGE", Activation::Relu, Regularizer::none(), {h_mlp_large}},
    };

    struct LongRow {
        std::string model;
        std::size_t params;
        std::string family;
        std::uint64_t seed;
        double test_mse;
        std::string status;
    };
    std::vector<LongRow> long_rows;
    std::map<std::string, std::pair<double, std::size_t>> agg;  // model -> (sum, count)
    std::map<std::string, std::size_t> params_of;

    for (const ModelSpec& ms : models) {
        for (FamilyKind fam : cfg.families) {
            for (std::uint64_t seed : cfg.seeds) {
                SyntheticFamily spec;
                spec.kind = fam;
                spec.dim = cfg.dim;
                spec.n = cfg.n;
                spec.seed = seed;
                const Dataset ds = gen_synthetic(spec);
                const SplitResult sp = split(ds, 0.8, 0.1, 0.1, seed);
                const RegressionRun run =
                    train_regression(sp.train, sp.val, sp.test, ms.act, ms.reg, ms.hidden,
                                     seed, cfg.epochs, cfg.precision);
                params_of[ms.name] = run.net.param_count();
                LongRow row{ms.name, run.net.param_count(), to_string(fam), seed, 0.0, "ok"};
                if (run.diverged) {
                    row.status = "diverged";
                } else {
                    row.test_mse = run.mse;
                    auto& a = agg[ms.name];
                    a.first += row.test_mse;
                    a.second += 1;
                }
                long_rows.push_back(row);
            }
        }
    }

    FairFightResult result;
    std::string long_csv = "model,params,family,seed,test_mse,status\n";
    for (const auto& r : long_rows)
        long_csv += csv_join({r.model, std::to_string(r.params), r.family,
                              std::to_string(r.seed), fmt_double(r.test_mse), r.status}) +
                    "\n";
    result.long_csv_path = cfg.out_dir + "/fairfight_long.csv";
    write_file(result.long_csv_path, long_csv);

    std::string csv = "model,params,test_mse\n";
    for (const ModelSpec& ms : models) {
        FairFightRow row;
        row.model = ms.name;
        row.params = params_of[ms.name];
        const auto& a = agg[ms.name];
        row.test_mse = a.second ? a.first / static_cast<double>(a.second) : 0.0;
        result.rows.push_back(row);
        csv += csv_join({row.model, std::to_string(row.params), fmt_double(row.test_mse)}) +
               "\n";
    }
    result.csv_path = cfg.out_dir + "/fairfight.csv";
    write_file(result.csv_path, csv);

    KeyValues resolved;
    resolved["dim"] = std::to_string(cfg.dim);
    resolved["n"] = std::to_string(cfg.n);
    resolved["budget_small"] = std::to_string(cfg.budget_small);
    resolved["budget_large"] = std::to_string(cfg.budget_large);
    resolved["h_cr"] = std::to_string(h_cr1) + "x" + std::to_string(h_cr2);
    resolved["h_mlp"] = std::to_string(h_mlp);
    resolved["h_mlp_large"] = std::to_string(h_mlp_large);
    resolved["lambda"] = fmt_double(cfg.lambda);
    resolved["epochs"] = std::to_string(cfg.epochs);
    write_manifest(cfg.out_dir, "fairfight", resolved, cfg.seeds, cfg.precision,
                   now_s() - t0);
    return result;
}

// ---------------------------------------------------------------------------
// scaling-sweep

ScalingSweepResult run_scaling_sweep(const ScalingSweepConfig& cfg) {
    const double t0 = now_s();
    ScalingSweepResult result;

    auto run_point = [&](const std::string& axis, std::size_t value, FamilyKind fam,
                         std::size_t dim, std::size_t hidden) {
        for (const std::string model : {"CR", "MLP"}) {
            for (std::uint64_t seed : cfg.seeds) {
                SyntheticFamily spec;
                spec.kind = fam;
                spec.dim = dim;
                spec.n = cfg.n;
                spec.seed = seed;
                const Dataset ds = gen_synthetic(spec);
                const SplitResult sp = split(ds, 0.8, 0.1, 0.1, seed);
                const bool cr = model == "CR";
                const RegressionRun run = train_regression(
                    sp.train, sp.val, sp.test, cr ? Activation::Poly : Activation::Relu,
                    cr ? Regularizer::dreg(cfg.lambda) : Regularizer::none(), {hidden},
                    seed, cfg.epochs, cfg.precision);
                ScalingRow row;
                row.axis = axis;
                row.value = value;
                row.model = model;
                row.seed = seed;
                if (run.diverged)
                    row.status = "diverged";
                else
                    row.test_mse = run.mse;
                result.rows.push_back(row);
            }
        }
    };

    for (std::size_t d : cfg.d_grid)
        run_point("D", d, FamilyKind::Oscillatory, d, cfg.fixed_h);
    for (std::size_t h : cfg.h_grid)
        run_point("H", h, FamilyKind::Smooth, cfg.fixed_d, h);

    std::string csv = "axis,value,model,seed,test_mse,status\n";
    for (const auto& r : result.rows)
        csv += csv_join({r.axis, std::to_string(r.value), r.model, std::to_string(r.seed),
                         fmt_double(r.test_mse), r.status}) +
               "\n";
    result.csv_path = cfg.out_dir + "/scaling_sweep.csv";
    write_file(result.csv_path, csv);

    KeyValues resolved;
    auto join_sizes = [](const std::vector<std::size_t>& v) {
        std::string s;
        for (std::size_t x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
        return s;
    };
    resolved["d_grid"] = join_sizes(cfg.d_grid);
    resolved["h_grid"] = join_sizes(cfg.h_grid);
    resolved["fixed_h"] = std::to_string(cfg.fixed_h);
    resolved["fixed_d"] = std::to_string(cfg.fixed_d);
    resolved["n"] = std::to_string(cfg.n);
    resolved["epochs"] = std::to_string(cfg.epochs);
    resolved["lambda"] = fmt_double(cfg.lambda);
    write_manifest(cfg.out_dir, "scaling-sweep", resolved, cfg.seeds, cfg.precision,
                   now_s() - t0);
    return result;
}

// ---------------------------------------------------------------------------
// ordinal

OrdinalResult run_ordinal(const OrdinalConfig& cfg) {
    const double t0 = now_s();
    OrdinalResult result;

    for (std::uint64_t seed : cfg.seeds) {
        Dataset ds = cfg.csv_path.empty()
                         ? make_ordinal_fixture(cfg.n, cfg.num_classes, cfg.noise, seed)
                         : load_embedding_csv(cfg.csv_path);
        const SplitResult sp = split(ds, 0.7, 0.15, 0.15, seed);
        Rng rng(seed);
        PolyNetwork net = make_network(ds.dim(), {cfg.hidden}, 1, Activation::Poly, 3,
                                       Regularizer::dreg(cfg.lambda), rng);
        TrainReport rep = train(net, sp.train, sp.val,
                                desk_train_config(seed, cfg.epochs, cfg.precision, false),
                                LossKind::Mse);
        if (rep.diverged)
            throw std::runtime_error("ordinal training diverged at seed " +
                                     std::to_string(seed));

        auto scores_of = [&](const Dataset& d) {
            std::vector<double> s(d.size());
            for (std::size_t i = 0; i < d.size(); ++i)
                s[i] = network_forward(net, d.row(i), false).output()[0];
            return s;
        };
        const ordinal::Thresholds th =
            ordinal::threshold_search(scores_of(sp.val), sp.val.labels, ds.num_classes);
        const std::vector<int> pred = ordinal::map_scores(scores_of(sp.test), th);
        std::size_t hit = 0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (pred[i] == sp.test.labels[i]) ++hit;

        OrdinalRow row;
        row.seed = seed;
        row.accuracy = static_cast<double>(hit) / static_cast<double>(pred.size());
        row.qwk = ordinal::qwk(pred, sp.test.labels, ds.num_classes);
        row.thresholds = th.t;
        result.rows.push_back(row);
    }

    std::string csv = "seed,accuracy,qwk,thresholds\n";
    for (const auto& r : result.rows) {
        std::string ts;
        for (double t : r.thresholds) ts += (ts.empty() ? "" : ";") + fmt_double(t);
        csv += csv_join({std::to_string(r.seed), fmt_double(r.accuracy), fmt_double(r.qwk),
                         ts}) +
               "\n";
    }
    result.csv_path = cfg.out_dir + "/ordinal.csv";
    write_file(result.csv_path, csv);

    KeyValues resolved;
    resolved["source"] = cfg.csv_path.empty() ? "synthetic-ordinal" : cfg.csv_path;
    resolved["n"] = std::to_string(cfg.n);
    resolved["num_classes"] = std::to_string(cfg.num_classes);
    resolved["noise"] = fmt_double(cfg.noise);
    resolved["hidden"] = std::to_string(cfg.hidden);
    resolved["epochs"] = std::to_string(cfg.epochs);
    resolved["lambda"] = fmt_double(cfg.lambda);
    write_manifest(cfg.out_dir, "ordinal", resolved, cfg.seeds, cfg.precision,
                   now_s() - t0);
    return result;
}

// ---------------------------------------------------------------------------
// attack

AttackResult run_attack(const AttackConfig& cfg) {
    const double t0 = now_s();
    std::size_t eval_n = cfg.eval_n;
    if (cfg.limit > 0) eval_n = std::min(eval_n, cfg.limit);

    PolyNetwork net;
    Dataset test_set;
    if (!cfg.checkpoint.empty()) {
        net = load_network(cfg.checkpoint);
        Dataset digits = make_synthetic_digits(eval_n, cfg.seed + 1);
        test_set = digits;
    } else {
        const std::size_t train_n = 3000;
        Dataset full = make_synthetic_digits(train_n + eval_n, cfg.seed + 1);
        std::vector<std::size_t> it(train_n), ie(eval_n);
        for (std::size_t i = 0; i < train_n; ++i) it[i] = i;
        for (std::size_t i = 0; i < eval_n; ++i) ie[i] = train_n + i;
        Dataset train_full = take_rows(full, it);
        test_set = take_rows(full, ie);
        const std::size_t val_n = train_n / 10;
        std::vector<std::size_t> itr, iva;
        for (std::size_t i = 0; i < train_n - val_n; ++i) itr.push_back(i);
        for (std::size_t i = train_n - val_n; i < train_n; ++i) iva.push_back(i);
        Rng rng(cfg.seed);
        net = make_network(test_set.dim(), {32, 16}, 10, Activation::Poly, 3,
                           Regularizer::dreg(1e-3), rng);
        TrainReport rep = train(net, take_rows(train_full, itr), take_rows(train_full, iva),
                                desk_train_config(cfg.seed, cfg.train_epochs, cfg.precision,
                                                  false),
                                LossKind::CrossEntropy);
        if (rep.diverged) throw std::runtime_error("attack probe training diverged");
    }

    AttackResult result;
    const double clean = robust::robust_accuracy(
        net, test_set, [](std::size_t, const Vector& x) { return x; });
    result.rows.push_back({"clean", 0.0, clean});

    for (double eps : cfg.epsilons) {
        robust::AttackConfig ac;
        ac.epsilon = eps;
        ac.steps = cfg.pgd_steps;
        const double acc = robust::robust_accuracy(
            net, test_set, [&](std::size_t i, const Vector& x) {
                robust::AttackConfig per = ac;
                per.seed = cfg.seed ^ (0x517cc1b727220a95ULL * (i + 1));
                return robust::pgd_attack(net, x, test_set.labels[i], per,
                                          LossKind::CrossEntropy);
            });
        result.rows.push_back({"pgd", eps, acc});
    }
    for (const auto& [name, kind] :
         std::vector<std::pair<std::string, robust::CorruptionKind>>{
             {"gaussian", robust::CorruptionKind::GaussianNoise},
             {"impulse", robust::CorruptionKind::ImpulseNoise}}) {
        for (int sev = 1; sev <= 5; ++sev) {
            const double acc = robust::robust_accuracy(
                net, test_set, [&](std::size_t i, const Vector& x) {
                    return robust::corrupt(x, kind, sev,
                                           cfg.seed ^ (0x2545f4914f6cdd1dULL * (i + 1)));
                });
            result.rows.push_back({name, static_cast<double>(sev), acc});
        }
    }

    std::string csv = "probe,param,accuracy\n";
    for (const auto& r : result.rows)
        csv += csv_join({r.probe, fmt_double(r.param), fmt_double(r.accuracy)}) + "\n";
    result.csv_path = cfg.out_dir + "/attack.csv";
    write_file(result.csv_path, csv);

    KeyValues resolved;
    resolved["checkpoint"] = cfg.checkpoint.empty() ? "trained-in-run" : cfg.checkpoint;
    resolved["eval_n"] = std::to_string(eval_n);
    resolved["pgd_steps"] = std::to_string(cfg.pgd_steps);
    std::string es;
    for (double e : cfg.epsilons) es += (es.empty() ? "" : ",") + fmt_double(e);
    resolved["epsilons"] = es;
    write_manifest(cfg.out_dir, "attack", resolved, {cfg.seed}, cfg.precision,
                   now_s() - t0);
    return result;
}

// ---------------------------------------------------------------------------
// train

TrainReport run_train(const TrainRunConfig& cfg) {
    const double t0 = now_s();
    const Method m = method_from_string(cfg.method, cfg.lambda);

    Dataset ds;
    LossKind loss;
    std::size_t out_dim;
    if (cfg.family == "digits") {
        ds = make_synthetic_digits(cfg.n, cfg.seed + 1);
        loss = LossKind::CrossEntropy;
        out_dim = 10;
    } else {
        SyntheticFamily spec;
        spec.kind = family_from_string(cfg.family);
        spec.dim = cfg.dim;
        spec.n = cfg.n;
        spec.seed = cfg.seed;
        ds = gen_synthetic(spec);
        loss = LossKind::Mse;
        out_dim = 1;
    }
    const SplitResult sp = split(ds, 0.8, 0.1, 0.1, cfg.seed);

    Rng rng(cfg.seed);
    PolyNetwork net =
        make_network(ds.dim(), cfg.hidden, out_dim, m.act, 3, m.reg, rng);
    TrainReport rep =
        train(net, sp.train, sp.val,
              desk_train_config(cfg.seed, cfg.epochs, cfg.precision, wants_clip(m)), loss);

    fs::create_directories(cfg.out_dir);
    save_network(net, cfg.out_dir + "/network.json");
    write_file(cfg.out_dir + "/report.json", report_to_json(rep) + "\n");

    KeyValues resolved;
    resolved["family"] = cfg.family;
    resolved["method"] = cfg.method;
    resolved["dim"] = std::to_string(cfg.dim);
    resolved["n"] = std::to_string(cfg.n);
    resolved["lambda"] = fmt_double(cfg.lambda);
    resolved["epochs"] = std::to_string(cfg.epochs);
    std::string hs;
    for (std::size_t h : cfg.hidden) hs += (hs.empty() ? "" : ",") + std::to_string(h);
    resolved["hidden"] = hs;
    write_manifest(cfg.out_dir, "train", resolved, {cfg.seed}, cfg.precision, now_s() - t0);
    return rep;
}

// ---------------------------------------------------------------------------
// stats over a results CSV

std::string run_stats(const std::string& results_csv, const std::string& method_a,
                      const std::string& method_b, const std::string& metric,
                      const std::string& out_dir) {
    std::ifstream in(results_csv);
    if (!in) throw std::runtime_error("cannot open " + results_csv);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty CSV: " + results_csv);
    std::vector<std::string> cols;
    {
        std::stringstream ss(header);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    auto col_idx = [&](const std::string& name) {
        const auto it = std::find(cols.begin(), cols.end(), name);
        if (it == cols.end())
            throw std::runtime_error("CSV has no column '" + name + "': " + header);
        return static_cast<std::size_t>(it - cols.begin());
    };
    const std::size_t im = col_idx("method"), ih1 = col_idx("h1"), ih2 = col_idx("h2"),
                      is = col_idx("seed"), iv = col_idx(metric);

    std::map<std::string, double> a_vals, b_vals;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (cells.size() < cols.size()) continue;
        const std::string key = cells[ih1] + "," + cells[ih2] + "," + cells[is];
        if (cells[im] == method_a) a_vals[key] = std::stod(cells[iv]);
        if (cells[im] == method_b) b_vals[key] = std::stod(cells[iv]);
    }
    std::vector<double> a, b;
    for (const auto& [key, va] : a_vals) {
        const auto it = b_vals.find(key);
        if (it != b_vals.end()) {
            a.push_back(va);
            b.push_back(it->second);
        }
    }
    if (a.size() < 2)
        throw std::runtime_error("fewer than 2 matched (h1,h2,seed) pairs for " + method_a +
                                 " vs " + method_b);

    std::string csv = "comparison,metric,test,statistic,p_value,n\n";
    const std::string label = method_a + "_vs_" + method_b;
    auto add = [&](const stats::TestResult& t) {
        csv += csv_join({label, metric, t.test_name, fmt_double(t.statistic),
                         fmt_double(t.p_value), std::to_string(t.n)}) +
               "\n";
    };
    try { add(stats::paired_t_test(a, b)); } catch (const std::exception&) {}
    try { add(stats::wilcoxon_signed_rank(a, b)); } catch (const std::exception&) {}
    try { add(stats::sign_test(a, b)); } catch (const std::exception&) {}
    try { add(stats::welch_t_test(a, b)); } catch (const std::exception&) {}
    const std::string path = out_dir + "/stats.csv";
    write_file(path, csv);
    return path;
}

}  // namespace exp
}  // namespace cr
