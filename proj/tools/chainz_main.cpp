// chainz: experiment driver for the polynomial-layer library.
//
// Subcommands mirror the experiment protocols; every run writes result CSVs
// plus a manifest JSON into --out. Flat key = value config files are applied
// first, explicit CLI flags win.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cr/data.hpp"
#include "cr/experiments.hpp"

namespace {

using cr::exp::KeyValues;

// Config-file fallback: a flag that was not passed explicitly takes its value
// from the config file when the key is present.
template <typename T>
void overlay(const CLI::App* cmd, const std::string& flag, const KeyValues& kv,
             const std::string& key, T& value) {
    if (cmd->count(flag) > 0) return;
    const auto it = kv.find(key);
    if (it == kv.end()) return;
    if constexpr (std::is_same_v<T, std::string>) {
        value = it->second;
    } else if constexpr (std::is_same_v<T, double>) {
        value = std::stod(it->second);
    } else if constexpr (std::is_same_v<T, int>) {
        value = std::stoi(it->second);
    } else {
        value = static_cast<T>(std::stoull(it->second));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"polynomial-layer network experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seeds_csv;
    std::size_t limit = 0;
    int precision = 64;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "flat key = value config file");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seeds", seeds_csv, "comma-separated seed list");
        cmd->add_option("--limit", limit, "cap on training/eval set size");
        cmd->add_option("--precision", precision, "arithmetic precision, 32 or 64")
            ->check(CLI::IsMember({32, 64}));
    };

    // train
    auto* c_train = app.add_subcommand("train", "train one model and save it");
    std::string tr_family = "smooth", tr_method = "POLY_DREG", tr_hidden = "16";
    double tr_lambda = 0.0031622776601683794;
    std::size_t tr_dim = 10, tr_n = 4096, tr_epochs = 40;
    add_common(c_train);
    c_train->add_option("--family", tr_family, "smooth|piecewise|sparse|oscillatory|entangled|digits");
    c_train->add_option("--method", tr_method, "e.g. POLY_DREG, RELU_SN");
    c_train->add_option("--hidden", tr_hidden, "comma-separated hidden widths");
    c_train->add_option("--lambda", tr_lambda, "DREG/IGPEN strength");
    c_train->add_option("--dim", tr_dim, "input dimension (synthetic families)");
    c_train->add_option("--n", tr_n, "dataset size");
    c_train->add_option("--epochs", tr_epochs, "max epochs");

    // mnist-bench
    auto* c_mnist = app.add_subcommand("mnist-bench", "method x capacity x seed benchmark");
    std::string mb_images, mb_labels, mb_methods, mb_capacities = "32x16";
    std::size_t mb_train_n = 10000, mb_test_n = 2000, mb_epochs = 30;
    double mb_lambda = 1e-3;
    add_common(c_mnist);
    c_mnist->add_option("--images", mb_images, "IDX image file (omit for the built-in digit fixture)");
    c_mnist->add_option("--labels", mb_labels, "IDX label file");
    c_mnist->add_option("--methods", mb_methods, "comma-separated method ids");
    c_mnist->add_option("--capacities", mb_capacities, "e.g. 32x16,128x64");
    c_mnist->add_option("--train-n", mb_train_n, "training rows");
    c_mnist->add_option("--test-n", mb_test_n, "test rows");
    c_mnist->add_option("--epochs", mb_epochs, "max epochs");
    c_mnist->add_option("--lambda", mb_lambda, "DREG/IGPEN strength");

    // lambda-sweep
    auto* c_lam = app.add_subcommand("lambda-sweep", "family x lambda x seed sweep");
    std::string ls_families, ls_lambdas;
    std::size_t ls_dim = 10, ls_n = 4096, ls_hidden = 16, ls_epochs = 40;
    add_common(c_lam);
    c_lam->add_option("--families", ls_families, "comma-separated family names");
    c_lam->add_option("--lambdas", ls_lambdas, "comma-separated lambda values");
    c_lam->add_option("--dim", ls_dim, "input dimension");
    c_lam->add_option("--n", ls_n, "dataset size");
    c_lam->add_option("--hidden", ls_hidden, "hidden width");
    c_lam->add_option("--epochs", ls_epochs, "max epochs");

    // fairfight
    auto* c_ff = app.add_subcommand("fairfight", "parameter-matched CR vs MLP suite");
    std::size_t ff_dim = 10, ff_n = 4096, ff_small = 3300, ff_large = 51200, ff_epochs = 40;
    double ff_lambda = 0.0031622776601683794;
    add_common(c_ff);
    c_ff->add_option("--dim", ff_dim, "input dimension");
    c_ff->add_option("--n", ff_n, "dataset size per family");
    c_ff->add_option("--budget-small", ff_small, "small parameter budget");
    c_ff->add_option("--budget-large", ff_large, "large parameter budget");
    c_ff->add_option("--lambda", ff_lambda, "DREG strength for CR");
    c_ff->add_option("--epochs", ff_epochs, "max epochs");

    // scaling-sweep
    auto* c_sc = app.add_subcommand("scaling-sweep", "input-dimension and width sweeps");
    std::size_t sc_n = 4096, sc_fixed_h = 16, sc_fixed_d = 16, sc_epochs = 40;
    double sc_lambda = 0.0031622776601683794;
    std::string sc_dgrid, sc_hgrid;
    add_common(c_sc);
    c_sc->add_option("--d-grid", sc_dgrid, "comma-separated D values");
    c_sc->add_option("--h-grid", sc_hgrid, "comma-separated H values");
    c_sc->add_option("--fixed-h", sc_fixed_h, "width used in the D sweep");
    c_sc->add_option("--fixed-d", sc_fixed_d, "input dim used in the H sweep");
    c_sc->add_option("--n", sc_n, "dataset size");
    c_sc->add_option("--epochs", sc_epochs, "max epochs");
    c_sc->add_option("--lambda", sc_lambda, "DREG strength for CR");

    // ordinal
    auto* c_ord = app.add_subcommand("ordinal", "scalar net + threshold search + QWK");
    std::string ord_csv;
    std::size_t ord_n = 2000, ord_hidden = 16, ord_epochs = 40;
    int ord_classes = 5;
    double ord_noise = 0.3, ord_lambda = 0.0031622776601683794;
    add_common(c_ord);
    c_ord->add_option("--csv", ord_csv, "embedding CSV (omit for the synthetic fixture)");
    c_ord->add_option("--n", ord_n, "fixture size");
    c_ord->add_option("--classes", ord_classes, "number of ordinal classes");
    c_ord->add_option("--noise", ord_noise, "fixture score noise");
    c_ord->add_option("--hidden", ord_hidden, "hidden width");
    c_ord->add_option("--epochs", ord_epochs, "max epochs");
    c_ord->add_option("--lambda", ord_lambda, "DREG strength");

    // attack
    auto* c_atk = app.add_subcommand("attack", "PGD and corruption robustness probes");
    std::string atk_checkpoint;
    std::size_t atk_eval_n = 500, atk_steps = 10, atk_train_epochs = 15;
    add_common(c_atk);
    c_atk->add_option("--checkpoint", atk_checkpoint, "network JSON (omit to train in-run)");
    c_atk->add_option("--eval-n", atk_eval_n, "evaluation rows");
    c_atk->add_option("--pgd-steps", atk_steps, "PGD iterations");
    c_atk->add_option("--train-epochs", atk_train_epochs, "epochs for the in-run probe net");

    // stats
    auto* c_st = app.add_subcommand("stats", "paired tests over a results CSV");
    std::string st_csv, st_a, st_b, st_metric = "tail_ratio";
    add_common(c_st);
    c_st->add_option("--csv", st_csv, "mnist-bench results CSV")->required();
    c_st->add_option("--method-a", st_a, "first method id")->required();
    c_st->add_option("--method-b", st_b, "second method id")->required();
    c_st->add_option("--metric", st_metric, "metric column to compare");

    // gen-idx
    auto* c_gen = app.add_subcommand("gen-idx", "write the procedural digit fixture as IDX files");
    std::size_t gen_n = 12000;
    std::uint64_t gen_seed = 7;
    add_common(c_gen);
    c_gen->add_option("--n", gen_n, "number of images");
    c_gen->add_option("--seed", gen_seed, "generation seed");

    CLI11_PARSE(app, argc, argv);
    CLI::App* cmd = app.get_subcommands().front();

    try {
        KeyValues kv;
        if (!config_path.empty()) kv = cr::exp::load_config(config_path);
        overlay(cmd, "--out", kv, "out", out_dir);
        overlay(cmd, "--seeds", kv, "seeds", seeds_csv);
        overlay(cmd, "--limit", kv, "limit", limit);
        overlay(cmd, "--precision", kv, "precision", precision);
        auto seeds_or = [&](std::vector<std::uint64_t> def) {
            return seeds_csv.empty() ? def : cr::exp::parse_seed_list(seeds_csv);
        };
        auto split_csv = [](const std::string& s) {
            std::vector<std::string> out;
            std::string item;
            std::stringstream ss(s);
            while (std::getline(ss, item, ','))
                if (!item.empty()) out.push_back(item);
            return out;
        };

        if (cmd == c_train) {
            cr::exp::TrainRunConfig cfg;
            overlay(cmd, "--family", kv, "family", tr_family);
            overlay(cmd, "--method", kv, "method", tr_method);
            overlay(cmd, "--hidden", kv, "hidden", tr_hidden);
            overlay(cmd, "--lambda", kv, "lambda", tr_lambda);
            overlay(cmd, "--dim", kv, "dim", tr_dim);
            overlay(cmd, "--n", kv, "n", tr_n);
            overlay(cmd, "--epochs", kv, "epochs", tr_epochs);
            cfg.family = tr_family;
            cfg.method = tr_method;
            cfg.lambda = tr_lambda;
            cfg.dim = tr_dim;
            cfg.n = tr_n;
            cfg.epochs = tr_epochs;
            cfg.precision = precision;
            cfg.hidden.clear();
            for (const auto& h : split_csv(tr_hidden)) cfg.hidden.push_back(std::stoull(h));
            cfg.seed = seeds_or({1337}).front();
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            const cr::TrainReport rep = cr::exp::run_train(cfg);
            std::cout << "epochs " << rep.stopped_epoch << " best_val "
                      << cr::exp::fmt_double(rep.best_val_loss)
                      << (rep.diverged ? " DIVERGED" : "") << "\n";
        } else if (cmd == c_mnist) {
            cr::exp::MnistBenchConfig cfg;
            overlay(cmd, "--images", kv, "images", mb_images);
            overlay(cmd, "--labels", kv, "labels", mb_labels);
            overlay(cmd, "--methods", kv, "methods", mb_methods);
            overlay(cmd, "--capacities", kv, "capacities", mb_capacities);
            overlay(cmd, "--train-n", kv, "train_n", mb_train_n);
            overlay(cmd, "--test-n", kv, "test_n", mb_test_n);
            overlay(cmd, "--epochs", kv, "epochs", mb_epochs);
            overlay(cmd, "--lambda", kv, "lambda", mb_lambda);
            cfg.images_path = mb_images;
            cfg.labels_path = mb_labels;
            cfg.train_n = mb_train_n;
            cfg.test_n = mb_test_n;
            cfg.epochs = mb_epochs;
            cfg.lambda = mb_lambda;
            cfg.limit = limit;
            cfg.precision = precision;
            cfg.seeds = seeds_or(cfg.seeds);
            if (!mb_methods.empty()) cfg.methods = split_csv(mb_methods);
            cfg.capacities.clear();
            for (const auto& cap : split_csv(mb_capacities)) {
                const auto x = cap.find('x');
                if (x == std::string::npos)
                    throw std::runtime_error("capacity must look like 32x16: " + cap);
                cfg.capacities.emplace_back(std::stoull(cap.substr(0, x)),
                                            std::stoull(cap.substr(x + 1)));
            }
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            const auto res = cr::exp::run_mnist_bench(cfg);
            std::cout << res.rows.size() << " rows -> " << res.csv_path << "\n";
        } else if (cmd == c_lam) {
            cr::exp::LambdaSweepConfig cfg;
            overlay(cmd, "--families", kv, "families", ls_families);
            overlay(cmd, "--lambdas", kv, "lambdas", ls_lambdas);
            overlay(cmd, "--dim", kv, "dim", ls_dim);
            overlay(cmd, "--n", kv, "n", ls_n);
            overlay(cmd, "--hidden", kv, "hidden", ls_hidden);
            overlay(cmd, "--epochs", kv, "epochs", ls_epochs);
            cfg.dim = ls_dim;
            cfg.n = ls_n;
            cfg.hidden = ls_hidden;
            cfg.epochs = ls_epochs;
            cfg.precision = precision;
            cfg.seeds = seeds_or(cfg.seeds);
            if (!ls_families.empty()) {
                cfg.families.clear();
                for (const auto& f : split_csv(ls_families))
                    cfg.families.push_back(cr::family_from_string(f));
            }
            if (!ls_lambdas.empty())
                for (const auto& l : split_csv(ls_lambdas))
                    cfg.lambdas.push_back(std::stod(l));
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            const auto res = cr::exp::run_lambda_sweep(cfg);
            std::cout << res.rows.size() << " rows -> " << res.csv_path << "\n";
        } else if (cmd == c_ff) {
            cr::exp::FairFightConfig cfg;
            overlay(cmd, "--dim", kv, "dim", ff_dim);
            overlay(cmd, "--n", kv, "n", ff_n);
            overlay(cmd, "--budget-small", kv, "budget_small", ff_small);
            overlay(cmd, "--budget-large", kv, "budget_large", ff_large);
            overlay(cmd, "--lambda", kv, "lambda", ff_lambda);
            overlay(cmd, "--epochs", kv, "epochs", ff_epochs);
            cfg.dim = ff_dim;
            cfg.n = ff_n;
            cfg.budget_small = ff_small;
            cfg.budget_large = ff_large;
            cfg.lambda = ff_lambda;
            cfg.epochs = ff_epochs;
            cfg.precision = precision;
            cfg.seeds = seeds_or(cfg.seeds);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            const auto res = cr::exp::run_fairfight(cfg);
            for (const auto& r : res.rows)
                std::cout << r.model << " params=" << r.params << " mse="
                          << cr::exp::fmt_double(r.test_mse) << "\n";
        } else if (cmd == c_sc) {
            cr::exp::ScalingSweepConfig cfg;
            overlay(cmd, "--d-grid", kv, "d_grid", sc_dgrid);
            overlay(cmd, "--h-grid", kv, "h_grid", sc_hgrid);
            overlay(cmd, "--fixed-h", kv, "fixed_h", sc_fixed_h);
            overlay(cmd, "--fixed-d", kv, "fixed_d", sc_fixed_d);
            overlay(cmd, "--n", kv, "n", sc_n);
            overlay(cmd, "--epochs", kv, "epochs", sc_epochs);
            overlay(cmd, "--lambda", kv, "lambda", sc_lambda);
            cfg.fixed_h = sc_fixed_h;
            cfg.fixed_d = sc_fixed_d;
            cfg.n = sc_n;
            cfg.epochs = sc_epochs;
            cfg.lambda = sc_lambda;
            cfg.precision = precision;
            cfg.seeds = seeds_or(cfg.seeds);
            if (!sc_dgrid.empty()) {
                cfg.d_grid.clear();
                for (const auto& d : split_csv(sc_dgrid)) cfg.d_grid.push_back(std::stoull(d));
            }
            if (!sc_hgrid.empty()) {
                cfg.h_grid.clear();
                for (const auto& h : split_csv(sc_hgrid)) cfg.h_grid.push_back(std::stoull(h));
            }
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            const auto res = cr::exp::run_scaling_sweep(cfg);
            std::cout << res.rows.size() << " rows -> " << res.csv_path << "\n";
        } else if (cmd == c_ord) {
            cr::exp::OrdinalConfig cfg;
            overlay(cmd, "--csv", kv, "csv", ord_csv);
            overlay(cmd, "--n", kv, "n", ord_n);
            overlay(cmd, "--classes", kv, "classes", ord_classes);
            overlay(cmd, "--noise", kv, "noise", ord_noise);
            overlay(cmd, "--hidden", kv, "hidden", ord_hidden);
            overlay(cmd, "--epochs", kv, "epochs", ord_epochs);
            overlay(cmd, "--lambda", kv, "lambda", ord_lambda);
            cfg.csv_path = ord_csv;
            cfg.n = ord_n;
            cfg.num_classes = ord_classes;
            cfg.noise = ord_noise;
            cfg.hidden = ord_hidden;
            cfg.epochs = ord_epochs;
            cfg.lambda = ord_lambda;
            cfg.precision = precision;
            cfg.seeds = seeds_or(cfg.seeds);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            const auto res = cr::exp::run_ordinal(cfg);
            for (const auto& r : res.rows)
                std::cout << "seed " << r.seed << " acc "
                          << cr::exp::fmt_double(r.accuracy) << " qwk "
                          << cr::exp::fmt_double(r.qwk) << "\n";
        } else if (cmd == c_atk) {
            cr::exp::AttackConfig cfg;
            overlay(cmd, "--checkpoint", kv, "checkpoint", atk_checkpoint);
            overlay(cmd, "--eval-n", kv, "eval_n", atk_eval_n);
            overlay(cmd, "--pgd-steps", kv, "pgd_steps", atk_steps);
            overlay(cmd, "--train-epochs", kv, "train_epochs", atk_train_epochs);
            cfg.checkpoint = atk_checkpoint;
            cfg.eval_n = atk_eval_n;
            cfg.pgd_steps = atk_steps;
            cfg.train_epochs = atk_train_epochs;
            cfg.limit = limit;
            cfg.precision = precision;
            cfg.seed = seeds_or({1337}).front();
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            const auto res = cr::exp::run_attack(cfg);
            std::cout << res.rows.size() << " rows -> " << res.csv_path << "\n";
        } else if (cmd == c_st) {
            const std::string dir = out_dir.empty() ? "out/stats" : out_dir;
            const std::string path = cr::exp::run_stats(st_csv, st_a, st_b, st_metric, dir);
            std::cout << path << "\n";
        } else if (cmd == c_gen) {
            overlay(cmd, "--n", kv, "n", gen_n);
            overlay(cmd, "--seed", kv, "seed", gen_seed);
            const std::string dir = out_dir.empty() ? "out/idx" : out_dir;
            const cr::Dataset ds = cr::make_synthetic_digits(gen_n, gen_seed);
            std::filesystem::create_directories(dir);
            cr::save_idx(ds, dir + "/images-idx3-ubyte", dir + "/labels-idx1-ubyte");
            std::cout << ds.size() << " images -> " << dir << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
