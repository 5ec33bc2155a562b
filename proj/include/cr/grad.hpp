#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cr/data.hpp"
#include "cr/matrix.hpp"
#include "cr/polynet.hpp"

namespace cr {

enum class LossKind { Mse, CrossEntropy };

struct LayerGrads {
    Matrix dW;
    Vector db;
    Matrix dalpha;
};

// Per-layer gradients mirroring PolyLayer shapes.
using ParamGrads = std::vector<LayerGrads>;

ParamGrads zeros_like(const PolyNetwork& net);
void grads_axpy(ParamGrads& acc, const ParamGrads& g, double scale);
void grads_scale(ParamGrads& g, double scale);
double grads_global_norm(const ParamGrads& g);
// Throws a diagnostic error naming layer and parameter block on NaN/Inf.
void grads_check_finite(const ParamGrads& g);

// Mean task loss over the batch + lambda * batch-mean DREG penalty (zero for
// none / spectral_norm). mse requires a scalar-output network.
// Returns the per-sample DualState lists alongside the scalar.
std::pair<double, std::vector<std::vector<DualState>>> loss_total(
    const PolyNetwork& net, const Dataset& batch, LossKind loss_kind);

// Scalar-only variant (no state retention); used by finite differences and
// validation passes.
double loss_value(const PolyNetwork& net, const Dataset& batch, LossKind loss_kind);

// Task loss alone (penalty excluded), used for early stopping.
double task_loss(const PolyNetwork& net, const Dataset& batch, LossKind loss_kind);

// Exact reverse-mode gradient of loss_total w.r.t. every W, b, alpha,
// including the DREG path through the Jacobian stream (derived analytically
// over the cached (z, h, S) tapes; no second-order graph).
ParamGrads backward(const PolyNetwork& net, const Dataset& batch, LossKind loss_kind);

// d(task loss)/dx for one sample, via the reverse value pass extended one
// step to the input. Shared by the PGD attack and the sensitivity report.
Vector input_gradient(const PolyNetwork& net, const Vector& x, LossKind loss_kind,
                      int class_label, double regression_target);

// Central-difference oracle over every parameter of loss_total (64-bit only).
ParamGrads finite_diff_grad(const PolyNetwork& net, const Dataset& batch, LossKind loss_kind,
                            double step);

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    ParamGrads m;  // first moment, same shapes as the grads
    ParamGrads v;  // second moment
};

// Standard Adam update with bias correction, t is the 1-based step index.
void adam_step(PolyNetwork& net, const ParamGrads& grads, AdamState& state, std::size_t t,
               const AdamHyper& hyper);

struct TrainConfig {
    AdamHyper adam;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    int precision = 64;      // 32 rounds parameters through float each step
    double clip_norm = 0.0;  // global-norm gradient clip, 0 = off
};

struct TrainReport {
    std::vector<double> train_losses;  // full objective, per epoch
    std::vector<double> val_losses;    // task loss only, per epoch
    std::vector<double> epoch_seconds;
    std::size_t stopped_epoch = 0;  // 1-based count of epochs actually run
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    bool diverged = false;
    std::string divergence_message;
};

std::string report_to_json(const TrainReport& r);

// Mini-batch training with seeded Fisher-Yates shuffling, per-epoch
// validation, early stopping on task loss, best-snapshot restore. The
// regularizer comes from net.reg (spectral_norm projects after each step).
TrainReport train(PolyNetwork& net, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, LossKind loss_kind);

// Mean task metrics on a dataset.
double accuracy(const PolyNetwork& net, const Dataset& ds);
double mse(const PolyNetwork& net, const Dataset& ds);

}  // namespace cr
