#include "cr/grad.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "cr/regularizers.hpp"
#include "cr/rng.hpp"

namespace cr {

namespace {

double quantize_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

void quantize_f32(Vector& v) {
    for (double& x : v) x = quantize_f32(x);
}

void quantize_f32(Matrix& m) { quantize_f32(m.data()); }

// C += A * B^T, fixed accumulation order (row dot products).
void add_matmul_bt(Matrix& c, const Matrix& a, const Matrix& b) {
    const std::size_t d = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row_ptr(i);
        double* crow = c.row_ptr(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.row_ptr(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += arow[k] * brow[k];
            crow[j] += acc;
        }
    }
}

// Returns W^T * M.
Matrix matmul_at_b(const Matrix& w, const Matrix& m) {
    Matrix out(w.cols(), m.cols());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const double* wrow = w.row_ptr(i);
        const double* mrow = m.row_ptr(i);
        for (std::size_t j = 0; j < w.cols(); ++j) {
            const double wij = wrow[j];
            if (wij == 0.0) continue;
            double* orow = out.row_ptr(j);
            for (std::size_t d = 0; d < m.cols(); ++d) orow[d] += wij * mrow[d];
        }
    }
    return out;
}

double softmax_nll(const Vector& logits, int label, Vector* probs) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    if (probs) {
        probs->resize(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i) (*probs)[i] = std::exp(logits[i] - lse);
    }
    return lse - logits[label];
}

// Task loss and its gradient w.r.t. the (linear) readout output.
double task_loss_and_grad(const PolyNetwork& net, const Vector& out, LossKind loss_kind,
                          int label, double target, Vector* g_out) {
    if (loss_kind == LossKind::CrossEntropy) {
        Vector probs;
        const double loss = softmax_nll(out, label, g_out ? &probs : nullptr);
        if (g_out) {
            *g_out = probs;
            (*g_out)[label] -= 1.0;
        }
        return loss;
    }
    if (net.output_dim() != 1)
        throw std::logic_error("mse loss requires a scalar-output network");
    const double r = out[0] - target;
    if (g_out) *g_out = {2.0 * r};
    return r * r;
}

void fetch_target(const Dataset& ds, LossKind loss_kind, std::size_t i, int& label,
                  double& target) {
    label = 0;
    target = 0.0;
    if (loss_kind == LossKind::CrossEntropy) {
        if (ds.kind != TargetKind::Classes)
            throw std::invalid_argument("cross_entropy requires class labels");
        label = ds.labels[i];
    } else {
        target = ds.scalar_target(i);
    }
}

// Reverse pass over the cached tape of one sample. G_h at the readout is
// pre-scaled by the batch weight; the DREG seed 2*lambda*wt*S is injected
// layer by layer. The penalty feeds parameters along three routes: the
// explicit W factor in S = diag(phi') W S_prev, phi'(z)'s dependence on W
// through z (the phi'' term), and phi''s coefficients (the k alpha_k z^{k-1}
// term); earlier layers receive W^T diag(phi') G_S.
void backward_sample(const PolyNetwork& net, const ForwardResult& fr, LossKind loss_kind,
                     int label, double target, double wt, ParamGrads& acc) {
    const std::size_t L = net.layers.size();
    const double lambda = net.reg.penalizes_jacobian() ? net.reg.lambda : 0.0;
    const auto scope = net.reg.effective_scope();

    Vector g_h;
    task_loss_and_grad(net, fr.output(), loss_kind, label, target, &g_h);
    for (double& v : g_h) v *= wt;

    Matrix g_s;  // adjoint of S^(l), carried down the layers
    for (std::size_t l = L; l-- > 0;) {
        const PolyLayer& layer = net.layers[l];
        const Vector& z = fr.zs[l];
        const Vector& h_in = fr.h_ins[l];
        const std::size_t out_dim = layer.out_dim();
        const std::size_t G = layer.degree();
        LayerGrads& lg = acc[l];

        Vector dphi(out_dim), u;
        for (std::size_t i = 0; i < out_dim; ++i) {
            const double* arow = layer.act == Activation::Poly ? layer.alpha.row_ptr(i) : nullptr;
            dphi[i] = act_deriv(layer.act, arow, G, z[i]);
        }

        const bool jac_path = lambda > 0.0 && fr.with_jacobian;
        if (jac_path) {
            if (g_s.rows() == 0) g_s = Matrix(out_dim, net.input_dim);
            if (scope == Regularizer::Scope::AllLayers || l + 1 == L) {
                const Matrix& s_out = fr.states[l].S;
                const double c = 2.0 * lambda * wt;
                for (std::size_t i = 0; i < g_s.size(); ++i)
                    g_s.data()[i] += c * s_out.data()[i];
            }
            // u_i = <G_S row i, A row i>, A = W S_prev (A = W itself for l = 0)
            const Matrix& a = (l == 0) ? layer.W : fr.As[l];
            u.assign(out_dim, 0.0);
            for (std::size_t i = 0; i < out_dim; ++i) {
                const double* gr = g_s.row_ptr(i);
                const double* ar = a.row_ptr(i);
                double s = 0.0;
                for (std::size_t d = 0; d < g_s.cols(); ++d) s += gr[d] * ar[d];
                u[i] = s;
            }
            // G_S becomes M = diag(dphi) G_S, the adjoint of A.
            for (std::size_t i = 0; i < out_dim; ++i) {
                double* gr = g_s.row_ptr(i);
                for (std::size_t d = 0; d < g_s.cols(); ++d) gr[d] *= dphi[i];
            }
            if (l == 0) {
                for (std::size_t i = 0; i < g_s.size(); ++i) lg.dW.data()[i] += g_s.data()[i];
            } else {
                add_matmul_bt(lg.dW, g_s, fr.states[l - 1].S);
            }
        }

        // Value path: G_z = G_h . phi'(z) + u . phi''(z)
        Vector g_z(out_dim);
        for (std::size_t i = 0; i < out_dim; ++i) {
            const double* arow = layer.act == Activation::Poly ? layer.alpha.row_ptr(i) : nullptr;
            double gz = g_h[i] * dphi[i];
            if (jac_path && layer.act != Activation::Relu && layer.act != Activation::Linear)
                gz += u[i] * act_second_deriv(layer.act, arow, G, z[i]);
            g_z[i] = gz;
        }

        if (layer.act == Activation::Poly) {
            for (std::size_t i = 0; i < out_dim; ++i) {
                double* da = lg.dalpha.row_ptr(i);
                double zpow = z[i];  // z^k for k = 1..G
                for (std::size_t k = 0; k < G; ++k) {
                    da[k] += g_h[i] * zpow;  // d phi / d alpha_k = z^k
                    if (jac_path) {
                        // d phi' / d alpha_k = (k+1) z^k
                        const double zkm1 = (k == 0) ? 1.0 : zpow / z[i];
                        da[k] += u[i] * static_cast<double>(k + 1) * zkm1;
                    }
                    zpow *= z[i];
                }
            }
        }

        for (std::size_t i = 0; i < out_dim; ++i) {
            lg.db[i] += g_z[i];
            const double gzi = g_z[i];
            if (gzi != 0.0) {
                double* dwrow = lg.dW.row_ptr(i);
                for (std::size_t j = 0; j < h_in.size(); ++j) dwrow[j] += gzi * h_in[j];
            }
        }

        if (l > 0) {
            g_h = matvec_transposed(layer.W, g_z);
            if (jac_path) g_s = matmul_at_b(layer.W, g_s);
        }
    }
}

double objective_and_grads(const PolyNetwork& net, const Dataset& batch, LossKind loss_kind,
                           ParamGrads* grads) {
    const std::size_t n = batch.size();
    if (n == 0) throw std::invalid_argument("empty batch");
    const bool need_jac = net.reg.penalizes_jacobian();
    const double wt = 1.0 / static_cast<double>(n);
    const auto scope = net.reg.effective_scope();

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        int label;
        double target;
        fetch_target(batch, loss_kind, i, label, target);
        const ForwardResult fr = network_forward(net, batch.row(i), need_jac);
        total += wt * task_loss_and_grad(net, fr.output(), loss_kind, label, target, nullptr);
        if (need_jac) total += wt * net.reg.lambda * dreg_penalty(fr.states, scope);
        if (grads) backward_sample(net, fr, loss_kind, label, target, wt, *grads);
    }
    if (!std::isfinite(total))
        throw std::runtime_error("training divergence: non-finite objective");
    return total;
}

}  // namespace

ParamGrads zeros_like(const PolyNetwork& net) {
    ParamGrads g;
    g.reserve(net.layers.size());
    for (const auto& l : net.layers) {
        LayerGrads lg;
        lg.dW = Matrix(l.W.rows(), l.W.cols());
        lg.db = Vector(l.b.size(), 0.0);
        lg.dalpha = Matrix(l.alpha.rows(), l.alpha.cols());
        g.push_back(std::move(lg));
    }
    return g;
}

void grads_axpy(ParamGrads& acc, const ParamGrads& g, double scale) {
    for (std::size_t l = 0; l < acc.size(); ++l) {
        for (std::size_t i = 0; i < acc[l].dW.size(); ++i)
            acc[l].dW.data()[i] += scale * g[l].dW.data()[i];
        for (std::size_t i = 0; i < acc[l].db.size(); ++i)
            acc[l].db[i] += scale * g[l].db[i];
        for (std::size_t i = 0; i < acc[l].dalpha.size(); ++i)
            acc[l].dalpha.data()[i] += scale * g[l].dalpha.data()[i];
    }
}

void grads_scale(ParamGrads& g, double scale) {
    for (auto& lg : g) {
        for (double& x : lg.dW.data()) x *= scale;
        for (double& x : lg.db) x *= scale;
        for (double& x : lg.dalpha.data()) x *= scale;
    }
}

double grads_global_norm(const ParamGrads& g) {
    double s = 0.0;
    for (const auto& lg : g)
        s += frobenius_norm_sq(lg.dW) + frobenius_norm_sq(lg.db) + frobenius_norm_sq(lg.dalpha);
    return std::sqrt(s);
}

void grads_check_finite(const ParamGrads& g) {
    for (std::size_t l = 0; l < g.size(); ++l) {
        auto bad = [&](const std::string& block) {
            throw std::runtime_error("non-finite gradient in layer " + std::to_string(l) +
                                     " block " + block);
        };
        if (!g[l].dW.all_finite()) bad("dW");
        for (double v : g[l].db)
            if (!std::isfinite(v)) bad("db");
        if (!g[l].dalpha.all_finite()) bad("dalpha");
    }
}

std::pair<double, std::vector<std::vector<DualState>>> loss_total(const PolyNetwork& net,
                                                                  const Dataset& batch,
                                                                  LossKind loss_kind) {
    const std::size_t n = batch.size();
    if (n == 0) throw std::invalid_argument("empty batch");
    const bool need_jac = net.reg.penalizes_jacobian();
    const auto scope = net.reg.effective_scope();
    double total = 0.0;
    std::vector<std::vector<DualState>> all_states;
    all_states.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        int label;
        double target;
        fetch_target(batch, loss_kind, i, label, target);
        ForwardResult fr = network_forward(net, batch.row(i), need_jac);
        total += task_loss_and_grad(net, fr.output(), loss_kind, label, target, nullptr) / n;
        if (need_jac) total += net.reg.lambda * dreg_penalty(fr.states, scope) / n;
        all_states.push_back(std::move(fr.states));
    }
    if (!std::isfinite(total))
        throw std::runtime_error("training divergence: non-finite objective");
    return {total, std::move(all_states)};
}

double loss_value(const PolyNetwork& net, const Dataset& batch, LossKind loss_kind) {
    return objective_and_grads(net, batch, loss_kind, nullptr);
}

double task_loss(const PolyNetwork& net, const Dataset& batch, LossKind loss_kind) {
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        int label;
        double target;
        fetch_target(batch, loss_kind, i, label, target);
        const ForwardResult fr = network_forward(net, batch.row(i), false);
        total += task_loss_and_grad(net, fr.output(), loss_kind, label, target, nullptr);
    }
    return total / static_cast<double>(batch.size());
}

ParamGrads backward(const PolyNetwork& net, const Dataset& batch, LossKind loss_kind) {
    ParamGrads g = zeros_like(net);
    objective_and_grads(net, batch, loss_kind, &g);
    grads_check_finite(g);
    return g;
}

Vector input_gradient(const PolyNetwork& net, const Vector& x, LossKind loss_kind,
                      int class_label, double regression_target) {
    const ForwardResult fr = network_forward(net, x, false);
    Vector g_h;
    task_loss_and_grad(net, fr.output(), loss_kind, class_label, regression_target, &g_h);
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const PolyLayer& layer = net.layers[l];
        Vector g_z(layer.out_dim());
        for (std::size_t i = 0; i < g_z.size(); ++i) {
            const double* arow = layer.act == Activation::Poly ? layer.alpha.row_ptr(i) : nullptr;
            g_z[i] = g_h[i] * act_deriv(layer.act, arow, layer.degree(), fr.zs[l][i]);
        }
        g_h = matvec_transposed(layer.W, g_z);
    }
    return g_h;
}

ParamGrads finite_diff_grad(const PolyNetwork& net, const Dataset& batch, LossKind loss_kind,
                            double step) {
    PolyNetwork work = net;
    ParamGrads g = zeros_like(net);
    auto central = [&](double& theta, double& out) {
        const double orig = theta;
        theta = orig + step;
        const double up = loss_value(work, batch, loss_kind);
        theta = orig - step;
        const double down = loss_value(work, batch, loss_kind);
        theta = orig;
        out = (up - down) / (2.0 * step);
    };
    for (std::size_t l = 0; l < work.layers.size(); ++l) {
        auto& layer = work.layers[l];
        for (std::size_t i = 0; i < layer.W.size(); ++i)
            central(layer.W.data()[i], g[l].dW.data()[i]);
        for (std::size_t i = 0; i < layer.b.size(); ++i) central(layer.b[i], g[l].db[i]);
        for (std::size_t i = 0; i < layer.alpha.size(); ++i)
            central(layer.alpha.data()[i], g[l].dalpha.data()[i]);
    }
    return g;
}

void adam_step(PolyNetwork& net, const ParamGrads& grads, AdamState& state, std::size_t t,
               const AdamHyper& hyper) {
    if (t < 1) throw std::invalid_argument("adam_step: t >= 1");
    if (state.m.empty()) {
        state.m = zeros_like(net);
        state.v = zeros_like(net);
    }
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
    auto update = [&](double* theta, const double* g, double* m, double* v, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
        }
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        update(layer.W.data().data(), grads[l].dW.data().data(), state.m[l].dW.data().data(),
               state.v[l].dW.data().data(), layer.W.size());
        update(layer.b.data(), grads[l].db.data(), state.m[l].db.data(),
               state.v[l].db.data(), layer.b.size());
        update(layer.alpha.data().data(), grads[l].dalpha.data().data(),
               state.m[l].dalpha.data().data(), state.v[l].dalpha.data().data(),
               layer.alpha.size());
    }
}

std::string report_to_json(const TrainReport& r) {
    nlohmann::json j;
    j["train_losses"] = r.train_losses;
    j["val_losses"] = r.val_losses;
    j["epoch_seconds"] = r.epoch_seconds;
    j["stopped_epoch"] = r.stopped_epoch;
    j["best_epoch"] = r.best_epoch;
    j["best_val_loss"] = r.best_val_loss;
    j["diverged"] = r.diverged;
    if (r.diverged) j["divergence_message"] = r.divergence_message;
    return j.dump(2);
}

TrainReport train(PolyNetwork& net, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, LossKind loss_kind) {
    net.validate();
    if (train_set.size() == 0 || val_set.size() == 0)
        throw std::invalid_argument("train/val sets must be non-empty");

    TrainReport report;
    AdamState adam;
    std::vector<PowerIterState> sn_states(net.layers.size());
    Rng shuffle_rng(config.seed);
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    PolyNetwork best = net;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0, no_improve = 0, step_count = 0;
    const bool use_sn = net.reg.kind == Regularizer::Kind::SpectralNorm;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            shuffle_rng.shuffle(order);
            double epoch_loss = 0.0;
            std::size_t n_batches = 0;
            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t end = std::min(order.size(), start + config.batch_size);
                const Dataset batch = take_rows(
                    train_set, std::vector<std::size_t>(order.begin() + start,
                                                        order.begin() + end));
                ParamGrads g = zeros_like(net);
                epoch_loss += objective_and_grads(net, batch, loss_kind, &g);
                grads_check_finite(g);
                if (config.clip_norm > 0.0) {
                    const double norm = grads_global_norm(g);
                    if (norm > config.clip_norm) grads_scale(g, config.clip_norm / norm);
                }
                if (config.precision == 32)
                    for (auto& lg : g) {
                        quantize_f32(lg.dW);
                        quantize_f32(lg.db);
                        quantize_f32(lg.dalpha);
                    }
                adam_step(net, g, adam, ++step_count, config.adam);
                if (use_sn) {
                    for (std::size_t l = 0; l < net.layers.size(); ++l) {
                        const double sigma = spectral_norm_estimate(
                            net.layers[l].W, static_cast<std::size_t>(net.reg.power_iters),
                            sn_states[l]);
                        net.layers[l].W = apply_spectral_constraint(net.layers[l].W, sigma);
                    }
                }
                if (config.precision == 32)
                    for (auto& layer : net.layers) {
                        quantize_f32(layer.W);
                        quantize_f32(layer.b);
                        quantize_f32(layer.alpha);
                    }
                ++n_batches;
            }
            report.train_losses.push_back(epoch_loss / static_cast<double>(n_batches));
            const double val = task_loss(net, val_set, loss_kind);
            report.val_losses.push_back(val);
            report.stopped_epoch = epoch;
            if (val < best_val) {
                best_val = val;
                best = net;
                best_epoch = epoch;
                no_improve = 0;
            } else {
                ++no_improve;
            }
        } catch (const std::exception& e) {
            report.diverged = true;
            report.divergence_message = e.what();
            report.stopped_epoch = epoch;
            break;
        }
        report.epoch_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        if (no_improve >= std::max<std::size_t>(config.patience, 1) ||
            (config.patience == 0 && no_improve > 0))
            break;
    }

    if (best_epoch > 0) {
        net = best;
        report.best_epoch = best_epoch;
        report.best_val_loss = best_val;
    }
    // The snapshot may predate the last projection; re-project so the
    // constraint holds on the returned weights.
    if (use_sn && best_epoch > 0) {
        for (auto& layer : net.layers) {
            PowerIterState st;
            const double sigma = spectral_norm_estimate(layer.W, 100, st);
            layer.W = apply_spectral_constraint(layer.W, sigma);
        }
    }
    return report;
}

double accuracy(const PolyNetwork& net, const Dataset& ds) {
    if (ds.kind == TargetKind::Regression)
        throw std::invalid_argument("accuracy needs class or ordinal labels");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const ForwardResult fr = network_forward(net, ds.row(i), false);
        const auto& out = fr.output();
        const int pred = static_cast<int>(
            std::max_element(out.begin(), out.end()) - out.begin());
        if (pred == ds.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double mse(const PolyNetwork& net, const Dataset& ds) {
    return task_loss(net, ds, LossKind::Mse);
}

}  // namespace cr
