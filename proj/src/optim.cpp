#include "lcp/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "lcp/errors.hpp"

namespace lcp {

LossResult mse_loss(const Tensor& y_hat, const Tensor& y) {
    if (y_hat.rank() != 3 || !y_hat.same_shape(y)) {
        throw ShapeError("mse_loss expects matching [N x T x D] tensors");
    }
    const int64_t n = y_hat.dim(0), t = y_hat.dim(1);
    const double denom = static_cast<double>(t) * static_cast<double>(n);
    LossResult r;
    r.grad = Tensor::zeros(y_hat.shape());
    const double* hp = y_hat.data().data();
    const double* yp = y.data().data();
    double* gp = r.grad.data().data();
    double sse = 0.0;
    for (int64_t i = 0, total = y_hat.numel(); i < total; ++i) {
        const double e = hp[i] - yp[i];
        sse += e * e;
        gp[i] = 2.0 * e / denom;
    }
    r.value = sse / denom;
    return r;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamState::AdamState(const std::vector<Tensor*>& params, const AdamConfig& cfg) : config(cfg) {
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
        throw ParameterError("adam betas must be in [0, 1)");
    }
    if (!(cfg.learning_rate > 0.0)) throw ParameterError("adam learning rate must be > 0");
    m.reserve(params.size());
    v.reserve(params.size());
    for (const Tensor* p : params) {
        m.push_back(Tensor::zeros(p->shape()));
        v.push_back(Tensor::zeros(p->shape()));
    }
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw ShapeError("adam_step: parameter/gradient/state counts differ");
    }
    if (state.t == std::numeric_limits<int64_t>::max()) {
        throw StateError("adam step counter overflow");
    }
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i]->same_shape(grads[i])) {
            throw ShapeError("adam_step: gradient shape mismatch at tensor " + std::to_string(i));
        }
        for (double g : grads[i].data()) {
            if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
        }
    }
    state.t += 1;
    const double b1 = state.config.beta1, b2 = state.config.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    const double lr = state.config.learning_rate, eps = state.config.epsilon;
    for (size_t i = 0; i < params.size(); ++i) {
        double* mp = state.m[i].data().data();
        double* vp = state.v[i].data().data();
        double* pp = params[i]->data().data();
        const double* gp = grads[i].data().data();
        for (int64_t j = 0, n = params[i]->numel(); j < n; ++j) {
            const double g = gp[j];
            mp[j] = b1 * mp[j] + (1.0 - b1) * g;
            vp[j] = b2 * vp[j] + (1.0 - b2) * g * g;
            const double m_hat = mp[j] / bc1;
            const double v_hat = vp[j] / bc2;
            pp[j] -= lr * m_hat / std::sqrt(v_hat + eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

BestTracker::BestTracker(int patience) : patience_(patience) {
    if (patience < 1) throw ParameterError("patience must be >= 1");
}

bool BestTracker::record(int epoch, double val_mse, bool* improved) {
    const bool better = !has_best_ || val_mse < best_val_;
    if (better) {
        has_best_ = true;
        best_val_ = val_mse;
        best_epoch_ = epoch;
    }
    if (improved) *improved = better;
    return epoch - best_epoch_ >= patience_;
}

double dataset_mse(const Model& model, const WindowedDataset& ds) {
    if (ds.size() == 0) throw ParameterError("dataset_mse: empty dataset");
    double sse = 0.0;
    for (int64_t i = 0; i < ds.size(); ++i) {
        const Tensor y_hat = model.predict(ds.input(i));
        const Tensor y = ds.target(i);
        const double* hp = y_hat.data().data();
        const double* yp = y.data().data();
        for (int64_t j = 0, n = y_hat.numel(); j < n; ++j) {
            const double e = hp[j] - yp[j];
            sse += e * e;
        }
    }
    return sse / (static_cast<double>(ds.horizon()) * static_cast<double>(ds.size()));
}

namespace {

void check_dataset_compat(const Model& model, const WindowedDataset& ds, const char* which) {
    const ModelSpec& s = model.spec();
    if (ds.size() == 0) throw ParameterError(std::string(which) + " dataset is empty");
    if (ds.input_dim() != s.input_dim || ds.output_dim() != s.output_dim ||
        ds.horizon() != s.horizon) {
        throw ParameterError(std::string(which) + " dataset (D=" + std::to_string(ds.input_dim()) +
                             ", T=" + std::to_string(ds.horizon()) + ", D_out=" +
                             std::to_string(ds.output_dim()) + ") does not match model spec");
    }
}

} // namespace

TrainResult train(Model& model, const WindowedDataset& train_set, const WindowedDataset& val_set,
                  const TrainConfig& cfg) {
    check_dataset_compat(model, train_set, "train");
    check_dataset_compat(model, val_set, "validation");
    if (cfg.epochs < 1) throw ParameterError("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw ParameterError("train: batch size must be >= 1");

    const int64_t horizon = train_set.horizon();
    const int64_t dout = train_set.output_dim();

    AdamConfig adam_cfg;
    adam_cfg.learning_rate = cfg.learning_rate;
    auto params = model.params();
    AdamState adam(params, adam_cfg);
    BestTracker tracker(cfg.patience);

    TrainResult result;
    // Epoch 0: the initialized model, evaluated directly.
    {
        EpochStats s;
        s.epoch = 0;
        s.train_mse = dataset_mse(model, train_set);
        s.val_mse = dataset_mse(model, val_set);
        if (!std::isfinite(s.train_mse) || !std::isfinite(s.val_mse)) {
            throw NumericError("non-finite loss at epoch 0");
        }
        result.history.push_back(s);
        bool improved = false;
        tracker.record(0, s.val_mse, &improved);
        result.best_params = model.snapshot_params();
        result.best_val_mse = s.val_mse;
        result.best_epoch = 0;
    }

    std::vector<int64_t> order(static_cast<size_t>(train_set.size()));
    for (int64_t i = 0; i < train_set.size(); ++i) order[static_cast<size_t>(i)] = i;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng shuffle_rng = make_stream(cfg.seed, "shuffle", static_cast<uint64_t>(epoch));
        shuffle(order, shuffle_rng);
        int64_t used = train_set.size();
        if (cfg.max_windows_per_epoch > 0) {
            used = std::min<int64_t>(used, cfg.max_windows_per_epoch);
        }

        Rng dropout_rng = make_stream(cfg.seed, "dropout", static_cast<uint64_t>(epoch));
        double epoch_sse_norm = 0.0; // sum of per-batch loss * batch size
        int64_t seen = 0;
        for (int64_t start = 0; start < used; start += cfg.batch_size) {
            const int64_t nb = std::min<int64_t>(cfg.batch_size, used - start);
            Tensor y_hat = Tensor::zeros({nb, horizon, dout});
            Tensor y = Tensor::zeros({nb, horizon, dout});
            std::vector<std::unique_ptr<Cache>> caches(static_cast<size_t>(nb));
            for (int64_t b = 0; b < nb; ++b) {
                const int64_t idx = order[static_cast<size_t>(start + b)];
                ForwardResult fr =
                    model.forward_with_cache(train_set.input(idx), Mode::kTrain, &dropout_rng);
                caches[static_cast<size_t>(b)] = std::move(fr.cache);
                const Tensor target = train_set.target(idx);
                for (int64_t t = 0; t < horizon; ++t) {
                    for (int64_t d = 0; d < dout; ++d) {
                        y_hat(b, t, d) = fr.y(t, d);
                        y(b, t, d) = target(t, d);
                    }
                }
            }
            LossResult loss = mse_loss(y_hat, y);
            if (!std::isfinite(loss.value)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
            }
            epoch_sse_norm += loss.value * static_cast<double>(nb);
            seen += nb;

            std::vector<Tensor> grads = model.make_grad_storage();
            Tensor sample_grad = Tensor::zeros({horizon, dout});
            for (int64_t b = 0; b < nb; ++b) {
                for (int64_t t = 0; t < horizon; ++t) {
                    for (int64_t d = 0; d < dout; ++d) sample_grad(t, d) = loss.grad(b, t, d);
                }
                model.backward(*caches[static_cast<size_t>(b)], sample_grad, grads);
            }
            adam_step(params, grads, adam);
        }

        EpochStats s;
        s.epoch = epoch;
        s.train_mse = seen > 0 ? epoch_sse_norm / static_cast<double>(seen) : 0.0;
        s.val_mse = dataset_mse(model, val_set);
        if (!std::isfinite(s.val_mse)) {
            throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
        }
        result.history.push_back(s);

        bool improved = false;
        const bool stop = tracker.record(epoch, s.val_mse, &improved);
        if (improved) {
            result.best_params = model.snapshot_params();
            result.best_val_mse = s.val_mse;
            result.best_epoch = epoch;
        }
        result.epochs_run = epoch;
        if (stop) break;
    }

    model.load_params(result.best_params);
    return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write history file: " + path.string());
    out << "epoch,train_mse,val_mse\n";
    char buf[96];
    for (const EpochStats& s : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", s.epoch, s.train_mse, s.val_mse);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

GradCheckReport gradient_check(Model& model, const Tensor& x, const Tensor& y, double step,
                               const std::vector<Tensor>* analytic_override) {
    if (!(step > 0.0)) throw ParameterError("gradient_check: step must be > 0");
    const ModelSpec& spec = model.spec();
    Tensor y3 = Tensor::zeros({1, spec.horizon, spec.output_dim});
    for (int64_t i = 0; i < y.numel(); ++i) y3[i] = y[i];

    auto loss_of = [&](void) -> double {
        Tensor out = model.forward(x, Mode::kEval, nullptr);
        Tensor o3 = Tensor::zeros({1, spec.horizon, spec.output_dim});
        for (int64_t i = 0; i < out.numel(); ++i) o3[i] = out[i];
        const double v = mse_loss(o3, y3).value;
        if (!std::isfinite(v)) throw NumericError("gradient_check: non-finite loss");
        return v;
    };

    std::vector<Tensor> analytic;
    if (analytic_override) {
        analytic = *analytic_override;
    } else {
        ForwardResult fr = model.forward_with_cache(x, Mode::kEval, nullptr);
        Tensor o3 = Tensor::zeros({1, spec.horizon, spec.output_dim});
        for (int64_t i = 0; i < fr.y.numel(); ++i) o3[i] = fr.y[i];
        LossResult loss = mse_loss(o3, y3);
        Tensor g2 = Tensor::zeros({spec.horizon, spec.output_dim});
        for (int64_t i = 0; i < g2.numel(); ++i) g2[i] = loss.grad[i];
        analytic = model.make_grad_storage();
        model.backward(*fr.cache, g2, analytic);
    }

    GradCheckReport report;
    auto params = model.params();
    const auto& names = model.param_names();
    for (size_t p = 0; p < params.size(); ++p) {
        GradCheckEntry entry;
        entry.name = names[p];
        for (int64_t j = 0; j < params[p]->numel(); ++j) {
            double& theta = (*params[p])[j];
            const double saved = theta;
            theta = saved + step;
            const double plus = loss_of();
            theta = saved - step;
            const double minus = loss_of();
            theta = saved;
            const double numeric = (plus - minus) / (2.0 * step);
            const double a = analytic[p][j];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            entry.max_rel_err = std::max(entry.max_rel_err, std::fabs(a - numeric) / denom);
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.params.push_back(std::move(entry));
    }
    return report;
}

} // namespace lcp
