#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lcp/data.hpp"
#include "lcp/nn.hpp"
#include "lcp/tensor.hpp"

namespace lcp {

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

struct LossResult {
    double value = 0.0;
    Tensor grad; // d loss / d y_hat, same shape as y_hat
};

/// MSE over a batch [N x T x D]: sum of squared errors (summed across the D
/// output variables within each step) divided by T*N. grad is 2*(y_hat-y)/(T*N).
LossResult mse_loss(const Tensor& y_hat, const Tensor& y);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamState(const std::vector<Tensor*>& params, const AdamConfig& cfg);

    AdamConfig config;
    std::vector<Tensor> m; // first moment per parameter
    std::vector<Tensor> v; // second raw moment per parameter
    int64_t t = 0;         // completed steps
};

// One update: m_t = b1*m + (1-b1)*g; v_t = b2*v + (1-b2)*g^2; bias-corrected
// m_hat = m_t/(1-b1^t), v_hat = v_t/(1-b2^t); theta -= lr * m_hat /
// sqrt(v_hat + eps)  (epsilon inside the square root).
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state);

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
    int epochs = 30;
    int batch_size = 64;
    double learning_rate = 0.001;
    double dropout = 0.1; // informational; the model spec carries the applied rate
    uint64_t seed = 0;
    int patience = 50;            // epochs without val improvement before stopping
    int max_windows_per_epoch = 0; // 0 = use every training window each epoch
};

struct EpochStats {
    int epoch = 0; // 0 is the untrained model's evaluation
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainResult {
    std::vector<Tensor> best_params;
    double best_val_mse = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
    std::vector<EpochStats> history;
};

// Tracks the lowest validation loss seen and the patience budget. record()
// returns true when training should stop after the epoch just recorded.
class BestTracker {
public:
    explicit BestTracker(int patience);
    bool record(int epoch, double val_mse, bool* improved);
    int best_epoch() const { return best_epoch_; }
    double best_val() const { return best_val_; }

private:
    int patience_;
    int best_epoch_ = -1;
    double best_val_ = 0.0;
    bool has_best_ = false;
};

// Mini-batch Adam on MSE. Epoch 0 of the history is the initialized model
// evaluated in eval mode on both sets; epochs >= 1 record the mean training
// batch loss (dropout active) and the end-of-epoch validation MSE (dropout
// off). The parameter snapshot with the lowest validation MSE is loaded back
// into the model and returned.
TrainResult train(Model& model, const WindowedDataset& train_set, const WindowedDataset& val_set,
                  const TrainConfig& cfg);

/// Full-dataset MSE in eval mode (Eq-style normalization by T*N).
double dataset_mse(const Model& model, const WindowedDataset& ds);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history);

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> params;
    double max_rel_err = 0.0;
    bool passed(double tolerance) const { return max_rel_err <= tolerance; }
};

// Central-difference check of every parameter entry against the analytic
// backward pass, on the single sample (x, y) with dropout off. Relative error
// uses an absolute floor of 1e-8. `analytic_override` lets a harness feed
// doctored gradients to prove the check detects them.
GradCheckReport gradient_check(Model& model, const Tensor& x, const Tensor& y, double step = 1e-5,
                               const std::vector<Tensor>* analytic_override = nullptr);

} // namespace lcp
