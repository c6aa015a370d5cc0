#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lcp/data.hpp"
#include "lcp/nn.hpp"
#include "lcp/optim.hpp"

namespace lcp {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// MAE over a batch [N x T x D]: sum of absolute errors (summed across the D
/// output variables within each step) divided by T*N.
double mae_metric(const Tensor& y_hat, const Tensor& y);

// Report-row metrics. Totals are per-variable means (sum over the population
// divided by T*N*D) so rows with different output widths stay comparable and
// MAE^2 <= MSE holds on the same error population; per_variable_mse[d] is the
// variable's own error divided by T*N, so the total MSE is their mean.
struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    std::vector<double> per_variable_mse;
    int64_t windows = 0;
};

struct PredictionDump {
    struct Row {
        int64_t window = 0;
        int step = 0;
        std::string variable;
        double actual = 0.0;
        double predicted = 0.0;
    };
    std::vector<Row> rows;

    void write_csv(const std::filesystem::path& path) const;
};

/// Evaluates the model over every window of the test set in eval mode. With
/// `denormalize` the errors are computed in physical units via the dataset's
/// per-feature stats.
Metrics evaluate(const Model& model, const WindowedDataset& test_set, bool denormalize,
                 PredictionDump* dump = nullptr);

/// (base - candidate) / base; the improvement of `candidate_mse` over `base_mse`.
double relative_improvement(double base_mse, double candidate_mse);

// ---------------------------------------------------------------------------
// Report container
// ---------------------------------------------------------------------------

struct EvalKey {
    std::string model;       // family name
    int horizon = 0;         // T
    int time_step = 0;       // L
    int scenario = 0;        // speed km/h, 0 = all
    std::string feature_set; // inputs joined by '+'
    int seed = 0;
};

struct EvalRow {
    EvalKey key;
    Metrics metrics;
    double us_per_step = 0.0;
    std::vector<std::string> variable_names; // aligned with per_variable_mse
};

class EvalReport {
public:
    void add(EvalRow row) { rows_.push_back(std::move(row)); }
    const std::vector<EvalRow>& rows() const { return rows_; }

    void write_csv(const std::filesystem::path& path) const;
    void write_variables_csv(const std::filesystem::path& path) const;
    /// Human-readable summary; metric values are shown at x1e-4 scale like the
    /// normalized-unit tables.
    void render_text(std::ostream& out, double display_scale = 1e4) const;

private:
    std::vector<EvalRow> rows_;
};

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

/// Runs fn(0..n-1) on `workers` threads; results must be written to
/// pre-allocated slots so the merge is deterministic.
void parallel_for(int64_t n, int workers, const std::function<void(int64_t)>& fn);

struct GridOptions {
    std::vector<int> time_steps = {10, 30, 50};
    std::vector<int> horizons = {1, 10, 30, 50};
    FeatureSelection features;
    ModelSpec base_spec;     // horizon/input_dim/output_dim filled per cell
    TrainConfig train;
    uint64_t split_seed = 0;
    int workers = 1;
};

struct GridCell {
    int time_step = 0;
    int horizon = 0;
    bool feasible = true;
    double test_mse = 0.0;
    double test_mae = 0.0;
    int64_t sample_count = 0; // total windows over all events at this (L, T)
};

struct GridResult {
    std::vector<GridCell> cells; // horizon-major, time steps ascending
    /// (horizon, best time step by test MSE, ties to the smaller L).
    std::vector<std::pair<int, int>> best_time_step;
};

/// Argmin time step per horizon over feasible cells; ties go to the smaller
/// time step, so the choice is invariant under positive rescaling of the MSE
/// column. Infeasible horizons map to -1.
std::vector<std::pair<int, int>> select_best_time_steps(const std::vector<GridCell>& cells,
                                                        const std::vector<int>& horizons);

GridResult grid_search(const std::vector<LaneChangeEvent>& events, const GridOptions& options);

// Median per-window inference time over `repetitions` timed passes (one
// warm-up pass excluded). Timing runs must not share the process with other
// load.
double time_inference_us(const Model& model, const WindowedDataset& ds, int repetitions);

struct TimingRow {
    Family family = Family::kTcn;
    int time_step = 0;
    int horizon = 0;
    double us_per_window = 0.0;
};

struct SensitivityOptions {
    std::vector<std::vector<FeatureId>> subsets;
    std::vector<FeatureId> targets = {FeatureId::kAlpha};
    int time_step = 30;
    int horizon = 30;
    ModelSpec base_spec;
    TrainConfig train;
    uint64_t split_seed = 0;
    int workers = 1;
};

struct SensitivityRow {
    std::vector<FeatureId> inputs;
    double mse = 0.0;
    double mae = 0.0;
};

/// Trains and evaluates one model per input subset (same targets). The model
/// seed is derived from the subset content, so equal subsets give equal rows.
std::vector<SensitivityRow> sensitivity_analysis(const std::vector<LaneChangeEvent>& events,
                                                 const SensitivityOptions& options);

struct ScenarioCell {
    Family family = Family::kTcn;
    int speed_kmh = 0;
    bool present = true;
    Metrics metrics;
};

struct ScenarioImprovement {
    int speed_kmh = 0;
    Family baseline = Family::kRnn;
    double improvement = 0.0; // (mse_base - mse_tcn) / mse_base
};

struct ScenarioReport {
    std::vector<ScenarioCell> cells;
    std::vector<ScenarioImprovement> improvements;
};

/// Assembles the per-speed comparison and TCN-vs-baseline improvements from
/// already-evaluated cells; cells missing for a (family, speed) pair are
/// reported absent rather than failing.
ScenarioReport scenario_report(const std::vector<ScenarioCell>& cells);

struct ScenarioOptions {
    std::vector<int> speeds = {60, 80, 100};
    std::vector<Family> families = {Family::kTcn, Family::kRnn, Family::kCnn};
    FeatureSelection features; // joint targets by default
    int time_step = 30;
    ModelSpec base_spec;
    int rnn_hidden = 64; // levels substitute when a cell's family is the RNN
    TrainConfig train;
    uint64_t split_seed = 0;
    int workers = 1;
};

/// Trains one joint model per (family, speed) on that speed's events and
/// assembles the scenario report.
ScenarioReport run_scenario_experiment(const std::vector<LaneChangeEvent>& events,
                                       const ScenarioOptions& options);

} // namespace lcp
