#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lcp/data.hpp"
#include "lcp/nn.hpp"

namespace lcp {

enum class EvalMode { kSingle, kCompare, kGrid, kTiming, kAblation, kScenario };
enum class UnitMode { kNormalized, kPhysical, kBoth };
enum class AblationDirection { kLeaveOneOut, kAddOneIn, kBoth };

// Run configuration: a sectioned key=value text file plus per-field command
// line overrides. Every field has a default; the defaults reproduce the
// desk-scale reference run. Unknown keys are rejected by name.
struct RunConfig {
    uint64_t seed = 0;

    // [generator]
    GeneratorConfig generator;

    // [windowing]
    int time_step = 30;
    int horizon = 10;
    std::vector<FeatureId> inputs = {FeatureId::kAlpha, FeatureId::kX, FeatureId::kY};
    std::vector<FeatureId> targets = {FeatureId::kAlpha, FeatureId::kX, FeatureId::kY};

    // [model]
    Family family = Family::kTcn;
    int levels = 4;
    int channels = 32;
    int kernel = 2;
    double dropout = 0.1;
    int rnn_hidden = 64;

    // [training]
    int epochs = 30;
    int batch_size = 64;
    double learning_rate = 0.001;
    int patience = 50;
    int max_windows_per_epoch = 2048;

    // [evaluation]
    EvalMode mode = EvalMode::kSingle;
    UnitMode units = UnitMode::kNormalized;
    int scenario = 0; // restrict to one speed, 0 = all
    std::vector<int> grid_time_steps = {10, 30, 50};
    std::vector<int> grid_horizons = {1, 10, 30, 50};
    std::vector<int> trend_horizons = {1, 10, 30};
    int trend_seeds = 3;
    std::vector<int> timing_time_steps = {10, 30, 50, 80, 100};
    int timing_horizon = 10;
    int timing_repetitions = 30;
    int timing_max_windows = 256;
    std::vector<FeatureId> ablation_base = {FeatureId::kAlpha};
    std::vector<FeatureId> ablation_candidates = {FeatureId::kDx, FeatureId::kDy, FeatureId::kDv};
    AblationDirection ablation_direction = AblationDirection::kBoth;
    std::vector<int> scenario_speeds = {60, 80, 100};
    int workers = 0; // 0 = hardware concurrency
    bool dump_predictions = true;

    // [paths]
    std::filesystem::path data_dir = "data";
    std::filesystem::path model_file = "model.bin";
    std::filesystem::path history_file = "history.csv";
    std::filesystem::path report_dir = "reports";

    /// Applies one "section.key=value" assignment (command line override).
    void set(const std::string& assignment);

    FeatureSelection feature_selection() const { return {inputs, targets}; }
    /// ModelSpec for the given family with dims from the windowing section.
    ModelSpec model_spec(Family f) const;
    int effective_workers() const;
};

/// Parses the config file and returns defaults overlaid with its contents.
RunConfig load_config(const std::filesystem::path& path);

std::string eval_mode_name(EvalMode mode);

} // namespace lcp
