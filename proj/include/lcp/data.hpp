#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lcp/rng.hpp"
#include "lcp/tensor.hpp"

namespace lcp {

constexpr double kSampleHz = 60.0;
constexpr int kMinEventSamples = 224; // shortest admissible lane-changing event

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

enum class FeatureId { kAlpha, kX, kY, kDx, kDy, kDv };
constexpr int kFeatureCount = 6;

std::string feature_name(FeatureId f);
FeatureId feature_from_string(const std::string& name);
std::vector<FeatureId> parse_feature_list(const std::string& csv);
std::string feature_list_name(const std::vector<FeatureId>& features);

struct StepRecord {
    double alpha = 0; // steering wheel angle, degrees
    double x = 0;     // longitudinal position, m
    double y = 0;     // lateral position, m
    double dx = 0;    // gap to lead vehicle, m
    double dy = 0;    // lateral offset to lead vehicle, m
    double dv = 0;    // speed difference to lead vehicle, m/s
};

double feature_value(const StepRecord& r, FeatureId f);

struct LaneChangeEvent {
    int driver_id = 0;
    int speed_kmh = 60;
    double dt = 1.0 / kSampleHz;
    std::vector<StepRecord> series;

    int64_t size() const { return static_cast<int64_t>(series.size()); }
};

/// Length >= 224, |y(end)-y(start)| within one lane width +-0.5 m, x strictly
/// increasing. Returns false and fills `why` when violated.
bool event_invariants_ok(const LaneChangeEvent& event, std::string* why = nullptr);

// ---------------------------------------------------------------------------
// Synthetic generator. Stand-in for the driving-simulator recordings: a
// cosine lateral profile over a per-driver maneuver duration, longitudinal
// motion integrating the scenario speed with AR(1) jitter, steering angle
// proportional to path curvature plus measurement noise, and relative
// indicators against a constant-speed lead vehicle.
// ---------------------------------------------------------------------------

struct GeneratorConfig {
    int drivers = 47;
    std::vector<int> speeds_kmh = {60, 80, 100};
    int events_per_driver = 1; // per (driver, speed)
    uint64_t seed = 0;

    double lane_width_m = 3.5;
    double duration_mean_s = 5.0;
    double duration_sd_s = 1.0;
    double lead_in_s = 1.0;
    double lead_out_s = 1.0;
    double lead_gap_m = 30.0;
    double steering_gain = 2658.0; // deg * m: alpha = gain * y'' / v^2
    double alpha_noise_deg = 0.8;
    double alpha_noise_rho = 0.95; // AR(1) pole of the steering fluctuation
    double speed_jitter = 0.02; // stationary sd of relative speed variation
    double dx_noise_m = 0.0;
    double dy_noise_m = 0.0;
    double dv_noise = 0.0;
};

struct DriverParams {
    double duration_mean_s = 5.0;
    double gain_scale = 1.0;
    double noise_scale = 1.0;
};

DriverParams draw_driver_params(const GeneratorConfig& cfg, Rng& rng);
LaneChangeEvent generate_synthetic_event(const DriverParams& driver, int speed_kmh,
                                         const GeneratorConfig& cfg, Rng& rng);
/// Full corpus: drivers x speeds x events_per_driver, seeded substreams.
std::vector<LaneChangeEvent> generate_events(const GeneratorConfig& cfg);

// ---------------------------------------------------------------------------
// Min-max normalization (fit on training inputs only)
// ---------------------------------------------------------------------------

struct MinMaxStats {
    std::vector<FeatureId> features;
    std::vector<double> mins;
    std::vector<double> maxs;

    int index_of(FeatureId f) const; // -1 when absent
    double min_of(FeatureId f) const;
    double max_of(FeatureId f) const;
};

/// Extrema per feature over every input window position of the given events
/// (events shorter than L+T are ignored). A constant feature is an error.
MinMaxStats minmax_fit(const std::vector<LaneChangeEvent>& events, int time_step, int horizon,
                       const std::vector<FeatureId>& features);

double normalize_value(double v, double min, double max);
double denormalize_value(double v, double min, double max);

// ---------------------------------------------------------------------------
// Windowed datasets
// ---------------------------------------------------------------------------

struct FeatureSelection {
    std::vector<FeatureId> inputs = {FeatureId::kAlpha, FeatureId::kX, FeatureId::kY};
    std::vector<FeatureId> targets = {FeatureId::kAlpha, FeatureId::kX, FeatureId::kY};
};

/// Windows per event of length n: max(0, n - L - T + 1).
int64_t window_count(int64_t event_len, int time_step, int horizon);

// Sliding windows over normalized event series. Window i is a view into its
// event: input(i) copies steps [j, j+L) as [D x L], target(i) copies steps
// [j+L, j+L+T) as [T x D_out]. Normalization uses the supplied training
// stats; inputs from the stats' own training windows land in [0, 1] exactly,
// anything outside that range passes through unclamped.
class WindowedDataset {
public:
    WindowedDataset() = default;

    int64_t size() const { return static_cast<int64_t>(refs_.size()); }
    int time_step() const { return time_step_; }
    int horizon() const { return horizon_; }
    int input_dim() const { return static_cast<int>(input_features_.size()); }
    int output_dim() const { return static_cast<int>(target_features_.size()); }
    const std::vector<FeatureId>& input_features() const { return input_features_; }
    const std::vector<FeatureId>& target_features() const { return target_features_; }
    const MinMaxStats& stats() const { return stats_; }
    int skipped_events() const { return skipped_events_; }

    Tensor input(int64_t i) const;
    Tensor target(int64_t i) const;

    /// (event index within the backing store, step offset) of window i.
    std::pair<int32_t, int32_t> window_ref(int64_t i) const {
        const WindowRef& r = refs_[static_cast<size_t>(i)];
        return {r.event, r.offset};
    }

    /// Stats for target variable d (for denormalizing predictions).
    std::pair<double, double> target_range(int d) const;

    /// New dataset holding the given window subset (shares event storage).
    WindowedDataset select(const std::vector<int64_t>& indices) const;
    /// First k windows, used to bound benchmark workloads.
    WindowedDataset head(int64_t k) const;

    /// In-memory dataset built from explicit window tensors (no
    /// normalization applied; identity stats).
    static WindowedDataset from_windows(std::vector<Tensor> inputs, std::vector<Tensor> targets);

    friend WindowedDataset slide_windows(const std::vector<LaneChangeEvent>&, int, int,
                                         const FeatureSelection&, const MinMaxStats*);

private:
    struct EventStore; // normalized per-event feature matrices
    struct WindowRef {
        int32_t event = 0;
        int32_t offset = 0;
    };

    std::shared_ptr<const EventStore> store_;
    std::vector<WindowRef> refs_;
    std::vector<Tensor> direct_inputs_, direct_targets_; // from_windows storage
    std::vector<FeatureId> input_features_, target_features_;
    MinMaxStats stats_;
    int time_step_ = 0;
    int horizon_ = 0;
    int skipped_events_ = 0;
};

/// Windows at every valid offset of every event. Events shorter than L+T are
/// skipped and counted. When `stats` is null the dataset is self-normalizing
/// (fit on its own windows).
WindowedDataset slide_windows(const std::vector<LaneChangeEvent>& events, int time_step,
                              int horizon, const FeatureSelection& features,
                              const MinMaxStats* stats = nullptr);

// Per-driver split: 2/3 of each driver's events (floor, seeded choice) form
// the training pool, the rest are the test set; normalization is fit on the
// training pool; a seeded 20% (floor) of the pool's windows become the
// validation set. The three window sets are disjoint.
struct DatasetBundle {
    WindowedDataset train;
    WindowedDataset val;
    WindowedDataset test;
    MinMaxStats stats;
    int skipped_events = 0;
};

DatasetBundle split_by_driver(const std::vector<LaneChangeEvent>& events, int time_step,
                              int horizon, const FeatureSelection& features, uint64_t seed);

// ---------------------------------------------------------------------------
// Persistence: one CSV per event (header t,alpha,x,y,dx,dy,dv; one row per
// 1/60 s step) plus a key-value manifest. Externally produced CSVs in the
// same schema load through the same path.
// ---------------------------------------------------------------------------

struct ManifestEntry {
    int driver_id = 0;
    int speed_kmh = 60;
    uint64_t seed = 0;
    std::string file;
};

struct Manifest {
    uint64_t seed = 0;
    std::vector<ManifestEntry> entries;
};

void write_event_csv(const LaneChangeEvent& event, const std::filesystem::path& path);
LaneChangeEvent read_event_csv(const std::filesystem::path& path, int driver_id, int speed_kmh);

void save_events(const std::filesystem::path& dir, const std::vector<LaneChangeEvent>& events,
                 uint64_t seed);
Manifest read_manifest(const std::filesystem::path& dir);
std::vector<LaneChangeEvent> load_events(const std::filesystem::path& dir);

} // namespace lcp
