#include "lcp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lcp/errors.hpp"

namespace lcp {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string format_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string feature_name(FeatureId f) {
    switch (f) {
    case FeatureId::kAlpha: return "alpha";
    case FeatureId::kX: return "x";
    case FeatureId::kY: return "y";
    case FeatureId::kDx: return "dx";
    case FeatureId::kDy: return "dy";
    case FeatureId::kDv: return "dv";
    }
    return "?";
}

FeatureId feature_from_string(const std::string& name) {
    for (int i = 0; i < kFeatureCount; ++i) {
        if (name == feature_name(static_cast<FeatureId>(i))) return static_cast<FeatureId>(i);
    }
    throw ParameterError("unknown feature name: " + name);
}

std::vector<FeatureId> parse_feature_list(const std::string& csv) {
    std::vector<FeatureId> out;
    std::string item;
    std::stringstream ss(csv);
    while (std::getline(ss, item, ',')) {
        // trim
        size_t b = item.find_first_not_of(" \t");
        size_t e = item.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(feature_from_string(item.substr(b, e - b + 1)));
    }
    if (out.empty()) throw ParameterError("empty feature list");
    return out;
}

std::string feature_list_name(const std::vector<FeatureId>& features) {
    std::string s;
    for (size_t i = 0; i < features.size(); ++i) {
        if (i) s += "+";
        s += feature_name(features[i]);
    }
    return s;
}

double feature_value(const StepRecord& r, FeatureId f) {
    switch (f) {
    case FeatureId::kAlpha: return r.alpha;
    case FeatureId::kX: return r.x;
    case FeatureId::kY: return r.y;
    case FeatureId::kDx: return r.dx;
    case FeatureId::kDy: return r.dy;
    case FeatureId::kDv: return r.dv;
    }
    return 0.0;
}

bool event_invariants_ok(const LaneChangeEvent& event, std::string* why) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (event.size() < kMinEventSamples) {
        return fail("event has " + std::to_string(event.size()) + " samples, need >= " +
                    std::to_string(kMinEventSamples));
    }
    const double dy = std::fabs(event.series.back().y - event.series.front().y);
    if (dy < 3.0 || dy > 4.0) {
        return fail("lateral displacement " + std::to_string(dy) + " outside 3.5 +- 0.5");
    }
    for (size_t i = 1; i < event.series.size(); ++i) {
        if (!(event.series[i].x > event.series[i - 1].x)) {
            return fail("x not strictly increasing at step " + std::to_string(i));
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

DriverParams draw_driver_params(const GeneratorConfig& cfg, Rng& rng) {
    DriverParams p;
    p.duration_mean_s = std::clamp(rng.normal(cfg.duration_mean_s, cfg.duration_sd_s), 2.5, 8.0);
    p.gain_scale = rng.uniform(0.85, 1.15);
    p.noise_scale = rng.uniform(0.7, 1.3);
    return p;
}

LaneChangeEvent generate_synthetic_event(const DriverParams& driver, int speed_kmh,
                                         const GeneratorConfig& cfg, Rng& rng) {
    bool speed_ok = false;
    for (int s : cfg.speeds_kmh) speed_ok = speed_ok || s == speed_kmh;
    if (!speed_ok || speed_kmh <= 0) {
        throw ParameterError("scenario speed " + std::to_string(speed_kmh) + " km/h not configured");
    }

    const double dt = 1.0 / kSampleHz;
    const double t_lc = std::clamp(rng.normal(driver.duration_mean_s, 0.25), 2.0, 9.0);
    const double lead_in = rng.uniform(cfg.lead_in_s * 0.8, cfg.lead_in_s * 1.2);
    const double lead_out = rng.uniform(cfg.lead_out_s * 0.8, cfg.lead_out_s * 1.2);

    const int64_t li = std::llround(lead_in * kSampleHz);
    const int64_t m = std::max<int64_t>(2, std::llround(t_lc * kSampleHz));
    int64_t lo = std::llround(lead_out * kSampleHz);
    if (li + m + lo < kMinEventSamples) lo = kMinEventSamples - li - m;
    const int64_t n = li + m + lo;

    const double v0 = speed_kmh / 3.6;
    const double w = cfg.lane_width_m;
    const double curve = 0.5 * w * (kPi / t_lc) * (kPi / t_lc); // peak |y''|

    LaneChangeEvent event;
    event.speed_kmh = speed_kmh;
    event.dt = dt;
    event.series.resize(static_cast<size_t>(n));

    const double rho = 0.95; // AR(1) speed jitter
    const double innov = cfg.speed_jitter * std::sqrt(1.0 - rho * rho);
    double jitter = cfg.speed_jitter * rng.normal();
    // Steering fluctuation: stationary AR(1), unit variance, scaled below.
    const double arho = std::clamp(cfg.alpha_noise_rho, 0.0, 0.999);
    const double ainnov = std::sqrt(1.0 - arho * arho);
    double alpha_noise = rng.normal();
    double x = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        StepRecord& r = event.series[static_cast<size_t>(i)];
        const double t = static_cast<double>(i) * dt;
        const double v = v0 * std::max(0.1, 1.0 + jitter);
        double ypp = 0.0;
        if (i >= li && i < li + m) {
            const double tau = static_cast<double>(i - li) * dt;
            r.y = 0.5 * w * (1.0 - std::cos(kPi * tau / t_lc));
            ypp = curve * std::cos(kPi * tau / t_lc);
        } else {
            r.y = i < li ? 0.0 : w;
        }
        r.x = x;
        const double eps_alpha = rng.normal();
        const double eps_dx = rng.normal();
        const double eps_dy = rng.normal();
        const double eps_dv = rng.normal();
        alpha_noise = arho * alpha_noise + ainnov * eps_alpha;
        r.alpha = driver.gain_scale * cfg.steering_gain * ypp / (v0 * v0) +
                  cfg.alpha_noise_deg * driver.noise_scale * alpha_noise;
        const double lead_x = cfg.lead_gap_m + v0 * t;
        r.dx = lead_x - x + cfg.dx_noise_m * eps_dx;
        r.dy = -r.y + cfg.dy_noise_m * eps_dy;
        r.dv = (v0 - v) + cfg.dv_noise * eps_dv;

        x += v * dt;
        jitter = rho * jitter + innov * rng.normal();
    }
    return event;
}

std::vector<LaneChangeEvent> generate_events(const GeneratorConfig& cfg) {
    if (cfg.drivers < 1) throw ParameterError("generator: drivers must be >= 1");
    if (cfg.speeds_kmh.empty()) throw ParameterError("generator: no scenario speeds configured");
    if (cfg.events_per_driver < 1) throw ParameterError("generator: events_per_driver must be >= 1");
    std::vector<LaneChangeEvent> events;
    events.reserve(static_cast<size_t>(cfg.drivers) * cfg.speeds_kmh.size() *
                   static_cast<size_t>(cfg.events_per_driver));
    for (int d = 0; d < cfg.drivers; ++d) {
        Rng driver_rng = make_stream(cfg.seed, "driver", static_cast<uint64_t>(d));
        const DriverParams params = draw_driver_params(cfg, driver_rng);
        for (size_t si = 0; si < cfg.speeds_kmh.size(); ++si) {
            for (int rep = 0; rep < cfg.events_per_driver; ++rep) {
                const uint64_t key =
                    (static_cast<uint64_t>(d) * cfg.speeds_kmh.size() + si) *
                        static_cast<uint64_t>(cfg.events_per_driver) +
                    static_cast<uint64_t>(rep);
                Rng event_rng = make_stream(cfg.seed, "event", key);
                LaneChangeEvent e =
                    generate_synthetic_event(params, cfg.speeds_kmh[si], cfg, event_rng);
                e.driver_id = d;
                events.push_back(std::move(e));
            }
        }
    }
    return events;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

int MinMaxStats::index_of(FeatureId f) const {
    for (size_t i = 0; i < features.size(); ++i) {
        if (features[i] == f) return static_cast<int>(i);
    }
    return -1;
}

double MinMaxStats::min_of(FeatureId f) const {
    const int i = index_of(f);
    if (i < 0) throw ParameterError("no stats for feature " + feature_name(f));
    return mins[static_cast<size_t>(i)];
}

double MinMaxStats::max_of(FeatureId f) const {
    const int i = index_of(f);
    if (i < 0) throw ParameterError("no stats for feature " + feature_name(f));
    return maxs[static_cast<size_t>(i)];
}

double normalize_value(double v, double min, double max) {
    if (!(max > min)) throw ParameterError("normalization stats degenerate: max <= min");
    return (v - min) / (max - min);
}

double denormalize_value(double v, double min, double max) {
    if (!(max > min)) throw ParameterError("normalization stats degenerate: max <= min");
    return v * (max - min) + min;
}

namespace {

// Input windows of an event with n samples cover steps [0, n - T).
MinMaxStats fit_over_coverage(const std::vector<LaneChangeEvent>& events, int L, int T,
                              const std::vector<FeatureId>& features, bool target_coverage) {
    MinMaxStats stats;
    stats.features = features;
    stats.mins.assign(features.size(), 0.0);
    stats.maxs.assign(features.size(), 0.0);
    bool any = false;
    for (const LaneChangeEvent& e : events) {
        const int64_t n = e.size();
        if (window_count(n, L, T) <= 0) continue;
        const int64_t begin = target_coverage ? L : 0;
        const int64_t end = target_coverage ? n : n - T;
        for (size_t f = 0; f < features.size(); ++f) {
            double lo = stats.mins[f], hi = stats.maxs[f];
            bool first = !any;
            for (int64_t i = begin; i < end; ++i) {
                const double v = feature_value(e.series[static_cast<size_t>(i)], features[f]);
                if (first) {
                    lo = hi = v;
                    first = false;
                } else {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
            stats.mins[f] = lo;
            stats.maxs[f] = hi;
        }
        any = true;
    }
    if (!any) throw ParameterError("minmax_fit: no event is long enough for the window geometry");
    for (size_t f = 0; f < features.size(); ++f) {
        if (!(stats.maxs[f] > stats.mins[f])) {
            throw ParameterError("degenerate feature '" + feature_name(features[f]) +
                                 "': constant over the training windows");
        }
    }
    return stats;
}

} // namespace

MinMaxStats minmax_fit(const std::vector<LaneChangeEvent>& events, int time_step, int horizon,
                       const std::vector<FeatureId>& features) {
    if (time_step < 1 || horizon < 1) throw ParameterError("minmax_fit: L and T must be >= 1");
    if (features.empty()) throw ParameterError("minmax_fit: empty feature list");
    return fit_over_coverage(events, time_step, horizon, features, false);
}

// ---------------------------------------------------------------------------
// WindowedDataset
// ---------------------------------------------------------------------------

int64_t window_count(int64_t event_len, int time_step, int horizon) {
    const int64_t c = event_len - time_step - horizon + 1;
    return c > 0 ? c : 0;
}

struct WindowedDataset::EventStore {
    // Per event: one row per stored feature, normalized, length n.
    struct EventData {
        std::vector<std::vector<double>> rows;
        int64_t length = 0;
    };
    std::vector<EventData> events;
    std::vector<FeatureId> row_features; // inputs first, then target-only features
};

Tensor WindowedDataset::input(int64_t i) const {
    if (!direct_inputs_.empty()) return direct_inputs_[static_cast<size_t>(i)];
    const WindowRef& ref = refs_[static_cast<size_t>(i)];
    const auto& ev = store_->events[static_cast<size_t>(ref.event)];
    const int64_t d = input_dim();
    Tensor out = Tensor::zeros({d, time_step_});
    for (int64_t f = 0; f < d; ++f) {
        const std::vector<double>& row = ev.rows[static_cast<size_t>(f)];
        for (int64_t s = 0; s < time_step_; ++s) out(f, s) = row[static_cast<size_t>(ref.offset + s)];
    }
    return out;
}

Tensor WindowedDataset::target(int64_t i) const {
    if (!direct_targets_.empty()) return direct_targets_[static_cast<size_t>(i)];
    const WindowRef& ref = refs_[static_cast<size_t>(i)];
    const auto& ev = store_->events[static_cast<size_t>(ref.event)];
    const int64_t dout = output_dim();
    Tensor out = Tensor::zeros({horizon_, dout});
    for (int64_t d = 0; d < dout; ++d) {
        // Target rows are located by feature id within the store.
        int64_t row_idx = -1;
        for (size_t r = 0; r < store_->row_features.size(); ++r) {
            if (store_->row_features[r] == target_features_[static_cast<size_t>(d)]) {
                row_idx = static_cast<int64_t>(r);
                break;
            }
        }
        const std::vector<double>& row = ev.rows[static_cast<size_t>(row_idx)];
        for (int64_t t = 0; t < horizon_; ++t) {
            out(t, d) = row[static_cast<size_t>(ref.offset + time_step_ + t)];
        }
    }
    return out;
}

std::pair<double, double> WindowedDataset::target_range(int d) const {
    if (stats_.features.empty()) return {0.0, 1.0}; // identity stats (direct datasets)
    const FeatureId f = target_features_[static_cast<size_t>(d)];
    return {stats_.min_of(f), stats_.max_of(f)};
}

WindowedDataset WindowedDataset::select(const std::vector<int64_t>& indices) const {
    WindowedDataset out = *this;
    if (!direct_inputs_.empty()) {
        out.direct_inputs_.clear();
        out.direct_targets_.clear();
        for (int64_t i : indices) {
            out.direct_inputs_.push_back(direct_inputs_[static_cast<size_t>(i)]);
            out.direct_targets_.push_back(direct_targets_[static_cast<size_t>(i)]);
        }
        out.refs_.assign(indices.size(), WindowRef{});
        return out;
    }
    out.refs_.clear();
    out.refs_.reserve(indices.size());
    for (int64_t i : indices) out.refs_.push_back(refs_[static_cast<size_t>(i)]);
    return out;
}

WindowedDataset WindowedDataset::head(int64_t k) const {
    std::vector<int64_t> idx;
    for (int64_t i = 0; i < std::min(k, size()); ++i) idx.push_back(i);
    return select(idx);
}

WindowedDataset WindowedDataset::from_windows(std::vector<Tensor> inputs,
                                              std::vector<Tensor> targets) {
    if (inputs.empty() || inputs.size() != targets.size()) {
        throw ParameterError("from_windows: need equal, non-empty input/target lists");
    }
    WindowedDataset ds;
    ds.time_step_ = static_cast<int>(inputs[0].dim(1));
    ds.horizon_ = static_cast<int>(targets[0].dim(0));
    const int64_t d = inputs[0].dim(0);
    const int64_t dout = targets[0].dim(1);
    for (size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].rank() != 2 || inputs[i].dim(0) != d || inputs[i].dim(1) != ds.time_step_ ||
            targets[i].rank() != 2 || targets[i].dim(0) != ds.horizon_ ||
            targets[i].dim(1) != dout) {
            throw ShapeError("from_windows: inconsistent window shapes");
        }
    }
    // Feature ids are placeholders for direct datasets.
    for (int64_t f = 0; f < d; ++f) ds.input_features_.push_back(static_cast<FeatureId>(f % kFeatureCount));
    for (int64_t f = 0; f < dout; ++f) ds.target_features_.push_back(static_cast<FeatureId>(f % kFeatureCount));
    ds.direct_inputs_ = std::move(inputs);
    ds.direct_targets_ = std::move(targets);
    ds.refs_.assign(ds.direct_inputs_.size(), WindowRef{});
    return ds;
}

WindowedDataset slide_windows(const std::vector<LaneChangeEvent>& events, int time_step,
                              int horizon, const FeatureSelection& features,
                              const MinMaxStats* stats) {
    if (time_step < 1 || horizon < 1) throw ParameterError("slide_windows: L and T must be >= 1");
    if (features.inputs.empty() || features.targets.empty()) {
        throw ParameterError("slide_windows: empty feature selection");
    }

    WindowedDataset ds;
    ds.time_step_ = time_step;
    ds.horizon_ = horizon;
    ds.input_features_ = features.inputs;
    ds.target_features_ = features.targets;

    // Store rows: inputs first, then target-only features.
    std::vector<FeatureId> rows = features.inputs;
    std::vector<FeatureId> extra_targets;
    for (FeatureId f : features.targets) {
        if (std::find(rows.begin(), rows.end(), f) == rows.end() &&
            std::find(extra_targets.begin(), extra_targets.end(), f) == extra_targets.end()) {
            extra_targets.push_back(f);
        }
    }
    rows.insert(rows.end(), extra_targets.begin(), extra_targets.end());

    MinMaxStats fitted;
    if (stats) {
        fitted = *stats;
        for (FeatureId f : rows) {
            if (fitted.index_of(f) < 0) {
                throw ParameterError("supplied stats lack feature " + feature_name(f));
            }
        }
    } else {
        fitted = minmax_fit(events, time_step, horizon, features.inputs);
        if (!extra_targets.empty()) {
            // Target-only features never appear in an input window; fit them
            // over the target coverage instead.
            MinMaxStats t = fit_over_coverage(events, time_step, horizon, extra_targets, true);
            fitted.features.insert(fitted.features.end(), t.features.begin(), t.features.end());
            fitted.mins.insert(fitted.mins.end(), t.mins.begin(), t.mins.end());
            fitted.maxs.insert(fitted.maxs.end(), t.maxs.begin(), t.maxs.end());
        }
    }
    ds.stats_ = fitted;

    auto store = std::make_shared<WindowedDataset::EventStore>();
    store->row_features = rows;
    store->events.reserve(events.size());
    int skipped = 0;
    for (const LaneChangeEvent& e : events) {
        const int64_t count = window_count(e.size(), time_step, horizon);
        if (count <= 0) {
            ++skipped;
            continue;
        }
        WindowedDataset::EventStore::EventData data;
        data.length = e.size();
        data.rows.resize(rows.size());
        for (size_t r = 0; r < rows.size(); ++r) {
            const double lo = fitted.min_of(rows[r]);
            const double hi = fitted.max_of(rows[r]);
            std::vector<double>& row = data.rows[r];
            row.resize(static_cast<size_t>(e.size()));
            for (int64_t i = 0; i < e.size(); ++i) {
                row[static_cast<size_t>(i)] =
                    normalize_value(feature_value(e.series[static_cast<size_t>(i)], rows[r]), lo, hi);
            }
        }
        const int32_t event_idx = static_cast<int32_t>(store->events.size());
        store->events.push_back(std::move(data));
        for (int64_t j = 0; j < count; ++j) {
            ds.refs_.push_back({event_idx, static_cast<int32_t>(j)});
        }
    }
    ds.skipped_events_ = skipped;
    ds.store_ = std::move(store);
    return ds;
}

DatasetBundle split_by_driver(const std::vector<LaneChangeEvent>& events, int time_step,
                              int horizon, const FeatureSelection& features, uint64_t seed) {
    if (events.empty()) throw ParameterError("split_by_driver: no events");

    std::map<int, std::vector<size_t>> by_driver;
    for (size_t i = 0; i < events.size(); ++i) by_driver[events[i].driver_id].push_back(i);

    std::vector<LaneChangeEvent> train_events, test_events;
    for (auto& [driver, idx] : by_driver) {
        if (idx.size() < 2) {
            throw SplitError("driver " + std::to_string(driver) + " has fewer than 2 events");
        }
        Rng rng = make_stream(seed, "split.driver", static_cast<uint64_t>(driver));
        shuffle(idx, rng);
        const size_t n_train = idx.size() * 2 / 3;
        for (size_t k = 0; k < idx.size(); ++k) {
            (k < n_train ? train_events : test_events).push_back(events[idx[k]]);
        }
    }

    DatasetBundle bundle;
    bundle.stats = minmax_fit(train_events, time_step, horizon, features.inputs);
    // Target-only features (if any) get their range from the training pool's
    // target coverage; see slide_windows.
    {
        std::vector<FeatureId> extra;
        for (FeatureId f : features.targets) {
            if (bundle.stats.index_of(f) < 0) extra.push_back(f);
        }
        if (!extra.empty()) {
            MinMaxStats t = fit_over_coverage(train_events, time_step, horizon, extra, true);
            bundle.stats.features.insert(bundle.stats.features.end(), t.features.begin(),
                                         t.features.end());
            bundle.stats.mins.insert(bundle.stats.mins.end(), t.mins.begin(), t.mins.end());
            bundle.stats.maxs.insert(bundle.stats.maxs.end(), t.maxs.begin(), t.maxs.end());
        }
    }

    WindowedDataset pool = slide_windows(train_events, time_step, horizon, features, &bundle.stats);
    bundle.test = slide_windows(test_events, time_step, horizon, features, &bundle.stats);
    bundle.skipped_events = pool.skipped_events() + bundle.test.skipped_events();

    std::vector<int64_t> order(static_cast<size_t>(pool.size()));
    for (int64_t i = 0; i < pool.size(); ++i) order[static_cast<size_t>(i)] = i;
    Rng val_rng = make_stream(seed, "split.val");
    shuffle(order, val_rng);
    const int64_t n_val = pool.size() / 5; // exact 20%, floor
    std::vector<int64_t> val_idx(order.begin(), order.begin() + n_val);
    std::vector<int64_t> train_idx(order.begin() + n_val, order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    bundle.val = pool.select(val_idx);
    bundle.train = pool.select(train_idx);
    return bundle;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void write_event_csv(const LaneChangeEvent& event, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write event file: " + path.string());
    out << "t,alpha,x,y,dx,dy,dv\n";
    for (int64_t i = 0; i < event.size(); ++i) {
        const StepRecord& r = event.series[static_cast<size_t>(i)];
        out << format_g17(static_cast<double>(i) * event.dt) << ',' << format_g17(r.alpha) << ','
            << format_g17(r.x) << ',' << format_g17(r.y) << ',' << format_g17(r.dx) << ','
            << format_g17(r.dy) << ',' << format_g17(r.dv) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

LaneChangeEvent read_event_csv(const std::filesystem::path& path, int driver_id, int speed_kmh) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read event file: " + path.string());
    LaneChangeEvent event;
    event.driver_id = driver_id;
    event.speed_kmh = speed_kmh;
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty event file: " + path.string());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        StepRecord r;
        double t = 0;
        double* fields[7] = {&t, &r.alpha, &r.x, &r.y, &r.dx, &r.dy, &r.dv};
        size_t pos = 0;
        for (int f = 0; f < 7; ++f) {
            size_t comma = line.find(',', pos);
            const std::string cell = line.substr(pos, comma == std::string::npos
                                                          ? std::string::npos
                                                          : comma - pos);
            try {
                *fields[f] = std::stod(cell);
            } catch (const std::exception&) {
                throw IoError("bad numeric cell '" + cell + "' in " + path.string());
            }
            if (f < 6) {
                if (comma == std::string::npos) {
                    throw IoError("expected 7 columns in " + path.string());
                }
                pos = comma + 1;
            }
        }
        event.series.push_back(r);
    }
    return event;
}

void save_events(const std::filesystem::path& dir, const std::vector<LaneChangeEvent>& events,
                 uint64_t seed) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream manifest(dir / "manifest.txt");
    if (!manifest) throw IoError("cannot write manifest in " + dir.string());
    manifest << "seed=" << seed << "\n";
    manifest << "events=" << events.size() << "\n";
    for (size_t i = 0; i < events.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "driver%03d_speed%03d_%03zu.csv",
                      events[i].driver_id, events[i].speed_kmh, i);
        write_event_csv(events[i], dir / name);
        manifest << "event." << i << ".file=" << name << "\n";
        manifest << "event." << i << ".driver=" << events[i].driver_id << "\n";
        manifest << "event." << i << ".speed=" << events[i].speed_kmh << "\n";
        manifest << "event." << i << ".seed=" << derive_seed(seed, "event", i) << "\n";
    }
    if (!manifest) throw IoError("manifest write failed in " + dir.string());
}

Manifest read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.txt");
    if (!in) throw IoError("cannot read manifest in " + dir.string());
    Manifest m;
    std::string line;
    size_t count = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw IoError("bad manifest line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "seed") {
            m.seed = std::stoull(value);
        } else if (key == "events") {
            count = std::stoul(value);
            m.entries.resize(count);
        } else if (key.rfind("event.", 0) == 0) {
            const size_t dot = key.find('.', 6);
            if (dot == std::string::npos) throw IoError("bad manifest key: " + key);
            const size_t idx = std::stoul(key.substr(6, dot - 6));
            if (idx >= m.entries.size()) throw IoError("manifest index out of range: " + key);
            const std::string field = key.substr(dot + 1);
            if (field == "file") m.entries[idx].file = value;
            else if (field == "driver") m.entries[idx].driver_id = std::stoi(value);
            else if (field == "speed") m.entries[idx].speed_kmh = std::stoi(value);
            else if (field == "seed") m.entries[idx].seed = std::stoull(value);
            else throw IoError("unknown manifest field: " + key);
        } else {
            throw IoError("unknown manifest key: " + key);
        }
    }
    return m;
}

std::vector<LaneChangeEvent> load_events(const std::filesystem::path& dir) {
    const Manifest m = read_manifest(dir);
    std::vector<LaneChangeEvent> events;
    events.reserve(m.entries.size());
    for (const ManifestEntry& e : m.entries) {
        events.push_back(read_event_csv(dir / e.file, e.driver_id, e.speed_kmh));
    }
    return events;
}

} // namespace lcp
