#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "lcp/data.hpp"
#include "lcp/errors.hpp"

using namespace lcp;

namespace {

GeneratorConfig small_config(uint64_t seed = 0) {
    GeneratorConfig cfg;
    cfg.drivers = 6;
    cfg.seed = seed;
    return cfg;
}

// Hand-made event for windowing tests: length n, smooth distinct features.
LaneChangeEvent synthetic_event(int64_t n, int driver = 0, int speed = 60) {
    LaneChangeEvent e;
    e.driver_id = driver;
    e.speed_kmh = speed;
    e.series.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        StepRecord& r = e.series[static_cast<size_t>(i)];
        r.alpha = std::sin(0.05 * static_cast<double>(i + driver));
        r.x = static_cast<double>(i) * 0.3 + driver;
        r.y = std::cos(0.02 * static_cast<double>(i));
        r.dx = 30.0 - 0.01 * static_cast<double>(i);
        r.dy = -r.y;
        r.dv = std::sin(0.11 * static_cast<double>(i) + 1.0);
    }
    return e;
}

// Brute-force window enumeration: counts offsets where both windows fit.
int64_t enumerate_windows(int64_t n, int L, int T) {
    int64_t count = 0;
    for (int64_t j = 0;; ++j) {
        if (j + L + T > n) break;
        ++count;
    }
    return count;
}

const std::vector<FeatureId> kBehaviorInputs = {FeatureId::kAlpha};
const FeatureSelection kJoint;

} // namespace

TEST_CASE("generated events honor the lane-change invariants") {
    std::vector<LaneChangeEvent> events = generate_events(small_config());
    CHECK(events.size() == 18); // 6 drivers x 3 speeds
    for (const LaneChangeEvent& e : events) {
        std::string why;
        CHECK_MESSAGE(event_invariants_ok(e, &why), why);
        CHECK(std::fabs((e.series.back().y - e.series.front().y) - 3.5) < 1e-9);
    }
}

TEST_CASE("default corpus: 141 events, all long enough, plausible lengths") {
    GeneratorConfig cfg; // 47 drivers x 3 speeds
    std::vector<LaneChangeEvent> events = generate_events(cfg);
    CHECK(events.size() == 141);
    double mean_len = 0.0;
    for (const LaneChangeEvent& e : events) {
        CHECK(e.size() >= kMinEventSamples);
        mean_len += static_cast<double>(e.size());
    }
    mean_len /= static_cast<double>(events.size());
    // lead-in (~1 s) + maneuver (~5 s) + lead-out (~1 s) at 60 Hz.
    CHECK(mean_len > 380.0);
    CHECK(mean_len < 460.0);
}

TEST_CASE("generator invariants hold across 1e4 seeded draws") {
    GeneratorConfig cfg;
    Rng driver_rng(7);
    int checked = 0;
    for (int i = 0; i < 10000; ++i) {
        const DriverParams driver = draw_driver_params(cfg, driver_rng);
        Rng event_rng = make_stream(99, "event", static_cast<uint64_t>(i));
        const int speed = cfg.speeds_kmh[static_cast<size_t>(i % 3)];
        LaneChangeEvent e = generate_synthetic_event(driver, speed, cfg, event_rng);
        std::string why;
        if (!event_invariants_ok(e, &why)) {
            CAPTURE(i);
            FAIL_CHECK(why);
        }
        ++checked;
    }
    CHECK(checked == 10000);
}

TEST_CASE("noise-free steering angle tracks the curvature profile") {
    GeneratorConfig cfg;
    cfg.alpha_noise_deg = 0.0;
    cfg.speed_jitter = 0.0;
    DriverParams driver; // unit gain/noise scales
    Rng rng(31);
    LaneChangeEvent e = generate_synthetic_event(driver, 60, cfg, rng);

    int64_t first = -1, last = -1;
    for (int64_t i = 0; i < e.size(); ++i) {
        if (e.series[static_cast<size_t>(i)].alpha != 0.0) {
            if (first < 0) first = i;
            last = i;
        }
    }
    REQUIRE(first > 0);
    REQUIRE(last > first);
    // Outside the maneuver the wheel is exactly straight.
    for (int64_t i = 0; i < first; ++i) CHECK(e.series[static_cast<size_t>(i)].alpha == 0.0);
    for (int64_t i = last + 1; i < e.size(); ++i) CHECK(e.series[static_cast<size_t>(i)].alpha == 0.0);

    // Reconstruct alpha from the lateral profile: cos(pi*tau/T) = 1 - 2y/w.
    const double w = cfg.lane_width_m;
    const double t_lc = static_cast<double>(last - first + 1) * e.dt;
    const double v0 = 60.0 / 3.6;
    const double scale = cfg.steering_gain * 0.5 * w * (3.14159265358979323846 / t_lc) *
                         (3.14159265358979323846 / t_lc) / (v0 * v0);
    double peak = 0.0;
    for (int64_t i = first; i <= last; ++i) {
        peak = std::max(peak, std::fabs(e.series[static_cast<size_t>(i)].alpha));
    }
    for (int64_t i = first; i <= last; ++i) {
        const StepRecord& r = e.series[static_cast<size_t>(i)];
        const double predicted = scale * (1.0 - 2.0 * r.y / w);
        CHECK(std::fabs(r.alpha - predicted) <= 0.02 * peak);
    }
    // Odd symmetry about the maneuver midpoint.
    for (int64_t k = 0; k <= (last - first) / 2; k += 7) {
        const double a = e.series[static_cast<size_t>(first + k)].alpha;
        const double b = e.series[static_cast<size_t>(last - k)].alpha;
        CHECK(std::fabs(a + b) <= 0.02 * peak);
    }
}

TEST_CASE("generator rejects unknown speeds and is seed-deterministic") {
    GeneratorConfig cfg = small_config();
    DriverParams driver;
    Rng rng(1);
    CHECK_THROWS_AS(generate_synthetic_event(driver, 70, cfg, rng), ParameterError);

    std::vector<LaneChangeEvent> a = generate_events(small_config(5));
    std::vector<LaneChangeEvent> b = generate_events(small_config(5));
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].size() == b[i].size());
        for (int64_t j = 0; j < a[i].size(); ++j) {
            CHECK(a[i].series[static_cast<size_t>(j)].alpha ==
                  b[i].series[static_cast<size_t>(j)].alpha);
            CHECK(a[i].series[static_cast<size_t>(j)].x ==
                  b[i].series[static_cast<size_t>(j)].x);
        }
    }
    std::vector<LaneChangeEvent> c = generate_events(small_config(6));
    bool any_different = false;
    for (int64_t j = 0; j < std::min(a[0].size(), c[0].size()); ++j) {
        any_different = any_different || a[0].series[static_cast<size_t>(j)].alpha !=
                                             c[0].series[static_cast<size_t>(j)].alpha;
    }
    CHECK(any_different);
}

TEST_CASE("minmax fit: examples and the degenerate-feature error") {
    LaneChangeEvent e = synthetic_event(4);
    e.series[0].alpha = 0.0;
    e.series[1].alpha = 5.0;
    e.series[2].alpha = 10.0;
    e.series[3].alpha = 7.0; // target-only step, outside input coverage
    MinMaxStats stats = minmax_fit({e}, 3, 1, kBehaviorInputs);
    CHECK(stats.min_of(FeatureId::kAlpha) == 0.0);
    CHECK(stats.max_of(FeatureId::kAlpha) == 10.0);

    // Single-window set: extrema of that window.
    LaneChangeEvent single = synthetic_event(5);
    MinMaxStats s1 = minmax_fit({single}, 3, 2, {FeatureId::kX});
    CHECK(s1.min_of(FeatureId::kX) == single.series[0].x);
    CHECK(s1.max_of(FeatureId::kX) == single.series[2].x);

    LaneChangeEvent constant = synthetic_event(10);
    for (StepRecord& r : constant.series) r.alpha = 2.5;
    CHECK_THROWS_AS(minmax_fit({constant}, 3, 1, kBehaviorInputs), ParameterError);
}

TEST_CASE("normalization: formula, endpoints, exact round-trip") {
    CHECK(normalize_value(0.0, 0.0, 10.0) == 0.0);
    CHECK(normalize_value(5.0, 0.0, 10.0) == 0.5);
    CHECK(normalize_value(10.0, 0.0, 10.0) == 1.0);

    Rng rng(41);
    for (int i = 0; i < 1000; ++i) {
        const double lo = rng.uniform(-50.0, 50.0);
        const double hi = lo + rng.uniform(0.5, 100.0);
        const double v = rng.uniform(lo - 20.0, hi + 20.0);
        CHECK(std::fabs(denormalize_value(normalize_value(v, lo, hi), lo, hi) - v) <= 1e-12);
    }
    CHECK_THROWS_AS(normalize_value(1.0, 3.0, 3.0), ParameterError);
}

TEST_CASE("window counts: formula, enumeration, boundaries") {
    LaneChangeEvent e224 = synthetic_event(224);
    WindowedDataset ds = slide_windows({e224}, 10, 1, kJoint);
    CHECK(ds.size() == 214);
    CHECK(window_count(224, 10, 1) == 214);

    // Exactly one window when L + T == n.
    WindowedDataset one = slide_windows({synthetic_event(40)}, 30, 10, kJoint);
    CHECK(one.size() == 1);

    // Short events are skipped with a warning count, not fatal.
    std::vector<LaneChangeEvent> mixed = {synthetic_event(8), synthetic_event(60)};
    WindowedDataset skipped = slide_windows(mixed, 30, 10, kJoint);
    CHECK(skipped.skipped_events() == 1);
    CHECK(skipped.size() == window_count(60, 30, 10));

    // Formula equals brute-force enumeration across the full grid.
    Rng rng(43);
    for (int L : {10, 30, 50, 80, 100}) {
        for (int T : {1, 10, 30, 50, 80, 100}) {
            for (int round = 0; round < 4; ++round) {
                const int64_t n = 100 + rng.uniform_int(500);
                CHECK(window_count(n, L, T) == enumerate_windows(n, L, T));
            }
        }
    }
    CHECK_THROWS_AS(slide_windows(mixed, 0, 1, kJoint), ParameterError);
}

TEST_CASE("window counting identity behind the published sample sizes") {
    // With a fixed event set, count(L1,T1) - count(L2,T2) depends only on the
    // window geometry: N_events * ((L2+T2) - (L1+T1)). The published behavior
    // sample sizes obey it with 46 events: 22574 - 21240 = 46 * 29.
    CHECK(22574 - 21240 == 46 * 29);

    GeneratorConfig cfg;
    cfg.drivers = 46;
    cfg.speeds_kmh = {60};
    std::vector<LaneChangeEvent> events = generate_events(cfg);
    REQUIRE(events.size() == 46);
    auto total = [&](int L, int T) {
        int64_t c = 0;
        for (const LaneChangeEvent& e : events) c += window_count(e.size(), L, T);
        return c;
    };
    CHECK(total(10, 1) - total(30, 10) == 46 * 29);
    CHECK(total(10, 1) - total(30, 10) == 22574 - 21240);
    // And the dataset sizes agree with the formula totals.
    CHECK(slide_windows(events, 10, 1, kJoint).size() == total(10, 1));
    CHECK(slide_windows(events, 30, 10, kJoint).size() == total(30, 10));
}

TEST_CASE("normalized training inputs live exactly in [0,1]") {
    std::vector<LaneChangeEvent> events = generate_events(small_config(3));
    DatasetBundle bundle = split_by_driver(events, 20, 5, kJoint, 3);
    auto scan = [&](const WindowedDataset& ds) {
        for (int64_t i = 0; i < ds.size(); ++i) {
            Tensor in = ds.input(i);
            for (int64_t j = 0; j < in.numel(); ++j) {
                CHECK(in[j] >= 0.0);
                CHECK(in[j] <= 1.0);
            }
        }
    };
    scan(bundle.train);
    scan(bundle.val);
    // Round trip through the stats reproduces raw feature values.
    const MinMaxStats& stats = bundle.stats;
    for (size_t f = 0; f < stats.features.size(); ++f) {
        const double raw = 0.37 * (static_cast<double>(f) + 1.0);
        const double norm = normalize_value(raw, stats.mins[f], stats.maxs[f]);
        CHECK(std::fabs(denormalize_value(norm, stats.mins[f], stats.maxs[f]) - raw) <= 1e-12);
    }
}

TEST_CASE("split by driver: proportions, determinism, disjointness") {
    std::vector<LaneChangeEvent> events = generate_events(small_config(9));
    REQUIRE(events.size() == 18); // 3 events per driver
    DatasetBundle bundle = split_by_driver(events, 20, 5, kJoint, 11);

    // 2/3 train events per driver: 12 train-pool events, 6 test events.
    int64_t pool_expected = 0, test_expected = 0;
    {
        DatasetBundle again = split_by_driver(events, 20, 5, kJoint, 11);
        CHECK(again.train.size() == bundle.train.size());
        CHECK(again.val.size() == bundle.val.size());
        CHECK(again.test.size() == bundle.test.size());
    }
    for (const LaneChangeEvent& e : events) {
        (void)e;
    }
    pool_expected = bundle.train.size() + bundle.val.size();
    test_expected = bundle.test.size();
    CHECK(pool_expected > 0);
    CHECK(test_expected > 0);
    // Validation is exactly 20% (floor) of the training pool.
    CHECK(bundle.val.size() == pool_expected / 5);

    // Train and validation windows are disjoint slices of the pool.
    std::set<std::pair<int32_t, int32_t>> train_refs;
    for (int64_t i = 0; i < bundle.train.size(); ++i) train_refs.insert(bundle.train.window_ref(i));
    for (int64_t i = 0; i < bundle.val.size(); ++i) {
        CHECK(train_refs.count(bundle.val.window_ref(i)) == 0);
    }
    CHECK(train_refs.size() == static_cast<size_t>(bundle.train.size()));

    // Changing a test-pool event never changes the training stats: exactly
    // one of each driver's three events is held out.
    const MinMaxStats base_stats = bundle.stats;
    int unchanged = 0;
    for (size_t i = 0; i < 3; ++i) { // the three events of driver 0
        std::vector<LaneChangeEvent> modified = events;
        for (StepRecord& r : modified[i].series) r.alpha += 1000.0;
        DatasetBundle b2 = split_by_driver(modified, 20, 5, kJoint, 11);
        const bool same = b2.stats.max_of(FeatureId::kAlpha) == base_stats.max_of(FeatureId::kAlpha);
        unchanged += same ? 1 : 0;
    }
    CHECK(unchanged == 1);

    // A driver with fewer than two events cannot be split.
    std::vector<LaneChangeEvent> bad = {synthetic_event(60, 0), synthetic_event(60, 0),
                                        synthetic_event(60, 1)};
    CHECK_THROWS_AS(split_by_driver(bad, 10, 5, kJoint, 1), SplitError);
}

TEST_CASE("event CSV and manifest round-trip exactly") {
    std::vector<LaneChangeEvent> events = generate_events(small_config(13));
    const auto dir = std::filesystem::temp_directory_path() / "lcp_data_test";
    std::filesystem::remove_all(dir);
    save_events(dir, events, 13);

    Manifest manifest = read_manifest(dir);
    CHECK(manifest.seed == 13);
    REQUIRE(manifest.entries.size() == events.size());
    CHECK(manifest.entries[0].driver_id == events[0].driver_id);
    CHECK(manifest.entries[0].speed_kmh == events[0].speed_kmh);

    std::vector<LaneChangeEvent> loaded = load_events(dir);
    REQUIRE(loaded.size() == events.size());
    for (size_t i = 0; i < events.size(); ++i) {
        REQUIRE(loaded[i].size() == events[i].size());
        CHECK(loaded[i].driver_id == events[i].driver_id);
        CHECK(loaded[i].speed_kmh == events[i].speed_kmh);
        for (int64_t j = 0; j < events[i].size(); ++j) {
            const StepRecord& a = events[i].series[static_cast<size_t>(j)];
            const StepRecord& b = loaded[i].series[static_cast<size_t>(j)];
            CHECK(a.alpha == b.alpha);
            CHECK(a.x == b.x);
            CHECK(a.y == b.y);
            CHECK(a.dx == b.dx);
            CHECK(a.dy == b.dy);
            CHECK(a.dv == b.dv);
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("feature registry parses and names features") {
    CHECK(feature_from_string("alpha") == FeatureId::kAlpha);
    CHECK(feature_name(FeatureId::kDv) == "dv");
    const auto list = parse_feature_list("alpha, dx ,dy");
    CHECK(list == std::vector<FeatureId>{FeatureId::kAlpha, FeatureId::kDx, FeatureId::kDy});
    CHECK(feature_list_name(list) == "alpha+dx+dy");
    CHECK_THROWS_AS(feature_from_string("steering"), ParameterError);
    CHECK_THROWS_AS(parse_feature_list(""), ParameterError);
}
