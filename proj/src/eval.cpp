#include "lcp/eval.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <thread>

#include "lcp/errors.hpp"

namespace lcp {

namespace {

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

double mae_metric(const Tensor& y_hat, const Tensor& y) {
    if (y_hat.rank() != 3 || !y_hat.same_shape(y)) {
        throw ShapeError("mae_metric expects matching [N x T x D] tensors");
    }
    const double denom = static_cast<double>(y_hat.dim(0)) * static_cast<double>(y_hat.dim(1));
    const double* hp = y_hat.data().data();
    const double* yp = y.data().data();
    double sae = 0.0;
    for (int64_t i = 0, n = y_hat.numel(); i < n; ++i) sae += std::fabs(hp[i] - yp[i]);
    return sae / denom;
}

double relative_improvement(double base_mse, double candidate_mse) {
    if (!(base_mse > 0.0)) throw ParameterError("relative_improvement: base MSE must be > 0");
    return (base_mse - candidate_mse) / base_mse;
}

Metrics evaluate(const Model& model, const WindowedDataset& test_set, bool denormalize,
                 PredictionDump* dump) {
    const ModelSpec& spec = model.spec();
    if (test_set.size() == 0) throw ParameterError("evaluate: empty test set");
    if (test_set.input_dim() != spec.input_dim || test_set.output_dim() != spec.output_dim ||
        test_set.horizon() != spec.horizon) {
        throw ParameterError("evaluate: dataset windows (L=" + std::to_string(test_set.time_step()) +
                             ", T=" + std::to_string(test_set.horizon()) +
                             ") do not match the model spec");
    }
    const int64_t dout = spec.output_dim, horizon = spec.horizon;
    std::vector<double> sse(static_cast<size_t>(dout), 0.0);
    std::vector<double> sae(static_cast<size_t>(dout), 0.0);
    std::vector<std::pair<double, double>> ranges;
    for (int64_t d = 0; d < dout; ++d) ranges.push_back(test_set.target_range(static_cast<int>(d)));

    for (int64_t i = 0; i < test_set.size(); ++i) {
        Tensor y_hat = model.predict(test_set.input(i));
        Tensor y = test_set.target(i);
        for (int64_t t = 0; t < horizon; ++t) {
            for (int64_t d = 0; d < dout; ++d) {
                double a = y(t, d), p = y_hat(t, d);
                if (denormalize) {
                    a = denormalize_value(a, ranges[static_cast<size_t>(d)].first,
                                          ranges[static_cast<size_t>(d)].second);
                    p = denormalize_value(p, ranges[static_cast<size_t>(d)].first,
                                          ranges[static_cast<size_t>(d)].second);
                }
                const double e = p - a;
                sse[static_cast<size_t>(d)] += e * e;
                sae[static_cast<size_t>(d)] += std::fabs(e);
                if (dump) {
                    dump->rows.push_back({i, static_cast<int>(t),
                                          feature_name(test_set.target_features()[static_cast<size_t>(d)]),
                                          a, p});
                }
            }
        }
    }

    Metrics m;
    m.windows = test_set.size();
    const double tn = static_cast<double>(horizon) * static_cast<double>(test_set.size());
    double mse_sum = 0.0, mae_sum = 0.0;
    for (int64_t d = 0; d < dout; ++d) {
        const double var_mse = sse[static_cast<size_t>(d)] / tn;
        m.per_variable_mse.push_back(var_mse);
        mse_sum += var_mse;
        mae_sum += sae[static_cast<size_t>(d)] / tn;
    }
    m.mse = mse_sum / static_cast<double>(dout);
    m.mae = mae_sum / static_cast<double>(dout);
    return m;
}

void PredictionDump::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write prediction dump: " + path.string());
    out << "window,step,variable,actual,predicted\n";
    for (const Row& r : rows) {
        out << r.window << ',' << r.step << ',' << r.variable << ',' << g17(r.actual) << ','
            << g17(r.predicted) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Report container
// ---------------------------------------------------------------------------

void EvalReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path.string());
    out << "model,horizon,time_step,scenario,features,seed,windows,mse,mae,us_per_step\n";
    for (const EvalRow& r : rows_) {
        out << r.key.model << ',' << r.key.horizon << ',' << r.key.time_step << ','
            << r.key.scenario << ',' << r.key.feature_set << ',' << r.key.seed << ','
            << r.metrics.windows << ',' << g17(r.metrics.mse) << ',' << g17(r.metrics.mae) << ','
            << g17(r.us_per_step) << '\n';
    }
}

void EvalReport::write_variables_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report: " + path.string());
    out << "model,horizon,time_step,scenario,features,seed,variable,mse\n";
    for (const EvalRow& r : rows_) {
        for (size_t d = 0; d < r.metrics.per_variable_mse.size(); ++d) {
            const std::string var =
                d < r.variable_names.size() ? r.variable_names[d] : "v" + std::to_string(d);
            out << r.key.model << ',' << r.key.horizon << ',' << r.key.time_step << ','
                << r.key.scenario << ',' << r.key.feature_set << ',' << r.key.seed << ',' << var
                << ',' << g17(r.metrics.per_variable_mse[d]) << '\n';
        }
    }
}

void EvalReport::render_text(std::ostream& out, double display_scale) const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-6s %8s %10s %9s %8s %12s %12s %12s\n", "model", "horizon",
                  "time_step", "scenario", "seed", "mse(x1e-4)", "mae(x1e-4)", "us/step");
    out << buf;
    for (const EvalRow& r : rows_) {
        std::snprintf(buf, sizeof(buf), "%-6s %8d %10d %9d %8d %12.2f %12.2f %12.1f\n",
                      r.key.model.c_str(), r.key.horizon, r.key.time_step, r.key.scenario,
                      r.key.seed, r.metrics.mse * display_scale, r.metrics.mae * display_scale,
                      r.us_per_step);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// Parallel helper
// ---------------------------------------------------------------------------

void parallel_for(int64_t n, int workers, const std::function<void(int64_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            const int64_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    const int count = static_cast<int>(std::min<int64_t>(workers, n));
    threads.reserve(static_cast<size_t>(count));
    for (int w = 0; w < count; ++w) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

GridResult grid_search(const std::vector<LaneChangeEvent>& events, const GridOptions& options) {
    if (options.time_steps.empty() || options.horizons.empty()) {
        throw ParameterError("grid_search: candidate lists must be non-empty");
    }
    GridResult result;
    result.cells.resize(options.time_steps.size() * options.horizons.size());

    auto run_cell = [&](int64_t flat) {
        const size_t ti = static_cast<size_t>(flat) / options.time_steps.size();
        const size_t li = static_cast<size_t>(flat) % options.time_steps.size();
        const int horizon = options.horizons[ti];
        const int time_step = options.time_steps[li];
        GridCell& cell = result.cells[static_cast<size_t>(flat)];
        cell.time_step = time_step;
        cell.horizon = horizon;
        for (const LaneChangeEvent& e : events) {
            cell.sample_count += window_count(e.size(), time_step, horizon);
        }
        if (cell.sample_count <= 0) {
            cell.feasible = false;
            return;
        }
        try {
            DatasetBundle bundle =
                split_by_driver(events, time_step, horizon, options.features, options.split_seed);
            if (bundle.train.size() == 0 || bundle.val.size() == 0 || bundle.test.size() == 0) {
                cell.feasible = false;
                return;
            }
            ModelSpec spec = options.base_spec;
            spec.horizon = horizon;
            spec.input_dim = static_cast<int>(options.features.inputs.size());
            spec.output_dim = static_cast<int>(options.features.targets.size());
            const uint64_t cell_key =
                static_cast<uint64_t>(horizon) * 1000u + static_cast<uint64_t>(time_step);
            Rng init = make_stream(options.train.seed, "grid.init", cell_key);
            auto model = make_model(spec, init);
            TrainConfig cfg = options.train;
            cfg.seed = derive_seed(options.train.seed, "grid.train", cell_key);
            train(*model, bundle.train, bundle.val, cfg);
            Metrics m = evaluate(*model, bundle.test, false);
            cell.test_mse = m.mse;
            cell.test_mae = m.mae;
        } catch (const ParameterError&) {
            cell.feasible = false;
        }
    };
    parallel_for(static_cast<int64_t>(result.cells.size()), options.workers, run_cell);
    result.best_time_step = select_best_time_steps(result.cells, options.horizons);
    return result;
}

std::vector<std::pair<int, int>> select_best_time_steps(const std::vector<GridCell>& cells,
                                                        const std::vector<int>& horizons) {
    std::vector<std::pair<int, int>> best;
    for (int horizon : horizons) {
        int best_l = -1;
        double best_mse = 0.0;
        for (const GridCell& cell : cells) {
            if (cell.horizon != horizon || !cell.feasible) continue;
            // Strict comparison plus the ascending sweep keeps ties at the
            // smaller time step.
            if (best_l < 0 || cell.test_mse < best_mse ||
                (cell.test_mse == best_mse && cell.time_step < best_l)) {
                best_l = cell.time_step;
                best_mse = cell.test_mse;
            }
        }
        best.emplace_back(horizon, best_l);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Timing
// ---------------------------------------------------------------------------

double time_inference_us(const Model& model, const WindowedDataset& ds, int repetitions) {
    if (repetitions < 10) throw ParameterError("time_inference_us: repetitions must be >= 10");
    if (ds.size() == 0) throw ParameterError("time_inference_us: empty dataset");
    // Materialize inputs once so window extraction is not measured.
    std::vector<Tensor> inputs;
    inputs.reserve(static_cast<size_t>(ds.size()));
    for (int64_t i = 0; i < ds.size(); ++i) inputs.push_back(ds.input(i));

    volatile double sink = 0.0;
    auto pass = [&]() {
        double acc = 0.0;
        for (const Tensor& x : inputs) {
            Tensor y = model.predict(x);
            acc += y[0];
        }
        sink = acc;
    };
    pass(); // warm-up, excluded

    std::vector<double> medians;
    medians.reserve(static_cast<size_t>(repetitions));
    for (int r = 0; r < repetitions; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        pass();
        const auto t1 = std::chrono::steady_clock::now();
        const double us = std::chrono::duration<double, std::micro>(t1 - t0).count();
        medians.push_back(us / static_cast<double>(ds.size()));
    }
    std::sort(medians.begin(), medians.end());
    const size_t mid = medians.size() / 2;
    return medians.size() % 2 == 1 ? medians[mid] : 0.5 * (medians[mid - 1] + medians[mid]);
}

// ---------------------------------------------------------------------------
// Sensitivity
// ---------------------------------------------------------------------------

namespace {

uint64_t subset_key(const std::vector<FeatureId>& subset) {
    // Content-based key: equal subsets train identical models.
    uint64_t h = 14695981039346656037ULL;
    for (FeatureId f : subset) {
        h ^= static_cast<uint64_t>(f) + 1;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

std::vector<SensitivityRow> sensitivity_analysis(const std::vector<LaneChangeEvent>& events,
                                                 const SensitivityOptions& options) {
    if (options.subsets.empty()) throw ParameterError("sensitivity_analysis: no subsets");
    for (const auto& s : options.subsets) {
        if (s.empty()) throw ParameterError("sensitivity_analysis: empty feature subset");
    }
    std::vector<SensitivityRow> rows(options.subsets.size());
    auto run = [&](int64_t i) {
        const std::vector<FeatureId>& subset = options.subsets[static_cast<size_t>(i)];
        FeatureSelection features;
        features.inputs = subset;
        features.targets = options.targets;
        DatasetBundle bundle = split_by_driver(events, options.time_step, options.horizon,
                                               features, options.split_seed);
        ModelSpec spec = options.base_spec;
        spec.horizon = options.horizon;
        spec.input_dim = static_cast<int>(subset.size());
        spec.output_dim = static_cast<int>(options.targets.size());
        const uint64_t key = subset_key(subset);
        Rng init = make_stream(options.train.seed, "ablation.init", key);
        auto model = make_model(spec, init);
        TrainConfig cfg = options.train;
        cfg.seed = derive_seed(options.train.seed, "ablation.train", key);
        train(*model, bundle.train, bundle.val, cfg);
        Metrics m = evaluate(*model, bundle.test, false);
        rows[static_cast<size_t>(i)] = {subset, m.mse, m.mae};
    };
    parallel_for(static_cast<int64_t>(options.subsets.size()), options.workers, run);
    return rows;
}

// ---------------------------------------------------------------------------
// Scenario report
// ---------------------------------------------------------------------------

ScenarioReport scenario_report(const std::vector<ScenarioCell>& cells) {
    ScenarioReport report;
    report.cells = cells;
    // Collect the speeds present, keeping input order.
    std::vector<int> speeds;
    for (const ScenarioCell& c : cells) {
        if (std::find(speeds.begin(), speeds.end(), c.speed_kmh) == speeds.end()) {
            speeds.push_back(c.speed_kmh);
        }
    }
    auto find_cell = [&](Family f, int speed) -> const ScenarioCell* {
        for (const ScenarioCell& c : cells) {
            if (c.family == f && c.speed_kmh == speed && c.present) return &c;
        }
        return nullptr;
    };
    for (int speed : speeds) {
        const ScenarioCell* tcn = find_cell(Family::kTcn, speed);
        if (!tcn) continue;
        for (Family base : {Family::kRnn, Family::kCnn}) {
            const ScenarioCell* b = find_cell(base, speed);
            if (!b) continue;
            report.improvements.push_back(
                {speed, base, relative_improvement(b->metrics.mse, tcn->metrics.mse)});
        }
    }
    return report;
}

ScenarioReport run_scenario_experiment(const std::vector<LaneChangeEvent>& events,
                                       const ScenarioOptions& options) {
    std::vector<ScenarioCell> cells(options.families.size() * options.speeds.size());
    auto run = [&](int64_t flat) {
        const size_t fi = static_cast<size_t>(flat) / options.speeds.size();
        const size_t si = static_cast<size_t>(flat) % options.speeds.size();
        ScenarioCell& cell = cells[static_cast<size_t>(flat)];
        cell.family = options.families[fi];
        cell.speed_kmh = options.speeds[si];
        std::vector<LaneChangeEvent> subset;
        for (const LaneChangeEvent& e : events) {
            if (e.speed_kmh == cell.speed_kmh) subset.push_back(e);
        }
        if (subset.empty()) {
            cell.present = false;
            return;
        }
        try {
            DatasetBundle bundle = split_by_driver(subset, options.time_step, options.base_spec.horizon,
                                                   options.features, options.split_seed);
            ModelSpec spec = options.base_spec;
            spec.family = cell.family;
            if (cell.family == Family::kRnn) spec.levels = options.rnn_hidden;
            spec.input_dim = static_cast<int>(options.features.inputs.size());
            spec.output_dim = static_cast<int>(options.features.targets.size());
            const uint64_t key = static_cast<uint64_t>(cell.speed_kmh) * 10u + fi;
            Rng init = make_stream(options.train.seed, "scenario.init", key);
            auto model = make_model(spec, init);
            TrainConfig cfg = options.train;
            cfg.seed = derive_seed(options.train.seed, "scenario.train", key);
            train(*model, bundle.train, bundle.val, cfg);
            cell.metrics = evaluate(*model, bundle.test, false);
        } catch (const ParameterError&) {
            cell.present = false;
        } catch (const SplitError&) {
            cell.present = false;
        }
    };
    parallel_for(static_cast<int64_t>(cells.size()), options.workers, run);
    return scenario_report(cells);
}

} // namespace lcp
