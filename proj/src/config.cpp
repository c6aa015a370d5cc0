#include "lcp/config.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "lcp/errors.hpp"

namespace lcp {

namespace {

std::string trim(const std::string& s) {
    const size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("bad integer '" + item + "' for " + key);
        }
    }
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

int parse_int(const std::string& value, const std::string& key) {
    try {
        size_t pos = 0;
        const int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad integer '" + value + "' for " + key);
    }
}

uint64_t parse_u64(const std::string& value, const std::string& key) {
    try {
        size_t pos = 0;
        const uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad seed '" + value + "' for " + key);
    }
}

double parse_double(const std::string& value, const std::string& key) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad number '" + value + "' for " + key);
    }
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("bad boolean '" + value + "' for " + key);
}

} // namespace

void RunConfig::set(const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("expected section.key=value, got '" + assignment + "'");
    }
    const std::string key = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));

    if (key == "seed") { seed = parse_u64(value, key); generator.seed = seed; return; }

    if (key == "generator.drivers") { generator.drivers = parse_int(value, key); return; }
    if (key == "generator.speeds") { generator.speeds_kmh = parse_int_list(value, key); return; }
    if (key == "generator.events_per_driver") { generator.events_per_driver = parse_int(value, key); return; }
    if (key == "generator.duration_mean_s") { generator.duration_mean_s = parse_double(value, key); return; }
    if (key == "generator.duration_sd_s") { generator.duration_sd_s = parse_double(value, key); return; }
    if (key == "generator.lead_in_s") { generator.lead_in_s = parse_double(value, key); return; }
    if (key == "generator.lead_out_s") { generator.lead_out_s = parse_double(value, key); return; }
    if (key == "generator.lead_gap_m") { generator.lead_gap_m = parse_double(value, key); return; }
    if (key == "generator.lane_width_m") { generator.lane_width_m = parse_double(value, key); return; }
    if (key == "generator.steering_gain") { generator.steering_gain = parse_double(value, key); return; }
    if (key == "generator.alpha_noise_deg") { generator.alpha_noise_deg = parse_double(value, key); return; }
    if (key == "generator.alpha_noise_rho") { generator.alpha_noise_rho = parse_double(value, key); return; }
    if (key == "generator.speed_jitter") { generator.speed_jitter = parse_double(value, key); return; }
    if (key == "generator.dx_noise_m") { generator.dx_noise_m = parse_double(value, key); return; }
    if (key == "generator.dy_noise_m") { generator.dy_noise_m = parse_double(value, key); return; }
    if (key == "generator.dv_noise") { generator.dv_noise = parse_double(value, key); return; }

    if (key == "windowing.time_step") { time_step = parse_int(value, key); return; }
    if (key == "windowing.horizon") { horizon = parse_int(value, key); return; }
    if (key == "windowing.inputs") { inputs = parse_feature_list(value); return; }
    if (key == "windowing.targets") { targets = parse_feature_list(value); return; }

    if (key == "model.family") { family = family_from_string(value); return; }
    if (key == "model.levels") { levels = parse_int(value, key); return; }
    if (key == "model.channels") { channels = parse_int(value, key); return; }
    if (key == "model.kernel") { kernel = parse_int(value, key); return; }
    if (key == "model.dropout") { dropout = parse_double(value, key); return; }
    if (key == "model.rnn_hidden") { rnn_hidden = parse_int(value, key); return; }

    if (key == "training.epochs") { epochs = parse_int(value, key); return; }
    if (key == "training.batch_size") { batch_size = parse_int(value, key); return; }
    if (key == "training.learning_rate") { learning_rate = parse_double(value, key); return; }
    if (key == "training.patience") { patience = parse_int(value, key); return; }
    if (key == "training.max_windows_per_epoch") { max_windows_per_epoch = parse_int(value, key); return; }

    if (key == "evaluation.mode") {
        if (value == "single") mode = EvalMode::kSingle;
        else if (value == "compare") mode = EvalMode::kCompare;
        else if (value == "grid") mode = EvalMode::kGrid;
        else if (value == "timing") mode = EvalMode::kTiming;
        else if (value == "ablation") mode = EvalMode::kAblation;
        else if (value == "scenario") mode = EvalMode::kScenario;
        else throw ConfigError("unknown evaluation mode: " + value);
        return;
    }
    if (key == "evaluation.units") {
        if (value == "normalized") units = UnitMode::kNormalized;
        else if (value == "physical") units = UnitMode::kPhysical;
        else if (value == "both") units = UnitMode::kBoth;
        else throw ConfigError("unknown unit mode: " + value);
        return;
    }
    if (key == "evaluation.scenario") { scenario = parse_int(value, key); return; }
    if (key == "evaluation.grid_time_steps") { grid_time_steps = parse_int_list(value, key); return; }
    if (key == "evaluation.grid_horizons") { grid_horizons = parse_int_list(value, key); return; }
    if (key == "evaluation.trend_horizons") { trend_horizons = parse_int_list(value, key); return; }
    if (key == "evaluation.trend_seeds") { trend_seeds = parse_int(value, key); return; }
    if (key == "evaluation.timing_time_steps") { timing_time_steps = parse_int_list(value, key); return; }
    if (key == "evaluation.timing_horizon") { timing_horizon = parse_int(value, key); return; }
    if (key == "evaluation.timing_repetitions") { timing_repetitions = parse_int(value, key); return; }
    if (key == "evaluation.timing_max_windows") { timing_max_windows = parse_int(value, key); return; }
    if (key == "evaluation.ablation_base") { ablation_base = parse_feature_list(value); return; }
    if (key == "evaluation.ablation_candidates") { ablation_candidates = parse_feature_list(value); return; }
    if (key == "evaluation.ablation_direction") {
        if (value == "leave_one_out") ablation_direction = AblationDirection::kLeaveOneOut;
        else if (value == "add_one_in") ablation_direction = AblationDirection::kAddOneIn;
        else if (value == "both") ablation_direction = AblationDirection::kBoth;
        else throw ConfigError("unknown ablation direction: " + value);
        return;
    }
    if (key == "evaluation.scenario_speeds") { scenario_speeds = parse_int_list(value, key); return; }
    if (key == "evaluation.workers") { workers = parse_int(value, key); return; }
    if (key == "evaluation.dump_predictions") { dump_predictions = parse_bool(value, key); return; }

    if (key == "paths.data_dir") { data_dir = value; return; }
    if (key == "paths.model_file") { model_file = value; return; }
    if (key == "paths.history_file") { history_file = value; return; }
    if (key == "paths.report_dir") { report_dir = value; return; }

    throw ConfigError("unknown config key: " + key);
}

ModelSpec RunConfig::model_spec(Family f) const {
    ModelSpec spec;
    spec.family = f;
    spec.input_dim = static_cast<int>(inputs.size());
    spec.output_dim = static_cast<int>(targets.size());
    spec.horizon = horizon;
    spec.levels = f == Family::kRnn ? rnn_hidden : levels;
    spec.channels = channels;
    spec.kernel = kernel;
    spec.dropout = dropout;
    return spec;
}

int RunConfig::effective_workers() const {
    if (workers > 0) return workers;
    const unsigned n = std::thread::hardware_concurrency();
    return n > 0 ? static_cast<int>(n) : 1;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file: " + path.string());
    RunConfig cfg;
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": bad section header " + t);
            }
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected key = value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        try {
            cfg.set(full + "=" + value);
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

std::string eval_mode_name(EvalMode mode) {
    switch (mode) {
    case EvalMode::kSingle: return "single";
    case EvalMode::kCompare: return "compare";
    case EvalMode::kGrid: return "grid";
    case EvalMode::kTiming: return "timing";
    case EvalMode::kAblation: return "ablation";
    case EvalMode::kScenario: return "scenario";
    }
    return "?";
}

} // namespace lcp
