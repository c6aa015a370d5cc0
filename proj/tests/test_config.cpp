#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "lcp/config.hpp"
#include "lcp/errors.hpp"

using namespace lcp;

namespace {

std::filesystem::path write_temp_config(const std::string& body) {
    const auto dir = std::filesystem::temp_directory_path() / "lcp_config_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "run.cfg";
    std::ofstream out(path);
    out << body;
    return path;
}

} // namespace

TEST_CASE("defaults describe the desk-scale reference run") {
    RunConfig cfg;
    CHECK(cfg.seed == 0);
    CHECK(cfg.generator.drivers == 47);
    CHECK(cfg.generator.speeds_kmh == std::vector<int>{60, 80, 100});
    CHECK(cfg.time_step == 30);
    CHECK(cfg.horizon == 10);
    CHECK(cfg.family == Family::kTcn);
    CHECK(cfg.levels == 4);
    CHECK(cfg.channels == 32);
    CHECK(cfg.kernel == 2);
    CHECK(cfg.dropout == 0.1);
    CHECK(cfg.learning_rate == 0.001);
    CHECK(cfg.batch_size == 64);
    CHECK(cfg.mode == EvalMode::kSingle);
    // Desk TCN receptive field covers the default window.
    CHECK(receptive_field(cfg.model_spec(Family::kTcn)) == 31);

    // An empty config file changes nothing.
    const auto path = write_temp_config("# empty\n");
    RunConfig loaded = load_config(path);
    CHECK(loaded.time_step == cfg.time_step);
    CHECK(loaded.generator.drivers == cfg.generator.drivers);
    CHECK(loaded.mode == cfg.mode);
}

TEST_CASE("config file parsing: sections, lists, global seed") {
    const auto path = write_temp_config(
        "seed = 7\n"
        "\n"
        "[generator]\n"
        "drivers = 5\n"
        "speeds = 60,80\n"
        "alpha_noise_deg = 1.5\n"
        "\n"
        "[windowing]\n"
        "time_step = 20\n"
        "horizon = 5\n"
        "inputs = alpha, dx, dy\n"
        "targets = alpha\n"
        "\n"
        "[model]\n"
        "family = rnn\n"
        "rnn_hidden = 12\n"
        "\n"
        "[training]\n"
        "epochs = 3\n"
        "\n"
        "[evaluation]\n"
        "mode = compare\n"
        "units = both\n"
        "grid_time_steps = 10, 30\n"
        "\n"
        "[paths]\n"
        "data_dir = /tmp/somewhere\n");
    RunConfig cfg = load_config(path);
    CHECK(cfg.seed == 7);
    CHECK(cfg.generator.seed == 7);
    CHECK(cfg.generator.drivers == 5);
    CHECK(cfg.generator.speeds_kmh == std::vector<int>{60, 80});
    CHECK(cfg.generator.alpha_noise_deg == 1.5);
    CHECK(cfg.time_step == 20);
    CHECK(cfg.horizon == 5);
    CHECK(cfg.inputs == std::vector<FeatureId>{FeatureId::kAlpha, FeatureId::kDx, FeatureId::kDy});
    CHECK(cfg.targets == std::vector<FeatureId>{FeatureId::kAlpha});
    CHECK(cfg.family == Family::kRnn);
    CHECK(cfg.epochs == 3);
    CHECK(cfg.mode == EvalMode::kCompare);
    CHECK(cfg.units == UnitMode::kBoth);
    CHECK(cfg.grid_time_steps == std::vector<int>{10, 30});
    CHECK(cfg.data_dir == std::filesystem::path("/tmp/somewhere"));

    // The RNN spec takes its width from rnn_hidden.
    ModelSpec spec = cfg.model_spec(Family::kRnn);
    CHECK(spec.levels == 12);
    CHECK(spec.input_dim == 3);
    CHECK(spec.output_dim == 1);
    CHECK(spec.horizon == 5);
}

TEST_CASE("unknown keys are rejected by name") {
    const auto path = write_temp_config("[evaluation]\nmodee = grid\n");
    try {
        load_config(path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("evaluation.modee") != std::string::npos);
    }

    RunConfig cfg;
    CHECK_THROWS_AS(cfg.set("training.lr=0.1"), ConfigError);
    CHECK_THROWS_AS(cfg.set("nonsense"), ConfigError);
    CHECK_THROWS_AS(cfg.set("training.epochs=abc"), ConfigError);
    CHECK_THROWS_AS(cfg.set("evaluation.mode=sideways"), ConfigError);
    CHECK_THROWS_AS(cfg.set("windowing.inputs=steering"), ParameterError);
}

TEST_CASE("command-line overrides reach nested fields") {
    RunConfig cfg;
    cfg.set("seed=99");
    cfg.set("model.family=cnn");
    cfg.set("training.learning_rate=0.01");
    cfg.set("evaluation.workers=3");
    cfg.set("paths.report_dir=out/reports");
    CHECK(cfg.seed == 99);
    CHECK(cfg.generator.seed == 99);
    CHECK(cfg.family == Family::kCnn);
    CHECK(cfg.learning_rate == 0.01);
    CHECK(cfg.workers == 3);
    CHECK(cfg.effective_workers() == 3);
    CHECK(cfg.report_dir == std::filesystem::path("out/reports"));
}
