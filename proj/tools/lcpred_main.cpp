// lcpred: lane-change behavior/trajectory forecasting runs.
//
//   lcpred generate --config run.cfg --out data/
//   lcpred train    --config run.cfg
//   lcpred evaluate --config run.cfg --set evaluation.mode=compare
//   lcpred verify

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lcp/commands.hpp"
#include "lcp/errors.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
    int64_t seed = -1;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "run configuration file");
    cmd->add_option("--set", opts.overrides, "override a config field (section.key=value)")
        ->take_all();
    cmd->add_option("--seed", opts.seed, "override the root seed");
    cmd->add_option("--out", opts.out_dir, "override the command's output directory");
}

lcp::RunConfig build_config(const CommonOpts& opts, const std::string& command) {
    lcp::RunConfig cfg;
    if (!opts.config_path.empty()) cfg = lcp::load_config(opts.config_path);
    for (const std::string& assignment : opts.overrides) cfg.set(assignment);
    if (opts.seed >= 0) cfg.set("seed=" + std::to_string(opts.seed));
    if (!opts.out_dir.empty()) {
        if (command == "generate") {
            cfg.data_dir = opts.out_dir;
        } else if (command == "train") {
            cfg.model_file = std::filesystem::path(opts.out_dir) / cfg.model_file.filename();
            cfg.history_file = std::filesystem::path(opts.out_dir) / cfg.history_file.filename();
        } else {
            cfg.report_dir = opts.out_dir;
        }
    }
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"temporal-convolution lane-change prediction"};
    app.require_subcommand(1);

    CommonOpts gen_opts, train_opts, eval_opts;
    CLI::App* gen = app.add_subcommand("generate", "write the synthetic event dataset");
    add_common(gen, gen_opts);
    CLI::App* tr = app.add_subcommand("train", "train the configured model");
    add_common(tr, train_opts);
    CLI::App* ev = app.add_subcommand("evaluate", "run the configured evaluation mode");
    add_common(ev, eval_opts);
    app.add_subcommand("verify", "run the built-in verification suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return lcp::cmd_generate(build_config(gen_opts, "generate"), std::cout);
        if (tr->parsed()) return lcp::cmd_train(build_config(train_opts, "train"), std::cout);
        if (ev->parsed()) return lcp::cmd_evaluate(build_config(eval_opts, "evaluate"), std::cout);
        return lcp::cmd_verify(std::cout) == 0 ? 0 : 1;
    } catch (const lcp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 3;
    }
}
