#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gex/pipeline.hpp"

namespace {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const gex::dependency_error*>(&e)) return 4;
    if (dynamic_cast<const gex::validation_error*>(&e)) return 2;
    if (dynamic_cast<const gex::numerical_error*>(&e) ||
        dynamic_cast<const gex::fit_error*>(&e) ||
        dynamic_cast<const gex::sampling_error*>(&e))
        return 3;
    return 2;
}

const char* error_kind(const std::exception& e) {
    if (dynamic_cast<const gex::dependency_error*>(&e)) return "dependency";
    if (dynamic_cast<const gex::validation_error*>(&e)) return "validation";
    if (dynamic_cast<const gex::numerical_error*>(&e)) return "numerical";
    if (dynamic_cast<const gex::fit_error*>(&e)) return "fit";
    if (dynamic_cast<const gex::sampling_error*>(&e)) return "sampling";
    return "error";
}

struct Options {
    std::string config_path;
    int run_id = -1;            // -1: all runs
    long long seed = -1;        // -1: keep config seed
    int threads = -1;
    std::string out_dir;
};

void apply_overrides(gex::PipelineConfig& cfg, const Options& opt) {
    if (opt.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opt.seed);
    if (opt.threads >= 0) cfg.threads = opt.threads;
    if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
}

std::vector<std::size_t> selected_runs(const gex::PipelineConfig& cfg, int run_id) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cfg.runs.size(); ++i)
        if (run_id < 0 || cfg.runs[i].run_id == run_id) out.push_back(i);
    if (out.empty())
        throw gex::validation_error("no configured run with run_id " + std::to_string(run_id));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometric tail analysis pipeline for gridded daily series"};
    app.require_subcommand(1);

    Options opt;
    std::string current_stage = "startup";

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "pipeline config JSON")->required();
        sub->add_option("--run-id", opt.run_id, "restrict to one configured run");
        sub->add_option("--seed", opt.seed, "override the config seed");
        sub->add_option("--threads", opt.threads, "worker thread cap (0 = hardware)");
        sub->add_option("--out", opt.out_dir, "override the artifact directory");
    };

    const char* stage_cmds[] = {"preprocess", "margins",  "deform", "fit",
                                "diagnose",   "simulate", "estimate-ctq", "report"};
    for (const char* name : stage_cmds) add_common(app.add_subcommand(name, name));
    add_common(app.add_subcommand("run", "run every stage for every configured run"));

    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();

    try {
        gex::PipelineConfig cfg = gex::load_config(opt.config_path);
        apply_overrides(cfg, opt);
        gex::validate_config(cfg);
        gex::Pipeline pipeline(std::move(cfg));

        if (cmd == "run") {
            for (std::size_t i : selected_runs(pipeline.config(), opt.run_id)) {
                for (gex::Stage s :
                     {gex::Stage::Preprocess, gex::Stage::Margins, gex::Stage::Deform,
                      gex::Stage::Fit, gex::Stage::Diagnose, gex::Stage::Simulate,
                      gex::Stage::EstimateCtq}) {
                    current_stage = gex::stage_name(s);
                    const auto res = pipeline.run_stage(s, i);
                    std::printf("%s run %d: %s (%s)\n", gex::stage_name(s),
                                pipeline.config().runs[i].run_id,
                                res.skipped ? "up to date" : "done", res.artifact.c_str());
                }
            }
            current_stage = "report";
            const auto res = pipeline.run_stage(gex::Stage::Report, 0);
            std::printf("report: %s (%s)\n", res.skipped ? "up to date" : "done",
                        res.artifact.c_str());
        } else {
            const gex::Stage stage = gex::parse_stage(cmd);
            current_stage = cmd;
            if (stage == gex::Stage::Report) {
                const auto res = pipeline.run_stage(stage, 0);
                std::printf("report: %s (%s)\n", res.skipped ? "up to date" : "done",
                            res.artifact.c_str());
            } else {
                for (std::size_t i : selected_runs(pipeline.config(), opt.run_id)) {
                    const auto res = pipeline.run_stage(stage, i);
                    std::printf("%s run %d: %s (%s)\n", cmd.c_str(),
                                pipeline.config().runs[i].run_id,
                                res.skipped ? "up to date" : "done", res.artifact.c_str());
                }
            }
        }
    } catch (const std::exception& e) {
        const nlohmann::json record{{"stage", current_stage},
                                    {"error", error_kind(e)},
                                    {"message", e.what()}};
        std::fprintf(stderr, "%s\n", record.dump().c_str());
        return exit_code_for(e);
    }
    return 0;
}
