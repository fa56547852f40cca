#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gex/diagnostics.hpp"
#include "gex/ingest.hpp"
#include "gex/marginal.hpp"

namespace gex {

struct RunInput {
    std::string path;
    int run_id = 1;
};

struct BootstrapConfig {
    int reps = 500;
    std::size_t m_sim = 100000;  // per-replicate cloud size
    double level = 0.95;
};

struct CtqConfig {
    double q1 = 1.7;  // raw-scale threshold, all sites exceed
    double q2 = 5.7;  // raw-scale threshold, at least m2 sites exceed
    double q3 = 5.0;  // raw-scale threshold, m3 sites over run3 consecutive days
    int m2 = 6;
    int m3 = 3;
    int run3 = 2;
};

struct DiagConfig {
    int reps = 500;               // bootstrap band resamples
    std::size_t chi_m_sim = 100000;
    int chi_bins = 15;
};

struct PipelineConfig {
    std::vector<RunInput> runs;
    double tau = 0.8;
    double u_chi = 0.99;
    double quantile_level = 0.8;  // marginal GPD threshold level
    std::size_t m_sim = 1000000;
    int block_len = 4;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    bool do_deform = true;
    bool do_preprocess = true;
    bool export_cloud = false;
    int harmonics = 2;
    int lags = 3;
    int threads = 0;
    double sim_k = 1.0;  // extrapolation level of the standalone simulate stage
    KGrid k_grid;
    BootstrapConfig bootstrap;
    CtqConfig ctq;
    DiagConfig diag;
};

PipelineConfig load_config(const std::string& path);
void validate_config(const PipelineConfig& cfg);

enum class Stage {
    Preprocess,
    Margins,
    Deform,
    Fit,
    Diagnose,
    Simulate,
    EstimateCtq,
    Report
};

const char* stage_name(Stage s);
Stage parse_stage(const std::string& name);

struct StageResult {
    bool skipped = false;
    std::string artifact;
};

// Resumable stage runner. Each stage writes a JSON artifact embedding a hash
// of the config and of its input files; a stage is skipped when the artifact
// exists and that hash is unchanged.
class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg);

    StageResult run_stage(Stage stage, std::size_t run_index);
    // All stages for all runs, then the report. Returns artifact directory.
    std::string run_all();

    std::string run_dir(std::size_t run_index) const;
    const PipelineConfig& config() const { return cfg_; }

private:
    PipelineConfig cfg_;
    std::string config_hash_;

    std::uint64_t stage_seed(Stage stage, int run_id) const;
    std::string stage_hash(Stage stage, std::size_t run_index) const;
    bool up_to_date(const std::string& artifact, const std::string& hash) const;

    void do_preprocess(std::size_t run_index, const std::string& hash);
    void do_margins(std::size_t run_index, const std::string& hash);
    void do_deform(std::size_t run_index, const std::string& hash);
    void do_fit(std::size_t run_index, const std::string& hash);
    void do_diagnose(std::size_t run_index, const std::string& hash);
    void do_simulate(std::size_t run_index, const std::string& hash);
    void do_estimate(std::size_t run_index, const std::string& hash);
    void do_report(const std::string& hash);
};

// FNV-1a 64-bit, hex string.
std::string fnv1a_hex(const std::string& bytes);
std::string hash_file(const std::string& path);

}  // namespace gex
