#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iffsm/eval.hpp"
#include "iffsm/gibbs.hpp"
#include "iffsm/simulator.hpp"

namespace iffsm {

struct InferenceConfig {
    int L = 1;
    int particles = 3000;
    // 0/0 = fixed particle count. Otherwise `particles` is a per-chain
    // budget: each sweep uses particles * M clamped to [min, max].
    int particles_min = 0;
    int particles_max = 0;
    int temper_iters = 600;
    int exploit_iters = 200;
    std::string temper_mode = "geometric"; // off | geometric | linear_db
    double sigma_start2 = 0.0; // 0 = max(10^1.2, sigma_y2)
    double temper_decay = 0.99;
    std::string slice = "power"; // power | uniform | beta
    bool systematic = false;
    int block_size = 0;       // chains per block once blockwise
    int blockwise_after = -1; // iteration index; -1 = always joint sweeps
    int map_window = 200;     // trailing samples entering the point estimate
    int snapshot_every = 0;   // 0 = no snapshots
    int max_chains = 30;

    int total_iters() const { return temper_iters + exploit_iters; }
    void validate() const;
};

struct BaselineConfig {
    bool genie_pgas = false;
    bool genie_ffbs = false;
    bool genie_bcjr = false;
    double genie_a = 0.998;
    double genie_b = 0.002;
    int genie_iters = 300;
    int genie_keep = 100;
    double state_cap = 1e6;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::string point = "run";
    std::string sweep_key; // config key varied across the preset's points
    int n_seeds = 10;
    std::uint64_t base_seed = 1;
    // Draw a channel from the tap prior, write it as a channel file next to
    // the results and run every seed against it (used when no measured
    // channel file is supplied).
    bool synth_channel = false;
    ScenarioConfig scenario;
    Hyperparams hyper;
    InferenceConfig inference;
    BaselineConfig baselines;
};

// Sectioned key = value text, '#' comments. parse accepts any subset of the
// known keys on top of defaults; serialize emits every key in canonical
// order, round-tripping bit-exactly through parse.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);
// "section.key=value"
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
// Numeric value of one config field (for sweep axes).
double config_field_value(const ExperimentConfig& cfg, const std::string& dotted_key);
// FNV-1a over the canonical serialization.
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct RunRecord {
    std::string config_hash_hex;
    int seed_index = 0;
    std::uint64_t seed = 0;
    double snr_db = 0.0;
    Metrics metrics;
    double gpgas_ser = 0.0, gffbs_ser = 0.0, gbcjr_ser = 0.0; // NaN = not run
    double runtime_s = 0.0;
    std::vector<double> loglik_trace;
    ExperimentConfig config;
};

// Fraction of differing entries between two equally shaped symbol matrices.
double symbol_error_rate(const LatentMatrices& est, const LatentMatrices& truth);

// One full run: simulate with stream (base_seed + seed_index, 0), infer with
// stream 1, run the enabled genie baselines with stream 2. Snapshots go to
// snapshot_dir when non-empty and snapshot_every is set.
RunRecord run_single(const ExperimentConfig& cfg, int seed_index,
                     const std::string& snapshot_dir = "");

void write_runrecord(const std::string& path, const RunRecord& rec);
RunRecord read_runrecord(const std::string& path);

// results.csv: one row per seed; doubles are printed with %.17g so parsing
// them back is exact; the runtime column comes last.
std::string results_csv_text(const std::vector<RunRecord>& recs);
void write_results_csv(const std::string& path, const std::vector<RunRecord>& recs);
void write_summary_json(const std::string& path, const std::vector<RunRecord>& recs);

struct Preset {
    std::string name;
    std::string description;
    std::vector<ExperimentConfig> points;
};

std::vector<std::string> preset_names();
std::string preset_description(const std::string& name);
// Throws std::invalid_argument listing the known names when unknown.
Preset make_preset(const std::string& name, bool full_scale);

} // namespace iffsm
