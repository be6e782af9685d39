#pragma once
// Pipeline configuration: a TOML-subset config file, dotted-key overrides,
// canonical serialization and a stable hash that ties artifacts to the exact
// settings that produced them.

#include <cstdint>
#include <string>
#include <vector>

#include "viseff/synthgen.hpp"

namespace viseff::config {

struct PipelineConfig {
    // [paths] — empty input paths resolve to the simulate stage's outputs
    // under <out_dir>/sim, so `simulate` + `pipeline` works out of the box.
    std::string posts, legislators, edges, embeddings, domains;
    std::string out_dir = "out";

    // [params]
    int w = 14;                   // rolling window, days
    double thres_a = 10.0;        // overperforming threshold, platform A
    double thres_b = 100.0;       // overperforming threshold, platform B
    double toxicity_cutoff = 0.82;
    double caliper = 0.1;
    size_t min_words = 10;
    size_t folds = 5;
    uint64_t seed = 42;
    std::string platform = "both";      // A | B | both
    std::string treatment = "uncivil";  // uncivil | low_credible
    std::string response = "VIP";       // VIP | VIF | VIPF | P25 | P50 | P75
    size_t control_ratio = 1;           // treated:control sampling; only 1 supported
    double balance_threshold = 0.1;
    bool normalize_distance = false;
    size_t min_pairs = 30;
    size_t bootstrap_b = 2000;
    std::string window_start, window_end;  // optional ingest date filters

    // [dragonnet]
    size_t trunk_width = 200;
    size_t head_width = 100;
    double alpha = 1.0;
    double beta = 1.0;
    double lr = 1e-3;
    double momentum = 0.9;
    size_t batch_size = 64;
    size_t epochs = 30;

    // [simulate] — seed, window and thresholds are tied to the fields above
    // by normalize() so the generated outcome replication can never desync.
    synthgen::SynthConfig sim;
};

// Parses the TOML subset: [section] headers, key = value lines, '#' comments,
// quoted strings, integers, floats, booleans. Unknown keys are errors.
PipelineConfig load_config(const std::string& path);

// Applies "section.key=value" (the same keys as the file). Throws
// std::invalid_argument on unknown keys or unparsable values.
void apply_override(PipelineConfig& cfg, const std::string& dotted_key, const std::string& value);
void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& key_eq_value);

// Copies the shared knobs into cfg.sim and range-checks everything; throws
// std::invalid_argument with the offending key on bad values.
void normalize_and_validate(PipelineConfig& cfg);

// Stable "section.key = value" listing of every effective setting, sorted.
std::string canonical(const PipelineConfig& cfg);

// 16 hex digits of FNV-1a over canonical(cfg).
std::string config_hash(const PipelineConfig& cfg);

// Input paths with empty entries resolved to <out_dir>/sim defaults.
struct InputPaths {
    std::string posts, legislators, edges, embeddings, domains;
};
InputPaths input_paths(const PipelineConfig& cfg);

}  // namespace viseff::config
