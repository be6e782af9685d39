#pragma once
// 1:1 caliper nearest-neighbor matching on embedding vectors, standardized
// mean-difference balance diagnostics, and matched CATE with subgroups.

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "viseff/corpus.hpp"

namespace viseff::matching {

struct MatchPair {
    std::string treated_id;
    std::string control_id;
    double distance = 0.0;
};

struct MatchSet {
    std::vector<MatchPair> pairs;
    std::vector<std::string> unmatched_treated;
    double caliper = 0.1;
    bool normalized = false;
};

struct MatchOptions {
    double caliper = 0.1;
    // When set, distances are divided by the root of the pooled cloud's total
    // variance (sum of per-dimension variances over treated + control), so
    // the caliper reads as a fraction of the overall spread instead of a raw
    // Euclidean length.
    bool normalize = false;
};

// Greedy 1:1 matching without replacement: candidate pairs within the caliper
// are consumed in ascending (distance, treated_id, control_id) order, skipping
// units already used. Throws on dimension mismatch or non-positive caliper.
MatchSet match(const corpus::EmbeddingMatrix& treated, const corpus::EmbeddingMatrix& control,
               const MatchOptions& opt = {});

struct Covariates {
    std::vector<std::string> names;           // per column
    std::vector<std::string> ids;             // per row
    std::vector<std::vector<double>> values;  // per row, length names.size()
};

struct BalanceEntry {
    std::string covariate;
    double before = 0.0;
    double after = 0.0;
};

struct BalanceReport {
    std::vector<BalanceEntry> entries;
    double max_abs_before = 0.0;
    double max_abs_after = 0.0;
    bool balanced = false;  // all |after| < threshold
    double threshold = 0.1;
};

// d = (mean_T - mean_C) / sqrt((s2_T + s2_C)/2) per covariate, before (all
// units) and after (matched units only). Zero pooled variance gives d = 0
// when the means agree and +/-inf otherwise (flagged unbalanced).
BalanceReport standardized_differences(const Covariates& treated, const Covariates& control,
                                       const MatchSet& match_set, double threshold = 0.1);

enum class Subgroup { All, Dem, Rep, ExtremeDem, ExtremeRep, OverlapDem, OverlapRep };

const char* to_string(Subgroup s);

struct CateEstimate {
    Subgroup subgroup = Subgroup::All;
    double cate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    size_t n_pairs = 0;
    bool withheld = false;  // too few pairs for a reliable estimate
};

struct CateOptions {
    size_t min_pairs = 30;
    size_t bootstrap_b = 2000;
    uint64_t seed = 1;
};

// Mean of (Y_treated - Y_control) over pairs whose treated unit passes the
// filter, with a percentile-bootstrap CI over pairs. Outcomes are binary and
// keyed by unit id; a missing outcome is an error. Below min_pairs the
// estimate is withheld (fields zeroed, withheld = true, n_pairs reported).
CateEstimate matched_cate(const MatchSet& match_set,
                          const std::unordered_map<std::string, int>& outcomes,
                          const std::function<bool(const std::string& treated_id)>& filter,
                          Subgroup subgroup, const CateOptions& opt = {});

struct SubgroupMasks {
    std::set<std::string> extreme_dem;  // bottom ideology quartile
    std::set<std::string> extreme_rep;  // top ideology quartile
    std::set<std::string> overlap;      // accounts on both platforms
    bool has_ideology = false;          // false -> extreme masks empty
};

// Quartile cut points use the same linear-interpolation quantile as the rest
// of the pipeline; boundary ties are included on both sides.
SubgroupMasks subgroup_masks(
    const std::unordered_map<std::string, corpus::LegislatorRecord>& legislators);

}  // namespace viseff::matching
