#pragma once
// Per-author visibility metrics and the rolling-window overperforming
// outcome.

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "viseff/corpus.hpp"

namespace viseff::visibility {

struct VisibilitySummary {
    std::string author_id;
    size_t post_count = 0;
    int64_t total_interactions = 0;
    double v_ip = 0.0;                  // interactions per post
    std::optional<double> v_if;         // interactions per follower
    std::optional<double> v_ipf;        // per post and follower
    double percentile_25 = 0.0;
    double percentile_50 = 0.0;
    double percentile_75 = 0.0;
};

struct OverperformingOutcome {
    std::string post_id;
    double baseline = 0.0;  // rolling median of prior-window interactions
    double score = 0.0;
    bool overperforms = false;
};

// Aggregates per author; percentiles are over the author's per-post
// interaction totals. V_IF / V_IPF only when a positive follower count is
// known.
std::vector<VisibilitySummary> author_visibility(const corpus::Dataset& ds);

// For each post of one author (given as indices into ds.posts, timestamp
// ascending), the median of total interactions over posts in
// [t - w_days*86400, t), strictly before t. Empty window -> 0. Callers pass
// one platform's posts at a time; windows never span platforms.
std::unordered_map<std::string, double> rolling_baseline(const corpus::Dataset& ds,
                                                         const std::vector<size_t>& author_posts,
                                                         int w_days);

// score = v / (baseline + thres); overperforms <=> score > 1 (strict).
std::vector<OverperformingOutcome> overperforming(const corpus::Dataset& ds, int w_days,
                                                  double thres_a, double thres_b);

// Median visibility (v_ip) of an author's in-neighbors (their followers) in
// the follower graph; authors without in-neighbors get 0.
std::map<std::string, double> network_visibility(const corpus::FollowerGraph& graph,
                                                 const std::vector<VisibilitySummary>& summaries);

}  // namespace viseff::visibility
