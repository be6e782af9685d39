#include "viseff/visibility.hpp"

#include <algorithm>

#include "viseff/common.hpp"

namespace viseff::visibility {

std::vector<VisibilitySummary> author_visibility(const corpus::Dataset& ds) {
    std::vector<VisibilitySummary> out;
    out.reserve(ds.posts_by_author.size());
    // iterate authors in sorted order for stable output
    std::vector<std::string> authors;
    authors.reserve(ds.posts_by_author.size());
    for (const auto& [id, idxs] : ds.posts_by_author) {
        (void)idxs;
        authors.push_back(id);
    }
    std::sort(authors.begin(), authors.end());

    for (const auto& id : authors) {
        const auto& idxs = ds.posts_by_author.at(id);
        VisibilitySummary s;
        s.author_id = id;
        s.post_count = idxs.size();
        std::vector<double> per_post;
        per_post.reserve(idxs.size());
        for (size_t i : idxs) {
            const int64_t v = ds.posts[i].interactions.total();
            s.total_interactions += v;
            per_post.push_back(static_cast<double>(v));
        }
        s.v_ip = static_cast<double>(s.total_interactions) / static_cast<double>(s.post_count);
        std::sort(per_post.begin(), per_post.end());
        s.percentile_25 = quantile_sorted(per_post, 0.25);
        s.percentile_50 = quantile_sorted(per_post, 0.50);
        s.percentile_75 = quantile_sorted(per_post, 0.75);
        if (const auto* leg = ds.find_legislator(id)) {
            if (leg->follower_count && *leg->follower_count > 0) {
                const double f = static_cast<double>(*leg->follower_count);
                s.v_if = static_cast<double>(s.total_interactions) / f;
                s.v_ipf = static_cast<double>(s.total_interactions) /
                          (static_cast<double>(s.post_count) * f);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::unordered_map<std::string, double> rolling_baseline(const corpus::Dataset& ds,
                                                         const std::vector<size_t>& author_posts,
                                                         int w_days) {
    std::unordered_map<std::string, double> out;
    out.reserve(author_posts.size());
    const int64_t w = static_cast<int64_t>(w_days) * 86400;

    // Sliding window over the author's timestamp-sorted posts; `window` is a
    // sorted multiset of interaction totals kept as a vector.
    std::vector<double> window;
    size_t lo = 0;  // first index still inside the window
    for (size_t k = 0; k < author_posts.size(); ++k) {
        const auto& post = ds.posts[author_posts[k]];
        const int64_t t = post.timestamp;
        // evict posts with timestamp < t - w
        while (lo < k) {
            const auto& old = ds.posts[author_posts[lo]];
            if (old.timestamp >= t - w) break;
            const double v = static_cast<double>(old.interactions.total());
            auto it = std::lower_bound(window.begin(), window.end(), v);
            window.erase(it);
            ++lo;
        }
        // posts between lo and k-1 with timestamp == t must be excluded
        // (window is strictly before t); they were inserted when processed
        double baseline = 0.0;
        size_t same_instant = 0;
        for (size_t j = k; j-- > lo;) {
            if (ds.posts[author_posts[j]].timestamp < t) break;
            ++same_instant;
        }
        if (window.size() > same_instant) {
            if (same_instant == 0) {
                baseline = quantile_sorted(window, 0.5);
            } else {
                // rebuild without same-instant posts (rare path)
                std::vector<double> strict;
                strict.reserve(window.size() - same_instant);
                for (size_t j = lo; j < k; ++j) {
                    const auto& pr = ds.posts[author_posts[j]];
                    if (pr.timestamp < t)
                        strict.push_back(static_cast<double>(pr.interactions.total()));
                }
                std::sort(strict.begin(), strict.end());
                if (!strict.empty()) baseline = quantile_sorted(strict, 0.5);
            }
        }
        out.emplace(post.post_id, baseline);
        // insert current post for subsequent windows
        const double v = static_cast<double>(post.interactions.total());
        window.insert(std::upper_bound(window.begin(), window.end(), v), v);
    }
    return out;
}

std::vector<OverperformingOutcome> overperforming(const corpus::Dataset& ds, int w_days,
                                                  double thres_a, double thres_b) {
    if (thres_a <= 0.0 || thres_b <= 0.0)
        throw std::invalid_argument("overperforming threshold must be > 0");
    std::vector<OverperformingOutcome> out;
    out.reserve(ds.posts.size());

    std::vector<std::string> authors;
    authors.reserve(ds.posts_by_author.size());
    for (const auto& [id, idxs] : ds.posts_by_author) {
        (void)idxs;
        authors.push_back(id);
    }
    std::sort(authors.begin(), authors.end());

    for (const auto& id : authors) {
        const auto& idxs = ds.posts_by_author.at(id);
        // The baseline window is per platform: an author's posts on one
        // platform never feed the other's rolling median.
        std::vector<size_t> by_platform[2];
        for (size_t i : idxs)
            by_platform[ds.posts[i].platform == corpus::Platform::A ? 0 : 1].push_back(i);
        for (int pl = 0; pl < 2; ++pl) {
            if (by_platform[pl].empty()) continue;
            const double thres = pl == 0 ? thres_a : thres_b;
            auto baselines = rolling_baseline(ds, by_platform[pl], w_days);
            for (size_t i : by_platform[pl]) {
                const auto& p = ds.posts[i];
                OverperformingOutcome o;
                o.post_id = p.post_id;
                o.baseline = baselines.at(p.post_id);
                o.score = static_cast<double>(p.interactions.total()) / (o.baseline + thres);
                o.overperforms = o.score > 1.0;
                out.push_back(std::move(o));
            }
        }
    }
    return out;
}

std::map<std::string, double> network_visibility(const corpus::FollowerGraph& graph,
                                                 const std::vector<VisibilitySummary>& summaries) {
    std::unordered_map<std::string, double> vis;
    for (const auto& s : summaries) vis.emplace(s.author_id, s.v_ip);
    // in-neighbors of u: sources of edges src -> u
    std::map<std::string, std::vector<double>> incoming;
    for (const auto& [src, dst] : graph.edges) {
        auto it = vis.find(src);
        if (it != vis.end()) incoming[dst].push_back(it->second);
    }
    std::map<std::string, double> out;
    for (const auto& s : summaries) {
        auto it = incoming.find(s.author_id);
        out[s.author_id] = it == incoming.end() ? 0.0 : median(it->second);
    }
    return out;
}

}  // namespace viseff::visibility
