#include "viseff/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include "viseff/common.hpp"
#include "viseff/kernels.hpp"

namespace viseff::matching {

namespace {

std::vector<double> to_doubles(const corpus::EmbeddingMatrix& m) {
    std::vector<double> out(m.data.size());
    for (size_t i = 0; i < m.data.size(); ++i) out[i] = static_cast<double>(m.data[i]);
    return out;
}

// Sum over dimensions of the per-dimension variance of the pooled cloud.
double total_variance(const std::vector<double>& t, const std::vector<double>& c, size_t dim) {
    const size_t nt = dim ? t.size() / dim : 0, nc = dim ? c.size() / dim : 0;
    const size_t n = nt + nc;
    if (n < 2) return 0.0;
    double tv = 0.0;
    for (size_t d = 0; d < dim; ++d) {
        double sum = 0.0, sumsq = 0.0;
        for (size_t i = 0; i < nt; ++i) {
            const double v = t[i * dim + d];
            sum += v;
            sumsq += v * v;
        }
        for (size_t i = 0; i < nc; ++i) {
            const double v = c[i * dim + d];
            sum += v;
            sumsq += v * v;
        }
        const double mean = sum / static_cast<double>(n);
        tv += std::max(0.0, sumsq / static_cast<double>(n) - mean * mean);
    }
    return tv;
}

struct Cand {
    double d;
    uint32_t control;
};

}  // namespace

MatchSet match(const corpus::EmbeddingMatrix& treated, const corpus::EmbeddingMatrix& control,
               const MatchOptions& opt) {
    if (treated.dim != control.dim)
        throw std::invalid_argument("match: embedding dimension mismatch (" +
                                    std::to_string(treated.dim) + " vs " +
                                    std::to_string(control.dim) + ")");
    if (!(opt.caliper > 0.0)) throw std::invalid_argument("match: caliper must be positive");

    MatchSet ms;
    ms.caliper = opt.caliper;
    ms.normalized = opt.normalize;
    const size_t nt = treated.rows(), nc = control.rows();
    if (nt == 0 || nc == 0) {
        ms.unmatched_treated = treated.ids;
        return ms;
    }
    const size_t dim = treated.dim;
    const auto td = to_doubles(treated);
    const auto cd = to_doubles(control);

    double scale = 1.0;
    if (opt.normalize) {
        const double tv = total_variance(td, cd, dim);
        scale = tv > 0.0 ? std::sqrt(tv) : 1.0;
    }
    const double limit2 = (opt.caliper * scale) * (opt.caliper * scale);
    const double inv_scale = 1.0 / scale;

    // Per-treated candidate lists capped at K nearest; a list that had more
    // qualifying controls than the cap is refilled by rescanning if it runs
    // dry, so the greedy result is identical to full enumeration.
    const size_t cap = 48;
    auto cand_less = [&](const Cand& a, const Cand& b) {
        if (a.d != b.d) return a.d < b.d;
        return control.ids[a.control] < control.ids[b.control];
    };
    std::vector<std::vector<Cand>> cands(nt);
    std::vector<bool> truncated(nt, false);
    std::vector<size_t> pos(nt, 0);
    std::vector<bool> control_used(nc, false);

    auto scan = [&](size_t ti, bool skip_used) {
        std::vector<Cand> list;
        const double* a = td.data() + ti * dim;
        for (size_t ci = 0; ci < nc; ++ci) {
            if (skip_used && control_used[ci]) continue;
            const double d2 = kern::sqdist(a, cd.data() + ci * dim, dim);
            if (d2 <= limit2) list.push_back({std::sqrt(d2) * inv_scale, static_cast<uint32_t>(ci)});
        }
        bool trunc = false;
        if (list.size() > cap) {
            std::nth_element(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(cap),
                             list.end(), cand_less);
            list.resize(cap);
            trunc = true;
        }
        std::sort(list.begin(), list.end(), cand_less);
        truncated[ti] = trunc;
        return list;
    };
    for (size_t ti = 0; ti < nt; ++ti) cands[ti] = scan(ti, false);

    struct HeapEntry {
        double d;
        uint32_t ti;
        uint32_t ci;
    };
    auto heap_greater = [&](const HeapEntry& a, const HeapEntry& b) {
        if (a.d != b.d) return a.d > b.d;
        if (treated.ids[a.ti] != treated.ids[b.ti]) return treated.ids[a.ti] > treated.ids[b.ti];
        return control.ids[a.ci] > control.ids[b.ci];
    };
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, decltype(heap_greater)> heap(
        heap_greater);
    std::vector<bool> matched_treated(nt, false);
    auto push_current = [&](size_t ti) {
        while (true) {
            if (pos[ti] < cands[ti].size()) {
                const auto& c = cands[ti][pos[ti]];
                if (control_used[c.control]) {
                    ++pos[ti];
                    continue;
                }
                heap.push({c.d, static_cast<uint32_t>(ti), c.control});
                return;
            }
            if (!truncated[ti]) return;  // nothing left under the caliper
            cands[ti] = scan(ti, true);
            pos[ti] = 0;
        }
    };
    for (size_t ti = 0; ti < nt; ++ti) push_current(ti);

    while (!heap.empty()) {
        const auto top = heap.top();
        heap.pop();
        if (control_used[top.ci]) {
            ++pos[top.ti];
            push_current(top.ti);
            continue;
        }
        control_used[top.ci] = true;
        matched_treated[top.ti] = true;
        ms.pairs.push_back({treated.ids[top.ti], control.ids[top.ci], top.d});
    }
    for (size_t ti = 0; ti < nt; ++ti)
        if (!matched_treated[ti]) ms.unmatched_treated.push_back(treated.ids[ti]);
    return ms;
}

namespace {

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;  // sample variance
    size_t n = 0;
};

MeanVar column_stats(const Covariates& cov, size_t col, const std::vector<bool>* keep) {
    MeanVar mv;
    double sum = 0.0;
    for (size_t i = 0; i < cov.values.size(); ++i) {
        if (keep && !(*keep)[i]) continue;
        sum += cov.values[i][col];
        ++mv.n;
    }
    if (mv.n == 0) return mv;
    mv.mean = sum / static_cast<double>(mv.n);
    double ss = 0.0;
    for (size_t i = 0; i < cov.values.size(); ++i) {
        if (keep && !(*keep)[i]) continue;
        const double d = cov.values[i][col] - mv.mean;
        ss += d * d;
    }
    mv.var = mv.n > 1 ? ss / static_cast<double>(mv.n - 1) : 0.0;
    return mv;
}

double std_diff(const MeanVar& t, const MeanVar& c) {
    const double pooled = 0.5 * (t.var + c.var);
    const double gap = t.mean - c.mean;
    if (pooled <= 0.0) {
        if (gap == 0.0) return 0.0;
        return gap > 0.0 ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
    }
    return gap / std::sqrt(pooled);
}

}  // namespace

BalanceReport standardized_differences(const Covariates& treated, const Covariates& control,
                                       const MatchSet& match_set, double threshold) {
    if (treated.names != control.names)
        throw std::invalid_argument("standardized_differences: covariate name mismatch");
    for (const auto& row : treated.values)
        if (row.size() != treated.names.size())
            throw std::invalid_argument("standardized_differences: ragged treated covariates");
    for (const auto& row : control.values)
        if (row.size() != control.names.size())
            throw std::invalid_argument("standardized_differences: ragged control covariates");

    std::unordered_map<std::string, size_t> tindex, cindex;
    for (size_t i = 0; i < treated.ids.size(); ++i) tindex[treated.ids[i]] = i;
    for (size_t i = 0; i < control.ids.size(); ++i) cindex[control.ids[i]] = i;
    std::vector<bool> tkeep(treated.ids.size(), false), ckeep(control.ids.size(), false);
    for (const auto& p : match_set.pairs) {
        auto ti = tindex.find(p.treated_id);
        auto ci = cindex.find(p.control_id);
        if (ti == tindex.end() || ci == cindex.end())
            throw std::invalid_argument("standardized_differences: pair unit missing covariates: " +
                                        p.treated_id + " / " + p.control_id);
        tkeep[ti->second] = true;
        ckeep[ci->second] = true;
    }

    BalanceReport rep;
    rep.threshold = threshold;
    rep.balanced = !match_set.pairs.empty();
    for (size_t col = 0; col < treated.names.size(); ++col) {
        BalanceEntry e;
        e.covariate = treated.names[col];
        e.before = std_diff(column_stats(treated, col, nullptr), column_stats(control, col, nullptr));
        e.after = match_set.pairs.empty()
                      ? 0.0
                      : std_diff(column_stats(treated, col, &tkeep),
                                 column_stats(control, col, &ckeep));
        rep.max_abs_before = std::max(rep.max_abs_before, std::fabs(e.before));
        rep.max_abs_after = std::max(rep.max_abs_after, std::fabs(e.after));
        if (!(std::fabs(e.after) < threshold)) rep.balanced = false;
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

const char* to_string(Subgroup s) {
    switch (s) {
        case Subgroup::All: return "All";
        case Subgroup::Dem: return "Dem";
        case Subgroup::Rep: return "Rep";
        case Subgroup::ExtremeDem: return "ExtremeDem";
        case Subgroup::ExtremeRep: return "ExtremeRep";
        case Subgroup::OverlapDem: return "OverlapDem";
        case Subgroup::OverlapRep: return "OverlapRep";
    }
    return "?";
}

CateEstimate matched_cate(const MatchSet& match_set,
                          const std::unordered_map<std::string, int>& outcomes,
                          const std::function<bool(const std::string& treated_id)>& filter,
                          Subgroup subgroup, const CateOptions& opt) {
    std::vector<double> diffs;
    for (const auto& p : match_set.pairs) {
        if (filter && !filter(p.treated_id)) continue;
        auto yt = outcomes.find(p.treated_id);
        auto yc = outcomes.find(p.control_id);
        if (yt == outcomes.end() || yc == outcomes.end())
            throw std::invalid_argument("matched_cate: missing outcome for pair " + p.treated_id +
                                        " / " + p.control_id);
        if ((yt->second != 0 && yt->second != 1) || (yc->second != 0 && yc->second != 1))
            throw std::invalid_argument("matched_cate: outcomes must be binary");
        diffs.push_back(static_cast<double>(yt->second - yc->second));
    }

    CateEstimate est;
    est.subgroup = subgroup;
    est.n_pairs = diffs.size();
    if (diffs.size() < opt.min_pairs) {
        est.withheld = true;
        return est;
    }
    double sum = 0.0;
    for (double d : diffs) sum += d;
    est.cate = sum / static_cast<double>(diffs.size());

    std::vector<double> stats;
    stats.reserve(opt.bootstrap_b);
    for (size_t b = 0; b < opt.bootstrap_b; ++b) {
        Rng rng(derive_seed(opt.seed, "cate-bootstrap", b));
        std::uniform_int_distribution<size_t> pick(0, diffs.size() - 1);
        double s = 0.0;
        for (size_t i = 0; i < diffs.size(); ++i) s += diffs[pick(rng)];
        stats.push_back(s / static_cast<double>(diffs.size()));
    }
    std::sort(stats.begin(), stats.end());
    est.ci_low = std::min(quantile_sorted(stats, 0.025), est.cate);
    est.ci_high = std::max(quantile_sorted(stats, 0.975), est.cate);
    return est;
}

SubgroupMasks subgroup_masks(
    const std::unordered_map<std::string, corpus::LegislatorRecord>& legislators) {
    SubgroupMasks masks;
    std::vector<double> scores;
    for (const auto& [id, leg] : legislators) {
        if (leg.ideology) scores.push_back(*leg.ideology);
        if (leg.accounts.count(corpus::Platform::A) && leg.accounts.count(corpus::Platform::B))
            masks.overlap.insert(id);
    }
    if (scores.empty()) return masks;  // extreme masks stay empty
    masks.has_ideology = true;
    const double q25 = quantile(scores, 0.25);
    const double q75 = quantile(scores, 0.75);
    for (const auto& [id, leg] : legislators) {
        if (!leg.ideology) continue;
        if (*leg.ideology <= q25) masks.extreme_dem.insert(id);
        if (*leg.ideology >= q75) masks.extreme_rep.insert(id);
    }
    return masks;
}

}  // namespace viseff::matching
