#include "viseff/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "viseff/common.hpp"

namespace viseff::stats {

std::vector<double> midranks(const std::vector<double>& values) {
    const size_t n = values.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average of ranks i+1..j+1
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

namespace {

// U statistic for group 1 given pooled midranks and the indices assigned to
// group 1: U = R1 - n1(n1+1)/2.
double u_from_ranks(const std::vector<double>& pooled_ranks, const std::vector<bool>& in_group1,
                    size_t n1) {
    double r1 = 0.0;
    for (size_t i = 0; i < pooled_ranks.size(); ++i)
        if (in_group1[i]) r1 += pooled_ranks[i];
    return r1 - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);
}

// Exact two-sided p: share of equally-sized relabelings whose U is at least
// as far from n1*n2/2 as the observed one.
double exact_p(const std::vector<double>& pooled_ranks, size_t n1, double u_obs) {
    const size_t n = pooled_ranks.size();
    const size_t n2 = n - n1;
    const double mu = 0.5 * static_cast<double>(n1) * static_cast<double>(n2);
    const double dev_obs = std::fabs(u_obs - mu) - 1e-9;
    // Descending mask + prev_permutation walks every n-choose-n1 subset.
    std::vector<bool> mask(n, false);
    for (size_t i = 0; i < n1; ++i) mask[i] = true;
    uint64_t hits = 0, total = 0;
    do {
        const double u = u_from_ranks(pooled_ranks, mask, n1);
        if (std::fabs(u - mu) >= dev_obs) ++hits;
        ++total;
    } while (std::prev_permutation(mask.begin(), mask.end()));
    return static_cast<double>(hits) / static_cast<double>(total);
}

double normal_approx_p(const std::vector<double>& pooled, size_t n1, size_t n2, double u_obs) {
    const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2);
    const double nn = dn1 + dn2;
    const double mu = 0.5 * dn1 * dn2;
    // Tie correction: subtract sum(t^3 - t)/(n(n-1)) from n+1.
    std::vector<double> sorted(pooled);
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    size_t i = 0;
    while (i < sorted.size()) {
        size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    const double var = dn1 * dn2 / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if (var <= 0.0) return 1.0;  // all values tied
    double diff = u_obs - mu;
    // Continuity correction shrinks |diff| by 0.5.
    if (diff > 0.5) diff -= 0.5;
    else if (diff < -0.5) diff += 0.5;
    else diff = 0.0;
    const double z = diff / std::sqrt(var);
    const double p = 2.0 * (1.0 - norm_cdf(std::fabs(z)));
    return std::min(1.0, std::max(0.0, p));
}

double rank_biserial(const std::vector<double>& x, const std::vector<double>& y) {
    // r = 2U/(n1 n2) - 1 with U the midrank-convention count of x>y pairs.
    std::vector<double> pooled(x);
    pooled.insert(pooled.end(), y.begin(), y.end());
    const auto ranks = midranks(pooled);
    double r1 = 0.0;
    for (size_t i = 0; i < x.size(); ++i) r1 += ranks[i];
    const double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size());
    const double u = r1 - 0.5 * n1 * (n1 + 1.0);
    return 2.0 * u / (n1 * n2) - 1.0;
}

}  // namespace

TestResult mann_whitney(const std::vector<double>& x, const std::vector<double>& y,
                        const MannWhitneyOptions& opt) {
    if (x.empty() || y.empty()) throw std::invalid_argument("mann_whitney: empty sample");
    const size_t n1 = x.size(), n2 = y.size();
    std::vector<double> pooled(x);
    pooled.insert(pooled.end(), y.begin(), y.end());
    const auto ranks = midranks(pooled);
    double r1 = 0.0;
    for (size_t i = 0; i < n1; ++i) r1 += ranks[i];
    const double u = r1 - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);

    TestResult res;
    res.statistic = u;
    res.n1 = n1;
    res.n2 = n2;
    res.effect_size = 2.0 * u / (static_cast<double>(n1) * static_cast<double>(n2)) - 1.0;

    if (n1 + n2 <= opt.exact_threshold) {
        res.p_value = exact_p(ranks, n1, u);
    } else {
        res.p_value = normal_approx_p(pooled, n1, n2, u);
    }

    auto stat_fn = [](const std::vector<std::vector<double>>& s) {
        return rank_biserial(s[0], s[1]);
    };
    auto [lo, hi] = bootstrap_ci(stat_fn, {x, y}, opt.bootstrap_b, opt.seed);
    // Widen to the point estimate so the CI always covers it.
    res.ci_low = std::min(lo, res.effect_size);
    res.ci_high = std::max(hi, res.effect_size);
    return res;
}

TestResult ks_two_sample(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty() || y.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::vector<double> sx(x), sy(y);
    std::sort(sx.begin(), sx.end());
    std::sort(sy.begin(), sy.end());
    const double n1 = static_cast<double>(sx.size()), n2 = static_cast<double>(sy.size());
    double d = 0.0;
    size_t i = 0, j = 0;
    while (i < sx.size() && j < sy.size()) {
        const double v = std::min(sx[i], sy[j]);
        while (i < sx.size() && sx[i] <= v) ++i;
        while (j < sy.size() && sy[j] <= v) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
    }

    const double ne = n1 * n2 / (n1 + n2);
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
    double p;
    if (lambda < 1e-3) {
        p = 1.0;
    } else {
        p = 0.0;
        double sign = 1.0;
        for (int k = 1; k <= 100; ++k) {
            const double term = std::exp(-2.0 * k * k * lambda * lambda);
            p += sign * term;
            sign = -sign;
            if (term < 1e-12) break;
        }
        p = std::min(1.0, std::max(0.0, 2.0 * p));
    }

    TestResult res;
    res.statistic = d;
    res.p_value = p;
    res.effect_size = d;
    res.ci_low = d;
    res.ci_high = d;
    res.n1 = sx.size();
    res.n2 = sy.size();
    return res;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("spearman: need at least 2 points");
    const auto rx = midranks(x);
    const auto ry = midranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double a = rx[i] - mx, b = ry[i] - my;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::invalid_argument("spearman: constant sample has no rank correlation");
    return sxy / std::sqrt(sxx * syy);
}

double Ecdf::operator()(double x) const {
    // Fraction of the sample <= x.
    auto it = std::upper_bound(points.begin(), points.end(), x);
    if (it == points.begin()) return 0.0;
    return fractions[static_cast<size_t>(it - points.begin()) - 1];
}

Ecdf ecdf(std::vector<double> sample) {
    if (sample.empty()) throw std::invalid_argument("ecdf: empty sample");
    std::sort(sample.begin(), sample.end());
    Ecdf e;
    const double n = static_cast<double>(sample.size());
    size_t i = 0;
    while (i < sample.size()) {
        size_t j = i;
        while (j + 1 < sample.size() && sample[j + 1] == sample[i]) ++j;
        e.points.push_back(sample[i]);
        e.fractions.push_back(static_cast<double>(j + 1) / n);
        i = j + 1;
    }
    return e;
}

const char* to_string(Grouping g) {
    switch (g) {
        case Grouping::Party: return "party";
        case Grouping::Gender: return "gender";
        case Grouping::Ethnicity: return "ethnicity";
        case Grouping::PostingFreq: return "posting_freq";
    }
    return "?";
}

const char* to_string(DependentVariable d) {
    switch (d) {
        case DependentVariable::VIP: return "v_ip";
        case DependentVariable::P25: return "p25";
        case DependentVariable::P50: return "p50";
        case DependentVariable::P75: return "p75";
    }
    return "?";
}

namespace {

double dv_value(const visibility::VisibilitySummary& s, DependentVariable dv) {
    switch (dv) {
        case DependentVariable::VIP: return s.v_ip;
        case DependentVariable::P25: return s.percentile_25;
        case DependentVariable::P50: return s.percentile_50;
        case DependentVariable::P75: return s.percentile_75;
    }
    return 0.0;
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> split_groups(
    const std::vector<visibility::VisibilitySummary>& summaries,
    const std::unordered_map<std::string, corpus::LegislatorRecord>& legs, Grouping grouping,
    DependentVariable dv) {
    using corpus::Ethnicity;
    using corpus::Gender;
    using corpus::Party;
    std::vector<double> g1, g2;

    if (grouping == Grouping::PostingFreq) {
        std::vector<double> counts;
        counts.reserve(summaries.size());
        for (const auto& s : summaries) counts.push_back(static_cast<double>(s.post_count));
        if (counts.empty()) return {g1, g2};
        const double med = median(counts);
        for (const auto& s : summaries) {
            const double v = dv_value(s, dv);
            if (static_cast<double>(s.post_count) <= med) g1.push_back(v);
            else g2.push_back(v);
        }
        return {g1, g2};
    }

    for (const auto& s : summaries) {
        auto it = legs.find(s.author_id);
        if (it == legs.end()) continue;
        const auto& leg = it->second;
        const double v = dv_value(s, dv);
        switch (grouping) {
            case Grouping::Party:
                if (leg.party == Party::Rep) g1.push_back(v);
                else if (leg.party == Party::Dem) g2.push_back(v);
                break;
            case Grouping::Gender:
                if (leg.gender == Gender::Men) g1.push_back(v);
                else if (leg.gender == Gender::Women) g2.push_back(v);
                break;
            case Grouping::Ethnicity:
                if (leg.ethnicity == Ethnicity::White) g1.push_back(v);
                else if (leg.ethnicity == Ethnicity::NonWhite) g2.push_back(v);
                break;
            case Grouping::PostingFreq: break;  // handled above
        }
    }
    return {g1, g2};
}

TestResult group_compare(const std::vector<visibility::VisibilitySummary>& summaries,
                         const std::unordered_map<std::string, corpus::LegislatorRecord>& legs,
                         Grouping grouping, DependentVariable dv, const MannWhitneyOptions& opt) {
    auto [g1, g2] = split_groups(summaries, legs, grouping, dv);
    if (g1.empty() || g2.empty())
        throw std::invalid_argument(std::string("group_compare: empty group for ") +
                                    to_string(grouping));
    return mann_whitney(g1, g2, opt);
}

std::pair<double, double> bootstrap_ci(
    const std::function<double(const std::vector<std::vector<double>>&)>& statistic,
    const std::vector<std::vector<double>>& samples, size_t B, uint64_t seed) {
    if (B == 0) throw std::invalid_argument("bootstrap_ci: B must be positive");
    for (const auto& s : samples)
        if (s.empty()) throw std::invalid_argument("bootstrap_ci: empty sample");

    std::vector<double> stats;
    stats.reserve(B);
    std::vector<std::vector<double>> draw(samples.size());
    for (size_t b = 0; b < B; ++b) {
        Rng rng(derive_seed(seed, "bootstrap", b));
        for (size_t s = 0; s < samples.size(); ++s) {
            const auto& src = samples[s];
            auto& dst = draw[s];
            dst.resize(src.size());
            std::uniform_int_distribution<size_t> pick(0, src.size() - 1);
            for (auto& v : dst) v = src[pick(rng)];
        }
        stats.push_back(statistic(draw));
    }
    std::sort(stats.begin(), stats.end());
    return {quantile_sorted(stats, 0.025), quantile_sorted(stats, 0.975)};
}

std::string p_stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    if (p < 0.1) return ".";
    return "";
}

}  // namespace viseff::stats
