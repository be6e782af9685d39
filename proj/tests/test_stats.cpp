#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "viseff/stats.hpp"

using namespace viseff;
using namespace viseff::stats;

namespace {

// independent U: count (x > y) pairs, half credit for ties
double u_pair_count(const std::vector<double>& x, const std::vector<double>& y) {
    double u = 0.0;
    for (double a : x)
        for (double b : y) {
            if (a > b) u += 1.0;
            else if (a == b) u += 0.5;
        }
    return u;
}

// full enumeration of group-1 assignments; counts splits at least as extreme
double exact_p_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> pooled(x);
    pooled.insert(pooled.end(), y.begin(), y.end());
    const size_t n = pooled.size(), n1 = x.size();
    const double mu = 0.5 * static_cast<double>(n1) * static_cast<double>(n - n1);
    const double dev_obs = std::fabs(u_pair_count(x, y) - mu) - 1e-9;
    std::vector<bool> mask(n, false);
    for (size_t i = 0; i < n1; ++i) mask[i] = true;
    std::sort(mask.begin(), mask.end());  // ascending: all falses first
    uint64_t hits = 0, total = 0;
    do {
        std::vector<double> gx, gy;
        for (size_t i = 0; i < n; ++i) (mask[i] ? gx : gy).push_back(pooled[i]);
        if (std::fabs(u_pair_count(gx, gy) - mu) >= dev_obs) ++hits;
        ++total;
    } while (std::next_permutation(mask.begin(), mask.end()));
    return static_cast<double>(hits) / static_cast<double>(total);
}

double ks_d_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    auto fx = ecdf(x), fy = ecdf(y);
    double d = 0.0;
    for (double v : x) d = std::max(d, std::fabs(fx(v) - fy(v)));
    for (double v : y) d = std::max(d, std::fabs(fx(v) - fy(v)));
    return d;
}

std::vector<double> random_sample(std::mt19937_64& rng, size_t n, bool ties) {
    std::vector<double> v(n);
    std::normal_distribution<double> norm(0.0, 1.0);
    for (auto& e : v) {
        e = norm(rng);
        if (ties) e = std::round(e * 2.0) / 2.0;
    }
    return v;
}

}  // namespace

TEST_CASE("midranks match the count-based definition") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 30; ++rep) {
        auto v = random_sample(rng, 1 + rng() % 20, rep % 2 == 0);
        auto r = midranks(v);
        for (size_t i = 0; i < v.size(); ++i) {
            double less = 0, equal = 0;
            for (double w : v) {
                if (w < v[i]) ++less;
                if (w == v[i]) ++equal;
            }
            CHECK(r[i] == doctest::Approx(less + (equal + 1) / 2.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("mann_whitney U equals brute-force pair counting") {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 40; ++rep) {
        auto x = random_sample(rng, 2 + rng() % 30, rep % 2 == 0);
        auto y = random_sample(rng, 2 + rng() % 30, rep % 2 == 0);
        MannWhitneyOptions opt;
        opt.bootstrap_b = 10;
        auto res = mann_whitney(x, y, opt);
        const double u = u_pair_count(x, y);
        CHECK(res.statistic == doctest::Approx(u).epsilon(1e-12));
        CHECK(res.effect_size ==
              doctest::Approx(2.0 * u / (static_cast<double>(x.size()) * y.size()) - 1.0)
                  .epsilon(1e-12));
        CHECK(res.p_value >= 0.0);
        CHECK(res.p_value <= 1.0);
        // CI brackets the point estimate by construction
        CHECK(res.ci_low <= res.effect_size);
        CHECK(res.ci_high >= res.effect_size);
    }
}

TEST_CASE("exact p equals full enumeration for every size up to 7x7") {
    std::mt19937_64 rng(5);
    MannWhitneyOptions opt;
    opt.bootstrap_b = 2;
    for (size_t n1 = 1; n1 <= 7; ++n1) {
        for (size_t n2 = 1; n2 <= 7; ++n2) {
            for (bool ties : {false, true}) {
                auto x = random_sample(rng, n1, ties);
                auto y = random_sample(rng, n2, ties);
                auto res = mann_whitney(x, y, opt);
                CHECK_MESSAGE(res.p_value == doctest::Approx(exact_p_oracle(x, y)).epsilon(1e-12),
                              "n1=", n1, " n2=", n2, " ties=", ties);
            }
        }
    }
}

TEST_CASE("extreme separation gives the smallest enumerable p") {
    // all x above all y: two tails of the permutation distribution
    std::vector<double> x{10, 11, 12, 13, 14}, y{1, 2, 3, 4, 5};
    auto res = mann_whitney(x, y, {});
    CHECK(res.statistic == 25.0);
    CHECK(res.effect_size == 1.0);
    // 2 / C(10,5)
    CHECK(res.p_value == doctest::Approx(2.0 / 252.0).epsilon(1e-12));
}

TEST_CASE("asymptotic p matches reference values") {
    // references computed with an independent implementation of the
    // tie-corrected continuity-corrected normal approximation
    std::vector<double> x{-0.0, 1.0, 0.7, 0.7, 1.6,  -1.2, -0.6,
                          -1.3, -0.1, 1.0, -0.0, 0.5, -1.9, 0.1};
    std::vector<double> y{-0.1, 2.6, 1.7, 1.7, 0.7, 1.4, 1.5, 0.5, 0.3, 0.7, 0.2, 0.2};
    MannWhitneyOptions opt;
    opt.bootstrap_b = 2;
    auto res = mann_whitney(x, y, opt);
    CHECK(res.statistic == doctest::Approx(43.0).epsilon(1e-12));
    CHECK(res.p_value == doctest::Approx(0.03672428418037049).epsilon(1e-9));

    std::vector<double> x2{1, 1, 2, 2, 2, 3, 4, 4, 5, 6, 6, 7};
    std::vector<double> y2{2, 2, 3, 3, 3, 4, 5, 5, 6, 7, 7};
    auto res2 = mann_whitney(x2, y2, opt);
    CHECK(res2.statistic == doctest::Approx(51.5).epsilon(1e-12));
    CHECK(res2.p_value == doctest::Approx(0.38330530717892275).epsilon(1e-9));
}

TEST_CASE("mann_whitney rejects empty samples and handles all-tied data") {
    CHECK_THROWS(mann_whitney({}, {1.0}));
    CHECK_THROWS(mann_whitney({1.0}, {}));
    MannWhitneyOptions opt;
    opt.bootstrap_b = 2;
    opt.exact_threshold = 4;  // force the approximation path
    std::vector<double> same(10, 3.0);
    auto res = mann_whitney(same, same, opt);
    CHECK(res.p_value == 1.0);  // zero variance short-circuits
    CHECK(res.effect_size == 0.0);
}

TEST_CASE("ks statistic equals the brute-force ECDF sup") {
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 40; ++rep) {
        auto x = random_sample(rng, 2 + rng() % 40, rep % 2 == 0);
        auto y = random_sample(rng, 2 + rng() % 40, rep % 2 == 0);
        auto res = ks_two_sample(x, y);
        CHECK(res.statistic == doctest::Approx(ks_d_oracle(x, y)).epsilon(1e-12));
    }
    // identical samples -> D = 0, p = 1
    std::vector<double> v{1, 2, 3};
    auto same = ks_two_sample(v, v);
    CHECK(same.statistic == 0.0);
    CHECK(same.p_value == 1.0);
    // disjoint supports -> D = 1
    auto disjoint = ks_two_sample({1, 2, 3}, {10, 11, 12});
    CHECK(disjoint.statistic == 1.0);
    CHECK_THROWS(ks_two_sample({}, v));
}

TEST_CASE("ks p-value reproduces the corrected asymptotic series") {
    std::mt19937_64 rng(7);
    auto x = random_sample(rng, 30, false);
    auto y = random_sample(rng, 25, false);
    auto res = ks_two_sample(x, y);
    const double ne = 30.0 * 25.0 / 55.0;
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * res.statistic;
    double p = 0.0, sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        p += sign * term;
        sign = -sign;
        if (term < 1e-12) break;
    }
    p = std::min(1.0, std::max(0.0, 2.0 * p));
    CHECK(res.p_value == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("ecdf is right-continuous with jumps at sample points") {
    auto e = ecdf({1.0, 1.0, 2.0, 5.0});
    CHECK(e.points == std::vector<double>{1.0, 2.0, 5.0});
    CHECK(e.fractions == std::vector<double>{0.5, 0.75, 1.0});
    CHECK(e(0.999) == 0.0);
    CHECK(e(1.0) == 0.5);  // right-continuous: includes the jump at 1
    CHECK(e(1.5) == 0.5);
    CHECK(e(2.0) == 0.75);
    CHECK(e(100.0) == 1.0);
    // matches the fraction-below-or-equal definition on random queries
    std::mt19937_64 rng(8);
    auto v = random_sample(rng, 50, true);
    auto f = ecdf(v);
    std::uniform_real_distribution<double> q(-3, 3);
    for (int i = 0; i < 100; ++i) {
        const double at = q(rng);
        double cnt = 0;
        for (double w : v)
            if (w <= at) ++cnt;
        CHECK(f(at) == doctest::Approx(cnt / v.size()).epsilon(1e-12));
    }
}

TEST_CASE("spearman equals Pearson on midranks") {
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        const size_t n = 3 + rng() % 30;
        auto x = random_sample(rng, n, rep % 2 == 0);
        auto y = random_sample(rng, n, rep % 2 == 0);
        auto rx = midranks(x);
        auto ry = midranks(y);
        double mx = 0, my = 0;
        for (size_t i = 0; i < n; ++i) {
            mx += rx[i];
            my += ry[i];
        }
        mx /= n;
        my /= n;
        double sxy = 0, sxx = 0, syy = 0;
        for (size_t i = 0; i < n; ++i) {
            sxy += (rx[i] - mx) * (ry[i] - my);
            sxx += (rx[i] - mx) * (rx[i] - mx);
            syy += (ry[i] - my) * (ry[i] - my);
        }
        if (sxx == 0 || syy == 0) continue;
        CHECK(spearman(x, y) == doctest::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-12));
    }
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {8, 6, 4, 2}) == doctest::Approx(-1.0));
    CHECK_THROWS(spearman({1, 2}, {1}));
    CHECK_THROWS(spearman({1, 1, 1}, {1, 2, 3}));
}

TEST_CASE("bootstrap_ci is deterministic and sane") {
    auto mean0 = [](const std::vector<std::vector<double>>& s) {
        double m = 0;
        for (double v : s[0]) m += v;
        return m / static_cast<double>(s[0].size());
    };
    std::mt19937_64 rng(10);
    auto v = random_sample(rng, 200, false);
    auto a = bootstrap_ci(mean0, {v}, 500, 42);
    auto b = bootstrap_ci(mean0, {v}, 500, 42);
    CHECK(a == b);
    auto c = bootstrap_ci(mean0, {v}, 500, 43);
    CHECK(a != c);  // seed matters
    CHECK(a.first < a.second);
    // a constant sample has a degenerate interval
    auto d = bootstrap_ci(mean0, {std::vector<double>(20, 7.0)}, 100, 1);
    CHECK(d.first == 7.0);
    CHECK(d.second == 7.0);
    CHECK_THROWS(bootstrap_ci(mean0, {v}, 0, 1));
    CHECK_THROWS(bootstrap_ci(mean0, {{}}, 10, 1));
}

TEST_CASE("p_stars thresholds") {
    CHECK(p_stars(0.0005) == "***");
    CHECK(p_stars(0.001) == "**");  // boundary is strict
    CHECK(p_stars(0.005) == "**");
    CHECK(p_stars(0.01) == "*");
    CHECK(p_stars(0.04) == "*");
    CHECK(p_stars(0.05) == ".");
    CHECK(p_stars(0.099) == ".");
    CHECK(p_stars(0.1).empty());
    CHECK(p_stars(0.9).empty());
}

namespace {

visibility::VisibilitySummary vsum(const std::string& id, double vip, size_t posts) {
    visibility::VisibilitySummary s;
    s.author_id = id;
    s.v_ip = vip;
    s.percentile_25 = vip - 1;
    s.percentile_50 = vip;
    s.percentile_75 = vip + 1;
    s.post_count = posts;
    return s;
}

corpus::LegislatorRecord leg(const std::string& id, corpus::Party p, corpus::Gender g,
                             corpus::Ethnicity e) {
    corpus::LegislatorRecord l;
    l.author_id = id;
    l.party = p;
    l.gender = g;
    l.ethnicity = e;
    return l;
}

}  // namespace

TEST_CASE("split_groups applies the documented membership rules") {
    using corpus::Ethnicity;
    using corpus::Gender;
    using corpus::Party;
    std::vector<visibility::VisibilitySummary> vs{
        vsum("rep1", 10, 5), vsum("dem1", 20, 10), vsum("oth1", 30, 20), vsum("unk", 40, 40)};
    std::unordered_map<std::string, corpus::LegislatorRecord> legs;
    legs["rep1"] = leg("rep1", Party::Rep, Gender::Men, Ethnicity::White);
    legs["dem1"] = leg("dem1", Party::Dem, Gender::Women, Ethnicity::NonWhite);
    legs["oth1"] = leg("oth1", Party::Other, Gender::Unknown, Ethnicity::Unknown);
    // "unk" is missing from the table entirely

    auto [rep, dem] = split_groups(vs, legs, Grouping::Party, DependentVariable::VIP);
    CHECK(rep == std::vector<double>{10});
    CHECK(dem == std::vector<double>{20});  // Other and unknown excluded

    auto [men, women] = split_groups(vs, legs, Grouping::Gender, DependentVariable::P50);
    CHECK(men == std::vector<double>{10});
    CHECK(women == std::vector<double>{20});

    auto [white, nonwhite] = split_groups(vs, legs, Grouping::Ethnicity, DependentVariable::P75);
    CHECK(white == std::vector<double>{11});
    CHECK(nonwhite == std::vector<double>{21});

    // posting frequency splits at the median post count, <= goes to group 1,
    // and authors missing from the table still count
    auto [low, high] = split_groups(vs, legs, Grouping::PostingFreq, DependentVariable::VIP);
    CHECK(low == std::vector<double>{10, 20});   // counts 5, 10 <= median 15
    CHECK(high == std::vector<double>{30, 40});  // 20, 40 above

    CHECK_THROWS(group_compare({vsum("only", 1, 1)}, legs, Grouping::Party, DependentVariable::VIP));
}

TEST_CASE("group_compare runs the test on the split") {
    using corpus::Ethnicity;
    using corpus::Gender;
    using corpus::Party;
    std::vector<visibility::VisibilitySummary> vs;
    std::unordered_map<std::string, corpus::LegislatorRecord> legs;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> lo(0.0, 1.0), hi(2.0, 1.0);
    for (int i = 0; i < 12; ++i) {
        const std::string rid = "r" + std::to_string(i), did = "d" + std::to_string(i);
        vs.push_back(vsum(rid, hi(rng), 5));
        vs.push_back(vsum(did, lo(rng), 5));
        legs[rid] = leg(rid, Party::Rep, Gender::Men, Ethnicity::White);
        legs[did] = leg(did, Party::Dem, Gender::Women, Ethnicity::NonWhite);
    }
    MannWhitneyOptions opt;
    opt.bootstrap_b = 50;
    auto res = group_compare(vs, legs, Grouping::Party, DependentVariable::VIP, opt);
    auto [g1, g2] = split_groups(vs, legs, Grouping::Party, DependentVariable::VIP);
    auto direct = mann_whitney(g1, g2, opt);
    CHECK(res.statistic == direct.statistic);
    CHECK(res.p_value == direct.p_value);
    CHECK(res.effect_size > 0);  // group 1 shifted higher
}
