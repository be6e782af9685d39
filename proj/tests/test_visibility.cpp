#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "viseff/common.hpp"
#include "viseff/corpus.hpp"
#include "viseff/visibility.hpp"

using namespace viseff;
using namespace viseff::corpus;
using namespace viseff::visibility;

namespace {

PostRecord make_post(const std::string& id, const std::string& author, Platform pl, int64_t ts,
                     int64_t likes) {
    PostRecord p;
    p.post_id = id;
    p.author_id = author;
    p.platform = pl;
    p.timestamp = ts;
    p.interactions.likes = likes;
    return p;
}

LegislatorRecord make_leg(const std::string& id, std::optional<int64_t> followers = {}) {
    LegislatorRecord l;
    l.author_id = id;
    l.state = "XX";
    l.follower_count = followers;
    return l;
}

// O(n^2) reference: for each post, the median of same-author same-platform
// totals with timestamp in [t - w*86400, t).
double oracle_baseline(const Dataset& ds, const PostRecord& p, int w_days) {
    const int64_t w = static_cast<int64_t>(w_days) * 86400;
    std::vector<double> prior;
    for (const auto& q : ds.posts) {
        if (q.author_id != p.author_id || q.platform != p.platform) continue;
        if (q.timestamp >= p.timestamp - w && q.timestamp < p.timestamp)
            prior.push_back(static_cast<double>(q.interactions.total()));
    }
    if (prior.empty()) return 0.0;
    return median(prior);
}

Dataset random_dataset(uint64_t seed, size_t n_authors, size_t n_posts, int64_t time_span,
                       bool duplicate_timestamps) {
    std::mt19937_64 rng(seed);
    std::vector<PostRecord> posts;
    std::vector<LegislatorRecord> legs;
    for (size_t a = 0; a < n_authors; ++a)
        legs.push_back(make_leg("a" + std::to_string(a), 100 * (a + 1)));
    std::uniform_int_distribution<int64_t> ts(0, time_span);
    std::uniform_int_distribution<int64_t> v(0, 50);
    for (size_t i = 0; i < n_posts; ++i) {
        int64_t t = ts(rng);
        if (duplicate_timestamps && i % 4 == 0) t = (t / 86400) * 86400;  // force collisions
        posts.push_back(make_post("p" + std::to_string(i), "a" + std::to_string(rng() % n_authors),
                                  rng() % 2 ? Platform::A : Platform::B, t, v(rng)));
    }
    return build_dataset(std::move(posts), std::move(legs), {}, {});
}

}  // namespace

TEST_CASE("overperforming fixed points") {
    // v=30 against baseline 5 and threshold 10 scores exactly 2
    std::vector<PostRecord> posts;
    posts.push_back(make_post("base", "a0", Platform::A, 1000, 5));
    posts.push_back(make_post("hit", "a0", Platform::A, 2000, 30));
    auto ds = build_dataset(posts, {make_leg("a0")}, {}, {});
    auto out = overperforming(ds, 14, 10.0, 100.0);
    REQUIRE(out.size() == 2);
    const auto& first = out[0].post_id == "base" ? out[0] : out[1];
    const auto& hit = out[0].post_id == "hit" ? out[0] : out[1];
    CHECK(first.baseline == 0.0);  // empty window
    CHECK(first.score == doctest::Approx(0.5));
    CHECK(hit.baseline == 5.0);
    CHECK(hit.score == 2.0);
    CHECK(hit.overperforms);
}

TEST_CASE("binarization is strict at score 1") {
    // baseline 10 + thres 10 = 20; v=20 scores exactly 1.0 and does NOT count
    std::vector<PostRecord> posts;
    posts.push_back(make_post("b", "a0", Platform::A, 1000, 10));
    posts.push_back(make_post("at1", "a0", Platform::A, 2000, 20));
    posts.push_back(make_post("above", "a0", Platform::A, 3000, 21));
    auto ds = build_dataset(posts, {make_leg("a0")}, {}, {});
    auto out = overperforming(ds, 14, 10.0, 100.0);
    for (const auto& o : out) {
        if (o.post_id == "at1") {
            CHECK(o.score == 1.0);
            CHECK(!o.overperforms);
        }
        if (o.post_id == "above") {
            CHECK(o.baseline == doctest::Approx(15.0));  // median of {10,20}
            CHECK(o.overperforms == (o.score > 1.0));
        }
    }
}

TEST_CASE("window is half-open and same-instant posts are excluded") {
    const int64_t day = 86400;
    std::vector<PostRecord> posts;
    posts.push_back(make_post("old", "a0", Platform::A, 0, 40));          // exactly w before
    posts.push_back(make_post("older", "a0", Platform::A, -1, 7));        // just outside
    posts.push_back(make_post("same1", "a0", Platform::A, 14 * day, 9));  // same instant
    posts.push_back(make_post("cur", "a0", Platform::A, 14 * day, 13));
    auto ds = build_dataset(posts, {make_leg("a0")}, {}, {});
    auto out = overperforming(ds, 14, 10.0, 100.0);
    for (const auto& o : out) {
        if (o.post_id == "cur")
            // window [0, 14d): only "old" qualifies; "older" and the
            // same-instant sibling are out
            CHECK(o.baseline == 40.0);
        if (o.post_id == "same1") CHECK(o.baseline == 40.0);
    }
}

TEST_CASE("platform windows never mix") {
    std::vector<PostRecord> posts;
    posts.push_back(make_post("a_post", "a0", Platform::A, 1000, 50));
    posts.push_back(make_post("b_post", "a0", Platform::B, 2000, 30));
    auto ds = build_dataset(posts, {make_leg("a0")}, {}, {});
    auto out = overperforming(ds, 14, 10.0, 100.0);
    for (const auto& o : out) {
        CHECK(o.baseline == 0.0);  // neither sees the other
        if (o.post_id == "b_post") CHECK(o.score == doctest::Approx(30.0 / 100.0));
    }
}

TEST_CASE("overperforming equals the quadratic oracle on randomized posts") {
    for (uint64_t seed : {1u, 2u, 3u}) {
        auto ds = random_dataset(seed, 7, 400, 40 * 86400, seed == 2);
        auto out = overperforming(ds, 14, 10.0, 100.0);
        REQUIRE(out.size() == ds.posts.size());
        std::unordered_map<std::string, const PostRecord*> by_id;
        for (const auto& p : ds.posts) by_id[p.post_id] = &p;
        for (const auto& o : out) {
            const auto& p = *by_id.at(o.post_id);
            const double b = oracle_baseline(ds, p, 14);
            const double thres = p.platform == Platform::A ? 10.0 : 100.0;
            CHECK(o.baseline == doctest::Approx(b).epsilon(1e-12));
            CHECK(o.score ==
                  doctest::Approx(static_cast<double>(p.interactions.total()) / (b + thres))
                      .epsilon(1e-12));
            CHECK(o.overperforms == (o.score > 1.0));
        }
    }
}

TEST_CASE("overperforming rejects non-positive thresholds") {
    auto ds = random_dataset(4, 2, 10, 86400, false);
    CHECK_THROWS(overperforming(ds, 14, 0.0, 100.0));
    CHECK_THROWS(overperforming(ds, 14, 10.0, -1.0));
}

TEST_CASE("author_visibility rates and percentiles") {
    std::vector<PostRecord> posts;
    // totals 2, 4, 10
    posts.push_back(make_post("p1", "a0", Platform::A, 1000, 2));
    posts.push_back(make_post("p2", "a0", Platform::A, 2000, 4));
    posts.push_back(make_post("p3", "a0", Platform::B, 3000, 10));
    posts.push_back(make_post("q1", "a1", Platform::A, 1000, 5));
    auto ds = build_dataset(posts, {make_leg("a0", 100), make_leg("a1")}, {}, {});
    auto vs = author_visibility(ds);
    REQUIRE(vs.size() == 2);
    CHECK(vs[0].author_id == "a0");  // sorted output
    CHECK(vs[0].post_count == 3);
    CHECK(vs[0].total_interactions == 16);
    CHECK(vs[0].v_ip == doctest::Approx(16.0 / 3));
    CHECK(*vs[0].v_if == doctest::Approx(16.0 / 100));
    CHECK(*vs[0].v_ipf == doctest::Approx(16.0 / 300));
    CHECK(vs[0].percentile_25 == doctest::Approx(quantile({2, 4, 10}, 0.25)));
    CHECK(vs[0].percentile_50 == 4.0);
    CHECK(vs[0].percentile_75 == doctest::Approx(quantile({2, 4, 10}, 0.75)));
    // follower count missing -> no follower-normalized rates
    CHECK(!vs[1].v_if.has_value());
    CHECK(!vs[1].v_ipf.has_value());
}

TEST_CASE("author_visibility percentiles match brute force on random data") {
    auto ds = random_dataset(9, 5, 200, 30 * 86400, true);
    auto vs = author_visibility(ds);
    for (const auto& s : vs) {
        std::vector<double> totals;
        for (size_t i : ds.posts_by_author.at(s.author_id))
            totals.push_back(static_cast<double>(ds.posts[i].interactions.total()));
        CHECK(s.percentile_25 == doctest::Approx(quantile(totals, 0.25)).epsilon(1e-12));
        CHECK(s.percentile_50 == doctest::Approx(quantile(totals, 0.50)).epsilon(1e-12));
        CHECK(s.percentile_75 == doctest::Approx(quantile(totals, 0.75)).epsilon(1e-12));
        double sum = 0;
        for (double t : totals) sum += t;
        CHECK(s.v_ip == doctest::Approx(sum / totals.size()).epsilon(1e-12));
    }
}

TEST_CASE("network_visibility is the median of in-neighbor rates") {
    std::vector<VisibilitySummary> vs(3);
    vs[0].author_id = "a";
    vs[0].v_ip = 2.0;
    vs[1].author_id = "b";
    vs[1].v_ip = 10.0;
    vs[2].author_id = "c";
    vs[2].v_ip = 6.0;
    FollowerGraph g;
    g.edges = {{"a", "c"}, {"b", "c"}, {"ghost", "c"}, {"c", "a"}};
    auto nv = network_visibility(g, vs);
    // c is followed by a (2.0), b (10.0); ghost has no summary and is skipped
    CHECK(nv.at("c") == doctest::Approx(6.0));
    CHECK(nv.at("a") == doctest::Approx(6.0));  // followed by c only
    CHECK(nv.at("b") == 0.0);                   // no in-neighbors
}
