#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "viseff/common.hpp"
#include "viseff/corpus.hpp"

using namespace viseff;
using namespace viseff::corpus;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("viseff_corpus_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        const auto p = (path / name).string();
        write_file(p, content);
        return p;
    }
};

const char* kPostsFixture = R"(
{"post_id":"p1","author_id":"a1","platform":"A","timestamp":"2020-03-01T10:00:00Z","text":"hello world","interactions":{"likes":3,"shares":1,"comments":0,"quotes":0,"extra_reactions":0},"urls":["https://example.com/x"],"toxicity_score":0.9,"embedding_id":"e1"}
{"post_id":"p2","author_id":"a1","platform":"B","timestamp":"2020-03-02T10:00:00Z","text":"second","interactions":{"likes":0,"shares":0,"comments":2,"quotes":0,"extra_reactions":5},"urls":[]}
{"post_id":"p3","author_id":"a2","platform":"A","timestamp":"2020-02-28T10:00:00Z","text":"third","interactions":{"likes":1,"shares":0,"comments":0,"quotes":1,"extra_reactions":0},"urls":[],"toxicity_score":null}
)";

const char* kLegsFixture = R"(
{"author_id":"a1","party":"Dem","gender":"Women","ethnicity":"White","state":"CA","ideology":-0.5,"follower_count":1000,"platforms":["A","B"]}
{"author_id":"a2","party":"Rep","state":"TX","platforms":["A"]}
)";

}  // namespace

TEST_CASE("platform and attribute enums round trip") {
    CHECK(platform_from_string("A") == Platform::A);
    CHECK(platform_from_string("B") == Platform::B);
    CHECK_THROWS(platform_from_string("C"));
    CHECK(std::string(to_string(Platform::A)) == "A");
    CHECK(std::string(to_string(Party::Dem)) == "Dem");
    CHECK(std::string(to_string(Gender::Women)) == "Women");
    CHECK(std::string(to_string(Ethnicity::NonWhite)) == "NonWhite");
}

TEST_CASE("load_posts parses records and totals interactions") {
    TempDir tmp;
    auto posts = load_posts(tmp.file("posts.jsonl", kPostsFixture));
    REQUIRE(posts.size() == 3);
    CHECK(posts[0].post_id == "p1");
    CHECK(posts[0].platform == Platform::A);
    CHECK(posts[0].timestamp == parse_iso8601_utc("2020-03-01T10:00:00Z"));
    CHECK(posts[0].interactions.total() == 4);
    CHECK(posts[0].urls.size() == 1);
    CHECK(posts[0].toxicity_score == 0.9);
    CHECK(posts[0].embedding_id == "e1");
    CHECK(posts[1].interactions.total() == 7);
    CHECK(!posts[1].toxicity_score.has_value());
    CHECK(!posts[2].toxicity_score.has_value());  // explicit null
}

TEST_CASE("load_posts rejects malformed input with line numbers") {
    TempDir tmp;
    auto bad = [&](const std::string& name, const std::string& line) {
        return tmp.file(name, line + "\n");
    };
    CHECK_THROWS_WITH_AS(load_posts(bad("a.jsonl", "{not json")),
                         doctest::Contains(":1:"), std::runtime_error);
    CHECK_THROWS_WITH_AS(
        load_posts(bad("b.jsonl",
                       R"({"post_id":"x","author_id":"a","platform":"A","timestamp":"2020-01-01T00:00:00Z","text":"t","interactions":{"likes":0,"shares":0,"comments":0,"quotes":0,"extra_reactions":0}})")),
        doctest::Contains("urls"), std::runtime_error);
    CHECK_THROWS_WITH_AS(
        load_posts(bad("c.jsonl",
                       R"({"post_id":"x","author_id":"a","platform":"A","timestamp":"2020-01-01T00:00:00Z","text":"t","interactions":{"likes":0,"shares":0,"comments":0,"quotes":0,"extra_reactions":0},"urls":[],"toxicity_score":1.5})")),
        doctest::Contains("toxicity_score"), std::runtime_error);
    // duplicate ids
    const std::string rec =
        R"({"post_id":"dup","author_id":"a","platform":"A","timestamp":"2020-01-01T00:00:00Z","text":"t","interactions":{"likes":0,"shares":0,"comments":0,"quotes":0,"extra_reactions":0},"urls":[]})";
    CHECK_THROWS_WITH_AS(load_posts(tmp.file("d.jsonl", rec + "\n" + rec + "\n")),
                         doctest::Contains("duplicate"), std::runtime_error);
    // platform pinning
    auto mixed = tmp.file("e.jsonl", kPostsFixture);
    CHECK_THROWS_WITH_AS(load_posts(mixed, Platform::A), doctest::Contains("platform mismatch"),
                         std::runtime_error);
}

TEST_CASE("load_legislators optional fields and validation") {
    TempDir tmp;
    auto legs = load_legislators(tmp.file("legs.jsonl", kLegsFixture));
    REQUIRE(legs.size() == 2);
    CHECK(legs[0].party == Party::Dem);
    CHECK(legs[0].gender == Gender::Women);
    CHECK(legs[0].ideology == -0.5);
    CHECK(legs[0].follower_count == 1000);
    CHECK(legs[0].accounts == std::set<Platform>{Platform::A, Platform::B});
    CHECK(legs[1].gender == Gender::Unknown);
    CHECK(legs[1].ethnicity == Ethnicity::Unknown);
    CHECK(!legs[1].ideology.has_value());
    CHECK(!legs[1].follower_count.has_value());

    CHECK_THROWS(load_legislators(tmp.file("bad1.jsonl", R"({"author_id":"x","party":"Dem"})")));
    CHECK_THROWS(load_legislators(
        tmp.file("bad2.jsonl", R"({"author_id":"x","party":"Dem","state":"CA","follower_count":-1})")));
}

TEST_CASE("load_edges accepts optional header and rejects junk") {
    TempDir tmp;
    auto g = load_edges(tmp.file("edges.csv", "src,dst\na,b\nb,a\na,c\n"));
    CHECK(g.edges.size() == 3);
    CHECK(g.nodes == std::set<std::string>{"a", "b", "c"});
    CHECK_THROWS(load_edges(tmp.file("bad.csv", "a\n")));
    CHECK_THROWS(load_edges(tmp.file("bad2.csv", "a,b,c\n")));
}

TEST_CASE("domain list is lowercased with comments stripped") {
    TempDir tmp;
    auto d = load_domain_list(
        tmp.file("domains.txt", "# low-credibility hosts\nEvil.COM\n\n  spam.net  # trailing\n"));
    CHECK(d == std::set<std::string>{"evil.com", "spam.net"});
}

TEST_CASE("embedding text and binary formats agree") {
    TempDir tmp;
    EmbeddingMatrix m;
    m.dim = 3;
    m.add_row("e1", {1.0f, -2.5f, 0.25f});
    m.add_row("e2", {0.0f, 4.0f, 1e-3f});

    const auto tpath = (tmp.path / "emb.txt").string();
    const auto bpath = (tmp.path / "emb.bin").string();
    save_embeddings_text(m, tpath);
    save_embeddings_binary(m, bpath);
    // binary begins with the magic
    CHECK(read_file(bpath).substr(0, 4) == "EMB1");

    auto t = load_embeddings(tpath);  // format auto-detected
    auto b = load_embeddings(bpath);
    CHECK(t == m);
    CHECK(b == m);
    CHECK(t.row_for("e2")[1] == 4.0f);
    CHECK(t.row_for("nope") == nullptr);

    CHECK_THROWS(load_embeddings((tmp.path / "missing.emb").string()));
    CHECK_THROWS(load_embeddings(tmp.file("trunc.bin", "EMB1\x02")));
    CHECK_THROWS(load_embeddings(tmp.file("badhdr.txt", "hello world\n")));
}

TEST_CASE("in_degree_centrality equals brute-force degree counting") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 20; ++rep) {
        FollowerGraph g;
        const size_t n = 2 + rng() % 8;
        for (size_t i = 0; i < n; ++i) g.nodes.insert("n" + std::to_string(i));
        const size_t m = rng() % 20;
        for (size_t e = 0; e < m; ++e) {
            auto a = "n" + std::to_string(rng() % n);
            auto b = "n" + std::to_string(rng() % n);
            g.edges.emplace_back(a, b);
            g.nodes.insert(a);
            g.nodes.insert(b);
        }
        auto cent = in_degree_centrality(g);
        std::map<std::string, double> oracle;
        for (const auto& node : g.nodes) oracle[node] = 0.0;
        for (const auto& [src, dst] : g.edges) oracle[dst] += 1.0;
        for (auto& [node, v] : oracle) v /= static_cast<double>(g.nodes.size() - 1);
        CHECK(cent == oracle);
    }
    // degenerate graphs
    CHECK(in_degree_centrality(FollowerGraph{}).empty());
    FollowerGraph one;
    one.nodes.insert("solo");
    CHECK(in_degree_centrality(one).at("solo") == 0.0);
}

TEST_CASE("build_dataset filters, sorts and indexes") {
    TempDir tmp;
    auto posts = load_posts(tmp.file("posts.jsonl", kPostsFixture));
    auto legs = load_legislators(tmp.file("legs.jsonl", kLegsFixture));
    // an extra post from an unknown author
    PostRecord ghost;
    ghost.post_id = "ghost";
    ghost.author_id = "who";
    ghost.timestamp = parse_iso8601_utc("2020-03-01T00:00:00Z");
    posts.push_back(ghost);

    FollowerGraph g;
    g.edges = {{"a1", "a1"}, {"a1", "a2"}, {"a1", "zz"}};
    for (const auto& [s, d] : g.edges) {
        g.nodes.insert(s);
        g.nodes.insert(d);
    }

    auto ds = build_dataset(posts, legs, g, {}, parse_iso8601_utc("2020-03-01"),
                            parse_iso8601_utc("2020-03-31T23:59:59Z"));
    CHECK(ds.report.posts_loaded == 4);
    CHECK(ds.report.posts_kept == 2);  // p3 outside window, ghost unresolved
    CHECK(ds.report.excluded_unresolved_author == 1);
    CHECK(ds.report.excluded_outside_window == 1);
    CHECK(ds.report.edges_dropped_self_loop == 1);
    CHECK(ds.report.edges_dropped_unknown_endpoint == 1);
    CHECK(ds.graph.edges.size() == 1);
    // all legislators become graph nodes even without surviving edges
    CHECK(ds.graph.nodes.count("a2") == 1);

    // sorted by (author, timestamp, post_id) and indexed
    REQUIRE(ds.posts.size() == 2);
    CHECK(ds.posts[0].post_id == "p1");
    CHECK(ds.posts[1].post_id == "p2");
    CHECK(ds.posts_by_author.at("a1") == std::vector<size_t>{0, 1});
    CHECK(ds.find_legislator("a1") != nullptr);
    CHECK(ds.find_legislator("nope") == nullptr);

    // window bounds are inclusive on both ends
    auto ds2 = build_dataset(posts, legs, {}, {}, parse_iso8601_utc("2020-02-28T10:00:00Z"),
                             parse_iso8601_utc("2020-03-01T10:00:00Z"));
    CHECK(ds2.report.posts_kept == 2);  // p3 and p1 exactly at the bounds
}

TEST_CASE("dataset sorting breaks timestamp ties by post id") {
    std::vector<PostRecord> posts(3);
    posts[0].post_id = "z";
    posts[1].post_id = "a";
    posts[2].post_id = "m";
    for (auto& p : posts) {
        p.author_id = "a1";
        p.timestamp = 100;
    }
    LegislatorRecord leg;
    leg.author_id = "a1";
    auto ds = build_dataset(posts, {leg}, {}, {});
    CHECK(ds.posts[0].post_id == "a");
    CHECK(ds.posts[1].post_id == "m");
    CHECK(ds.posts[2].post_id == "z");
}
