#pragma once
// Ingestion of posts, author records, follower edges, embeddings and label
// lists into an immutable in-memory dataset.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace viseff::corpus {

enum class Platform { A, B };  // A: Twitter-like, B: FB-like
enum class Party { Dem, Rep, Other };
enum class Gender { Men, Women, Unknown };
enum class Ethnicity { White, NonWhite, Unknown };

const char* to_string(Platform p);
const char* to_string(Party p);
const char* to_string(Gender g);
const char* to_string(Ethnicity e);
Platform platform_from_string(const std::string& s);

struct InteractionBreakdown {
    int64_t likes = 0;
    int64_t shares = 0;
    int64_t comments = 0;
    int64_t quotes = 0;
    int64_t extra_reactions = 0;

    int64_t total() const { return likes + shares + comments + quotes + extra_reactions; }
    bool operator==(const InteractionBreakdown&) const = default;
};

struct PostRecord {
    std::string post_id;
    std::string author_id;
    Platform platform = Platform::A;
    int64_t timestamp = 0;  // UTC epoch seconds
    std::string text;
    InteractionBreakdown interactions;
    std::vector<std::string> urls;
    std::optional<double> toxicity_score;
    std::optional<std::string> embedding_id;

    bool operator==(const PostRecord&) const = default;
};

struct LegislatorRecord {
    std::string author_id;
    Party party = Party::Other;
    Gender gender = Gender::Unknown;
    Ethnicity ethnicity = Ethnicity::Unknown;
    std::string state;
    std::optional<double> ideology;
    std::optional<int64_t> follower_count;
    std::set<Platform> accounts;

    bool operator==(const LegislatorRecord&) const = default;
};

struct FollowerGraph {
    // edge src -> dst means src follows dst
    std::vector<std::pair<std::string, std::string>> edges;
    std::set<std::string> nodes;

    bool operator==(const FollowerGraph&) const = default;
};

struct EmbeddingMatrix {
    size_t dim = 0;
    std::vector<std::string> ids;
    std::vector<float> data;  // row-major, ids.size() x dim
    std::unordered_map<std::string, size_t> index;

    const float* row(size_t i) const { return data.data() + i * dim; }
    const float* row_for(const std::string& id) const;
    size_t rows() const { return ids.size(); }
    void add_row(const std::string& id, const std::vector<float>& v);
    bool operator==(const EmbeddingMatrix& o) const {
        return dim == o.dim && ids == o.ids && data == o.data;
    }
};

// file loaders ---------------------------------------------------------

std::vector<PostRecord> load_posts(const std::string& path, std::optional<Platform> expected = {});
std::vector<LegislatorRecord> load_legislators(const std::string& path);
FollowerGraph load_edges(const std::string& path);
// Detects text vs binary ("EMB1" magic) automatically.
EmbeddingMatrix load_embeddings(const std::string& path);

void save_embeddings_text(const EmbeddingMatrix& m, const std::string& path);
void save_embeddings_binary(const EmbeddingMatrix& m, const std::string& path);

// One domain per line, '#' comments and blank lines allowed; lowercased.
std::set<std::string> load_domain_list(const std::string& path);

// centrality ------------------------------------------------------------

// indeg(a) / (n - 1) over known legislators; 0 when n <= 1.
std::map<std::string, double> in_degree_centrality(const FollowerGraph& graph);

// dataset ----------------------------------------------------------------

struct IngestReport {
    size_t posts_loaded = 0;
    size_t posts_kept = 0;
    size_t excluded_unresolved_author = 0;
    size_t excluded_outside_window = 0;
    size_t edges_loaded = 0;
    size_t edges_dropped_self_loop = 0;
    size_t edges_dropped_unknown_endpoint = 0;
    size_t legislators = 0;
};

// Immutable once built; downstream modules only read.
struct Dataset {
    std::vector<PostRecord> posts;  // kept posts, sorted by (author_id, timestamp, post_id)
    std::unordered_map<std::string, LegislatorRecord> legislators;
    FollowerGraph graph;
    EmbeddingMatrix embeddings;
    IngestReport report;

    // indices of each author's posts within `posts`, in timestamp order
    std::unordered_map<std::string, std::vector<size_t>> posts_by_author;

    const LegislatorRecord* find_legislator(const std::string& id) const;
};

// Validates cross-references, drops posts with unresolved authors or outside
// [window_start, window_end] (inclusive start, inclusive end), drops bad
// edges, and indexes the rest.
Dataset build_dataset(std::vector<PostRecord> posts, std::vector<LegislatorRecord> legislators,
                      FollowerGraph graph, EmbeddingMatrix embeddings,
                      std::optional<int64_t> window_start = {},
                      std::optional<int64_t> window_end = {});

}  // namespace viseff::corpus
