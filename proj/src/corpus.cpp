#include "viseff/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "viseff/common.hpp"

using nlohmann::json;

namespace viseff::corpus {

const char* to_string(Platform p) { return p == Platform::A ? "A" : "B"; }
const char* to_string(Party p) {
    switch (p) {
        case Party::Dem: return "Dem";
        case Party::Rep: return "Rep";
        default: return "Other";
    }
}
const char* to_string(Gender g) {
    switch (g) {
        case Gender::Men: return "Men";
        case Gender::Women: return "Women";
        default: return "Unknown";
    }
}
const char* to_string(Ethnicity e) {
    switch (e) {
        case Ethnicity::White: return "White";
        case Ethnicity::NonWhite: return "NonWhite";
        default: return "Unknown";
    }
}

Platform platform_from_string(const std::string& s) {
    if (s == "A") return Platform::A;
    if (s == "B") return Platform::B;
    throw std::runtime_error("unknown platform '" + s + "' (expected A or B)");
}

namespace {

Party parse_party(const std::string& s) {
    if (s == "Dem" || s == "D" || s == "Democrat" || s == "Democratic") return Party::Dem;
    if (s == "Rep" || s == "R" || s == "Republican") return Party::Rep;
    return Party::Other;
}

Gender parse_gender(const std::string& s) {
    if (s == "Men" || s == "M" || s == "Man" || s == "Male") return Gender::Men;
    if (s == "Women" || s == "W" || s == "F" || s == "Woman" || s == "Female") return Gender::Women;
    return Gender::Unknown;
}

Ethnicity parse_ethnicity(const std::string& s) {
    if (s == "White") return Ethnicity::White;
    if (s == "NonWhite" || s == "Non-White" || s == "Nonwhite") return Ethnicity::NonWhite;
    return Ethnicity::Unknown;
}

[[noreturn]] void fail_line(const std::string& path, size_t lineno, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + what);
}

int64_t require_count(const json& j, const char* key, const std::string& path, size_t lineno) {
    if (!j.contains(key)) return 0;
    const auto& v = j.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        fail_line(path, lineno, std::string("interactions.") + key + " must be an integer");
    int64_t n = v.get<int64_t>();
    if (n < 0) fail_line(path, lineno, std::string("interactions.") + key + " must be >= 0");
    return n;
}

}  // namespace

std::vector<PostRecord> load_posts(const std::string& path, std::optional<Platform> expected) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open posts file: " + path);
    std::vector<PostRecord> out;
    std::unordered_set<std::string> seen;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail_line(path, lineno, std::string("malformed JSON: ") + e.what());
        }
        PostRecord p;
        try {
            for (const char* key : {"post_id", "author_id", "platform", "timestamp", "text",
                                    "interactions", "urls"})
                if (!j.contains(key)) fail_line(path, lineno, std::string("missing field ") + key);
            p.post_id = j.at("post_id").get<std::string>();
            p.author_id = j.at("author_id").get<std::string>();
            p.platform = platform_from_string(j.at("platform").get<std::string>());
            p.timestamp = parse_iso8601_utc(j.at("timestamp").get<std::string>());
            p.text = j.at("text").get<std::string>();
            const json& ia = j.at("interactions");
            if (!ia.is_object()) fail_line(path, lineno, "interactions must be an object");
            p.interactions.likes = require_count(ia, "likes", path, lineno);
            p.interactions.shares = require_count(ia, "shares", path, lineno);
            p.interactions.comments = require_count(ia, "comments", path, lineno);
            p.interactions.quotes = require_count(ia, "quotes", path, lineno);
            p.interactions.extra_reactions = require_count(ia, "extra_reactions", path, lineno);
            for (const auto& u : j.at("urls")) p.urls.push_back(u.get<std::string>());
            if (j.contains("toxicity_score") && !j.at("toxicity_score").is_null()) {
                double t = j.at("toxicity_score").get<double>();
                if (!(t >= 0.0 && t <= 1.0))
                    fail_line(path, lineno, "toxicity_score must be in [0,1]");
                p.toxicity_score = t;
            }
            if (j.contains("embedding_id") && !j.at("embedding_id").is_null())
                p.embedding_id = j.at("embedding_id").get<std::string>();
        } catch (const json::exception& e) {
            fail_line(path, lineno, std::string("bad record: ") + e.what());
        }
        if (expected && p.platform != *expected)
            fail_line(path, lineno, std::string("platform mismatch: expected ") +
                                        to_string(*expected) + ", got " + to_string(p.platform));
        if (!seen.insert(p.post_id).second)
            fail_line(path, lineno, "duplicate post_id '" + p.post_id + "'");
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<LegislatorRecord> load_legislators(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open legislators file: " + path);
    std::vector<LegislatorRecord> out;
    std::unordered_set<std::string> seen;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail_line(path, lineno, std::string("malformed JSON: ") + e.what());
        }
        LegislatorRecord r;
        try {
            if (!j.contains("author_id")) fail_line(path, lineno, "missing field author_id");
            if (!j.contains("party")) fail_line(path, lineno, "missing field party");
            if (!j.contains("state")) fail_line(path, lineno, "missing field state");
            r.author_id = j.at("author_id").get<std::string>();
            r.party = parse_party(j.at("party").get<std::string>());
            r.gender = j.contains("gender") && !j.at("gender").is_null()
                           ? parse_gender(j.at("gender").get<std::string>())
                           : Gender::Unknown;
            r.ethnicity = j.contains("ethnicity") && !j.at("ethnicity").is_null()
                              ? parse_ethnicity(j.at("ethnicity").get<std::string>())
                              : Ethnicity::Unknown;
            r.state = j.at("state").get<std::string>();
            if (j.contains("ideology") && !j.at("ideology").is_null())
                r.ideology = j.at("ideology").get<double>();
            if (j.contains("follower_count") && !j.at("follower_count").is_null()) {
                int64_t f = j.at("follower_count").get<int64_t>();
                if (f < 0) fail_line(path, lineno, "follower_count must be >= 0");
                r.follower_count = f;
            }
            if (j.contains("platforms"))
                for (const auto& p : j.at("platforms"))
                    r.accounts.insert(platform_from_string(p.get<std::string>()));
        } catch (const json::exception& e) {
            fail_line(path, lineno, std::string("bad record: ") + e.what());
        }
        if (!seen.insert(r.author_id).second)
            fail_line(path, lineno, "duplicate author_id '" + r.author_id + "'");
        out.push_back(std::move(r));
    }
    return out;
}

FollowerGraph load_edges(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open edges file: " + path);
    FollowerGraph g;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "src,dst") continue;  // optional header
        auto parts = split(line, ',');
        if (parts.size() != 2 || parts[0].empty() || parts[1].empty())
            fail_line(path, lineno, "expected 'src,dst'");
        g.edges.emplace_back(parts[0], parts[1]);
        g.nodes.insert(parts[0]);
        g.nodes.insert(parts[1]);
    }
    return g;
}

const float* EmbeddingMatrix::row_for(const std::string& id) const {
    auto it = index.find(id);
    return it == index.end() ? nullptr : row(it->second);
}

void EmbeddingMatrix::add_row(const std::string& id, const std::vector<float>& v) {
    if (v.size() != dim) throw std::runtime_error("embedding row has wrong dimension");
    if (!index.emplace(id, ids.size()).second)
        throw std::runtime_error("duplicate embedding id '" + id + "'");
    ids.push_back(id);
    data.insert(data.end(), v.begin(), v.end());
}

namespace {

EmbeddingMatrix load_embeddings_text(std::istream& in, const std::string& path) {
    EmbeddingMatrix m;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing embeddings header");
    size_t count = 0, dim = 0;
    {
        std::istringstream hs(line);
        if (!(hs >> count >> dim) || dim == 0)
            throw std::runtime_error(path + ": header must be 'count dim'");
    }
    m.dim = dim;
    m.ids.reserve(count);
    m.data.reserve(count * dim);
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (fields.size() != dim + 1)
            fail_line(path, lineno,
                      "expected id + " + std::to_string(dim) + " values, got " +
                          std::to_string(fields.size() > 0 ? fields.size() - 1 : 0));
        std::vector<float> row(dim);
        for (size_t i = 0; i < dim; ++i) {
            try {
                row[i] = std::stof(fields[i + 1]);
            } catch (const std::exception&) {
                fail_line(path, lineno, "bad float '" + fields[i + 1] + "'");
            }
            if (!std::isfinite(row[i])) fail_line(path, lineno, "non-finite embedding value");
        }
        try {
            m.add_row(fields[0], row);
        } catch (const std::exception& e) {
            fail_line(path, lineno, e.what());
        }
    }
    if (m.rows() != count)
        throw std::runtime_error(path + ": header declares " + std::to_string(count) +
                                 " rows, found " + std::to_string(m.rows()));
    return m;
}

template <typename T>
T read_le(std::istream& in, const std::string& path) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
        throw std::runtime_error(path + ": truncated embeddings file");
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

EmbeddingMatrix load_embeddings_binary(std::istream& in, const std::string& path) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "EMB1", 4) != 0)
        throw std::runtime_error(path + ": bad magic, expected EMB1");
    const uint32_t count = read_le<uint32_t>(in, path);
    const uint32_t dim = read_le<uint32_t>(in, path);
    if (dim == 0) throw std::runtime_error(path + ": zero embedding dimension");
    EmbeddingMatrix m;
    m.dim = dim;
    m.ids.reserve(count);
    m.data.reserve(static_cast<size_t>(count) * dim);
    for (uint32_t r = 0; r < count; ++r) {
        const uint16_t idlen = read_le<uint16_t>(in, path);
        std::string id(idlen, '\0');
        if (!in.read(id.data(), idlen)) throw std::runtime_error(path + ": truncated id");
        std::vector<float> row(dim);
        for (uint32_t c = 0; c < dim; ++c) {
            uint32_t bits = read_le<uint32_t>(in, path);
            float f;
            std::memcpy(&f, &bits, 4);
            if (!std::isfinite(f))
                throw std::runtime_error(path + ": non-finite embedding value in row '" + id + "'");
            row[c] = f;
        }
        m.add_row(id, row);
    }
    return m;
}

}  // namespace

EmbeddingMatrix load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open embeddings file: " + path);
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    in.clear();
    in.seekg(0);
    if (std::memcmp(magic, "EMB1", 4) == 0) return load_embeddings_binary(in, path);
    return load_embeddings_text(in, path);
}

void save_embeddings_text(const EmbeddingMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write embeddings file: " + path);
    out << m.rows() << ' ' << m.dim << '\n';
    for (size_t r = 0; r < m.rows(); ++r) {
        out << m.ids[r];
        const float* row = m.row(r);
        for (size_t c = 0; c < m.dim; ++c) out << '\t' << fmt_double(row[c]);
        out << '\n';
    }
}

void save_embeddings_binary(const EmbeddingMatrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write embeddings file: " + path);
    out.write("EMB1", 4);
    write_le<uint32_t>(out, static_cast<uint32_t>(m.rows()));
    write_le<uint32_t>(out, static_cast<uint32_t>(m.dim));
    for (size_t r = 0; r < m.rows(); ++r) {
        const std::string& id = m.ids[r];
        if (id.size() > 0xffff) throw std::runtime_error("embedding id too long: " + id);
        write_le<uint16_t>(out, static_cast<uint16_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        const float* row = m.row(r);
        for (size_t c = 0; c < m.dim; ++c) {
            uint32_t bits;
            std::memcpy(&bits, &row[c], 4);
            write_le<uint32_t>(out, bits);
        }
    }
}

std::set<std::string> load_domain_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open domain list: " + path);
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.pop_back();
        size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        std::string d = line.substr(start);
        std::transform(d.begin(), d.end(), d.begin(), [](unsigned char c) { return std::tolower(c); });
        out.insert(d);
    }
    return out;
}

std::map<std::string, double> in_degree_centrality(const FollowerGraph& graph) {
    std::map<std::string, double> out;
    for (const auto& n : graph.nodes) out[n] = 0.0;
    const size_t n = graph.nodes.size();
    if (n < 2) return out;
    std::map<std::string, size_t> indeg;
    for (const auto& [src, dst] : graph.edges) {
        (void)src;
        ++indeg[dst];
    }
    const double denom = static_cast<double>(n - 1);
    for (const auto& [node, deg] : indeg) out[node] = static_cast<double>(deg) / denom;
    return out;
}

const LegislatorRecord* Dataset::find_legislator(const std::string& id) const {
    auto it = legislators.find(id);
    return it == legislators.end() ? nullptr : &it->second;
}

Dataset build_dataset(std::vector<PostRecord> posts, std::vector<LegislatorRecord> legislators,
                      FollowerGraph graph, EmbeddingMatrix embeddings,
                      std::optional<int64_t> window_start, std::optional<int64_t> window_end) {
    Dataset ds;
    ds.report.posts_loaded = posts.size();
    ds.report.legislators = legislators.size();
    for (auto& l : legislators) ds.legislators.emplace(l.author_id, std::move(l));

    for (auto& p : posts) {
        if (!ds.legislators.count(p.author_id)) {
            ++ds.report.excluded_unresolved_author;
            continue;
        }
        if ((window_start && p.timestamp < *window_start) ||
            (window_end && p.timestamp > *window_end)) {
            ++ds.report.excluded_outside_window;
            continue;
        }
        ds.posts.push_back(std::move(p));
    }
    std::sort(ds.posts.begin(), ds.posts.end(), [](const PostRecord& a, const PostRecord& b) {
        if (a.author_id != b.author_id) return a.author_id < b.author_id;
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        return a.post_id < b.post_id;
    });
    ds.report.posts_kept = ds.posts.size();
    for (size_t i = 0; i < ds.posts.size(); ++i)
        ds.posts_by_author[ds.posts[i].author_id].push_back(i);

    ds.report.edges_loaded = graph.edges.size();
    FollowerGraph kept;
    for (auto& [src, dst] : graph.edges) {
        if (src == dst) {
            ++ds.report.edges_dropped_self_loop;
            continue;
        }
        if (!ds.legislators.count(src) || !ds.legislators.count(dst)) {
            ++ds.report.edges_dropped_unknown_endpoint;
            continue;
        }
        kept.edges.emplace_back(src, dst);
        kept.nodes.insert(src);
        kept.nodes.insert(dst);
    }
    // centrality is over all known legislators, not only those with edges
    for (const auto& [id, rec] : ds.legislators) {
        (void)rec;
        kept.nodes.insert(id);
    }
    ds.graph = std::move(kept);
    ds.embeddings = std::move(embeddings);
    return ds;
}

}  // namespace viseff::corpus
