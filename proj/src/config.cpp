#include "viseff/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "viseff/common.hpp"

namespace viseff::config {

namespace {

[[noreturn]] void bad(const std::string& what) { throw std::invalid_argument("config: " + what); }

std::string trim(std::string_view s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

std::string unquote(const std::string& key, const std::string& raw) {
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
        std::string out;
        for (size_t i = 1; i + 1 < raw.size(); ++i) {
            if (raw[i] == '\\' && i + 2 < raw.size() && (raw[i + 1] == '"' || raw[i + 1] == '\\'))
                ++i;
            out += raw[i];
        }
        return out;
    }
    if (raw.find('"') != std::string::npos) bad(key + ": unbalanced quotes in '" + raw + "'");
    return raw;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        bad(key + ": expected a number, got '" + v + "'");
    }
}

int64_t to_int(const std::string& key, const std::string& v) {
    int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        bad(key + ": expected an integer, got '" + v + "'");
    return out;
}

uint64_t to_uint(const std::string& key, const std::string& v) {
    uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        bad(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

size_t to_size(const std::string& key, const std::string& v) {
    return static_cast<size_t>(to_uint(key, v));
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    bad(key + ": expected true or false, got '" + v + "'");
}

void apply(PipelineConfig& c, const std::string& key, const std::string& value) {
    // paths
    if (key == "paths.posts") c.posts = value;
    else if (key == "paths.legislators") c.legislators = value;
    else if (key == "paths.edges") c.edges = value;
    else if (key == "paths.embeddings") c.embeddings = value;
    else if (key == "paths.domains") c.domains = value;
    else if (key == "paths.out_dir") c.out_dir = value;
    // params
    else if (key == "params.w") c.w = static_cast<int>(to_int(key, value));
    else if (key == "params.thres_a") c.thres_a = to_double(key, value);
    else if (key == "params.thres_b") c.thres_b = to_double(key, value);
    else if (key == "params.toxicity_cutoff") c.toxicity_cutoff = to_double(key, value);
    else if (key == "params.caliper") c.caliper = to_double(key, value);
    else if (key == "params.min_words") c.min_words = to_size(key, value);
    else if (key == "params.folds") c.folds = to_size(key, value);
    else if (key == "params.seed") c.seed = to_uint(key, value);
    else if (key == "params.platform") c.platform = value;
    else if (key == "params.treatment") c.treatment = value;
    else if (key == "params.response") c.response = value;
    else if (key == "params.control_ratio") c.control_ratio = to_size(key, value);
    else if (key == "params.balance_threshold") c.balance_threshold = to_double(key, value);
    else if (key == "params.normalize_distance") c.normalize_distance = to_bool(key, value);
    else if (key == "params.min_pairs") c.min_pairs = to_size(key, value);
    else if (key == "params.bootstrap_b") c.bootstrap_b = to_size(key, value);
    else if (key == "params.window_start") c.window_start = value;
    else if (key == "params.window_end") c.window_end = value;
    // dragonnet
    else if (key == "dragonnet.trunk_width") c.trunk_width = to_size(key, value);
    else if (key == "dragonnet.head_width") c.head_width = to_size(key, value);
    else if (key == "dragonnet.alpha") c.alpha = to_double(key, value);
    else if (key == "dragonnet.beta") c.beta = to_double(key, value);
    else if (key == "dragonnet.lr") c.lr = to_double(key, value);
    else if (key == "dragonnet.momentum") c.momentum = to_double(key, value);
    else if (key == "dragonnet.batch_size") c.batch_size = to_size(key, value);
    else if (key == "dragonnet.epochs") c.epochs = to_size(key, value);
    // simulate
    else if (key == "simulate.n_authors") c.sim.n_authors = to_size(key, value);
    else if (key == "simulate.posts_per_author_mean")
        c.sim.posts_per_author_mean = to_double(key, value);
    else if (key == "simulate.posts_per_author_min")
        c.sim.posts_per_author_min = to_size(key, value);
    else if (key == "simulate.embedding_dim") c.sim.embedding_dim = to_size(key, value);
    else if (key == "simulate.confounder_strength")
        c.sim.confounder_strength = to_double(key, value);
    else if (key == "simulate.true_cate") c.sim.true_cate = to_double(key, value);
    else if (key == "simulate.treatment_base_rate")
        c.sim.treatment_base_rate = to_double(key, value);
    else if (key == "simulate.party_effect_asymmetry")
        c.sim.party_effect_asymmetry = to_double(key, value);
    else if (key == "simulate.party_propensity_shift")
        c.sim.party_propensity_shift = to_double(key, value);
    else if (key == "simulate.url_flip") c.sim.url_flip = to_double(key, value);
    else if (key == "simulate.author_effect_sd") c.sim.author_effect_sd = to_double(key, value);
    else if (key == "simulate.embedding_noise_sd")
        c.sim.embedding_noise_sd = to_double(key, value);
    else if (key == "simulate.outcome_base_rate") c.sim.outcome_base_rate = to_double(key, value);
    else if (key == "simulate.platform_b_share") c.sim.platform_b_share = to_double(key, value);
    else if (key == "simulate.overlap_share") c.sim.overlap_share = to_double(key, value);
    else if (key == "simulate.n_states") c.sim.n_states = to_size(key, value);
    else if (key == "simulate.window_start") c.sim.window_start = value;
    else if (key == "simulate.window_span_days")
        c.sim.window_span_days = static_cast<int>(to_int(key, value));
    else bad("unknown key '" + key + "'");
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
    PipelineConfig cfg;
    std::istringstream in(read_file(path));
    std::string line, section;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = trim(strip_comment(line));
        if (body.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        if (body.front() == '[') {
            if (body.back() != ']') bad(where + ": malformed section header");
            section = trim(body.substr(1, body.size() - 2));
            if (section.empty()) bad(where + ": empty section name");
            continue;
        }
        const size_t eq = body.find('=');
        if (eq == std::string::npos) bad(where + ": expected key = value");
        const std::string key = trim(body.substr(0, eq));
        if (key.empty()) bad(where + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        try {
            apply(cfg, full, unquote(full, trim(body.substr(eq + 1))));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string(e.what()) + " (" + where + ")");
        }
    }
    return cfg;
}

void apply_override(PipelineConfig& cfg, const std::string& dotted_key, const std::string& value) {
    apply(cfg, dotted_key, unquote(dotted_key, trim(value)));
}

void apply_overrides(PipelineConfig& cfg, const std::vector<std::string>& key_eq_value) {
    for (const auto& kv : key_eq_value) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) bad("--set expects key=value, got '" + kv + "'");
        apply_override(cfg, trim(kv.substr(0, eq)), kv.substr(eq + 1));
    }
}

void normalize_and_validate(PipelineConfig& cfg) {
    // shared knobs flow into the generator so simulated outcomes always match
    // what the pipeline recomputes
    cfg.sim.seed = cfg.seed;
    cfg.sim.w_days = static_cast<size_t>(std::max(cfg.w, 0));
    cfg.sim.thres_a = cfg.thres_a;
    cfg.sim.thres_b = cfg.thres_b;

    if (cfg.w <= 0) bad("params.w must be > 0");
    if (!(cfg.thres_a > 0) || !(cfg.thres_b > 0)) bad("params.thres_a/thres_b must be > 0");
    if (!(cfg.toxicity_cutoff >= 0 && cfg.toxicity_cutoff <= 1))
        bad("params.toxicity_cutoff must be in [0,1]");
    if (!(cfg.caliper > 0)) bad("params.caliper must be > 0");
    if (cfg.folds < 2) bad("params.folds must be >= 2");
    if (cfg.platform != "A" && cfg.platform != "B" && cfg.platform != "both")
        bad("params.platform must be A, B or both");
    if (cfg.treatment != "uncivil" && cfg.treatment != "low_credible")
        bad("params.treatment must be uncivil or low_credible");
    static const char* kResponses[] = {"VIP", "VIF", "VIPF", "P25", "P50", "P75"};
    if (std::find_if(std::begin(kResponses), std::end(kResponses),
                     [&](const char* r) { return cfg.response == r; }) == std::end(kResponses))
        bad("params.response must be one of VIP, VIF, VIPF, P25, P50, P75");
    if (cfg.control_ratio != 1) bad("params.control_ratio: only 1 (1:1 sampling) is supported");
    if (!(cfg.balance_threshold > 0)) bad("params.balance_threshold must be > 0");
    if (cfg.bootstrap_b == 0) bad("params.bootstrap_b must be > 0");
    if (cfg.trunk_width == 0 || cfg.head_width == 0)
        bad("dragonnet.trunk_width/head_width must be > 0");
    if (!(cfg.lr > 0)) bad("dragonnet.lr must be > 0");
    if (!(cfg.momentum >= 0 && cfg.momentum < 1)) bad("dragonnet.momentum must be in [0,1)");
    if (cfg.batch_size == 0) bad("dragonnet.batch_size must be > 0");
    if (cfg.epochs == 0) bad("dragonnet.epochs must be > 0");
    if (!cfg.window_start.empty()) parse_iso8601_utc(cfg.window_start);
    if (!cfg.window_end.empty()) parse_iso8601_utc(cfg.window_end);
}

namespace {

void kv(std::string& out, const char* key, const std::string& v) {
    out += key;
    out += " = \"";
    out += v;
    out += "\"\n";
}
void kv(std::string& out, const char* key, double v) {
    out += key;
    out += " = ";
    out += fmt_double(v);
    out += "\n";
}
void kv(std::string& out, const char* key, uint64_t v) {
    out += key;
    out += " = ";
    out += std::to_string(v);
    out += "\n";
}
void kv(std::string& out, const char* key, bool v) {
    out += key;
    out += v ? " = true\n" : " = false\n";
}

}  // namespace

std::string canonical(const PipelineConfig& c) {
    std::string s;
    kv(s, "dragonnet.alpha", c.alpha);
    kv(s, "dragonnet.batch_size", static_cast<uint64_t>(c.batch_size));
    kv(s, "dragonnet.beta", c.beta);
    kv(s, "dragonnet.epochs", static_cast<uint64_t>(c.epochs));
    kv(s, "dragonnet.head_width", static_cast<uint64_t>(c.head_width));
    kv(s, "dragonnet.lr", c.lr);
    kv(s, "dragonnet.momentum", c.momentum);
    kv(s, "dragonnet.trunk_width", static_cast<uint64_t>(c.trunk_width));
    kv(s, "params.balance_threshold", c.balance_threshold);
    kv(s, "params.bootstrap_b", static_cast<uint64_t>(c.bootstrap_b));
    kv(s, "params.caliper", c.caliper);
    kv(s, "params.control_ratio", static_cast<uint64_t>(c.control_ratio));
    kv(s, "params.folds", static_cast<uint64_t>(c.folds));
    kv(s, "params.min_pairs", static_cast<uint64_t>(c.min_pairs));
    kv(s, "params.min_words", static_cast<uint64_t>(c.min_words));
    kv(s, "params.normalize_distance", c.normalize_distance);
    kv(s, "params.platform", c.platform);
    kv(s, "params.response", c.response);
    kv(s, "params.seed", c.seed);
    kv(s, "params.thres_a", c.thres_a);
    kv(s, "params.thres_b", c.thres_b);
    kv(s, "params.toxicity_cutoff", c.toxicity_cutoff);
    kv(s, "params.treatment", c.treatment);
    kv(s, "params.w", static_cast<uint64_t>(c.w));
    kv(s, "params.window_end", c.window_end);
    kv(s, "params.window_start", c.window_start);
    kv(s, "paths.domains", c.domains);
    kv(s, "paths.edges", c.edges);
    kv(s, "paths.embeddings", c.embeddings);
    kv(s, "paths.legislators", c.legislators);
    kv(s, "paths.out_dir", c.out_dir);
    kv(s, "paths.posts", c.posts);
    kv(s, "simulate.author_effect_sd", c.sim.author_effect_sd);
    kv(s, "simulate.confounder_strength", c.sim.confounder_strength);
    kv(s, "simulate.embedding_dim", static_cast<uint64_t>(c.sim.embedding_dim));
    kv(s, "simulate.embedding_noise_sd", c.sim.embedding_noise_sd);
    kv(s, "simulate.n_authors", static_cast<uint64_t>(c.sim.n_authors));
    kv(s, "simulate.n_states", static_cast<uint64_t>(c.sim.n_states));
    kv(s, "simulate.outcome_base_rate", c.sim.outcome_base_rate);
    kv(s, "simulate.overlap_share", c.sim.overlap_share);
    kv(s, "simulate.party_effect_asymmetry", c.sim.party_effect_asymmetry);
    kv(s, "simulate.party_propensity_shift", c.sim.party_propensity_shift);
    kv(s, "simulate.platform_b_share", c.sim.platform_b_share);
    kv(s, "simulate.posts_per_author_mean", c.sim.posts_per_author_mean);
    kv(s, "simulate.posts_per_author_min", static_cast<uint64_t>(c.sim.posts_per_author_min));
    kv(s, "simulate.treatment_base_rate", c.sim.treatment_base_rate);
    kv(s, "simulate.true_cate", c.sim.true_cate);
    kv(s, "simulate.url_flip", c.sim.url_flip);
    kv(s, "simulate.window_span_days", static_cast<uint64_t>(c.sim.window_span_days));
    kv(s, "simulate.window_start", c.sim.window_start);
    return s;
}

std::string config_hash(const PipelineConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical(cfg))));
    return buf;
}

InputPaths input_paths(const PipelineConfig& cfg) {
    const std::filesystem::path sim = std::filesystem::path(cfg.out_dir) / "sim";
    auto pick = [&](const std::string& given, const char* name) {
        return given.empty() ? (sim / name).string() : given;
    };
    return {pick(cfg.posts, "posts.jsonl"), pick(cfg.legislators, "legislators.jsonl"),
            pick(cfg.edges, "edges.csv"), pick(cfg.embeddings, "embeddings.emb"),
            pick(cfg.domains, "domains.txt")};
}

}  // namespace viseff::config
