#include "viseff/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "viseff/common.hpp"
#include "viseff/config.hpp"
#include "viseff/corpus.hpp"
#include "viseff/dragonnet.hpp"
#include "viseff/labeling.hpp"
#include "viseff/matching.hpp"
#include "viseff/regress.hpp"
#include "viseff/stats.hpp"
#include "viseff/synthgen.hpp"
#include "viseff/visibility.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace viseff::cli {

namespace {

// data-level failures (missing files, bad artifacts, broken invariants)
struct StageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Ctx {
    config::PipelineConfig cfg;
    std::string hash;
    fs::path out;
};

std::string hex16(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string digest_file(const std::string& path) { return "fnv1a64:" + hex16(fnv1a64(read_file(path))); }

fs::path stage_dir(const Ctx& ctx, const std::string& stage) {
    const fs::path dir = ctx.out / stage;
    fs::create_directories(dir);
    return dir;
}

void write_manifest(const Ctx& ctx, const std::string& stage,
                    const std::vector<std::string>& input_files,
                    std::vector<std::string> output_names) {
    json m;
    m["stage"] = stage;
    m["tool_version"] = kVersion;
    m["config_hash"] = ctx.hash;
    m["seed"] = ctx.cfg.seed;
    json in = json::object();
    for (const auto& p : input_files)
        if (fs::exists(p)) in[p] = digest_file(p);
    m["inputs"] = in;
    std::sort(output_names.begin(), output_names.end());
    m["outputs"] = output_names;
    write_file((stage_dir(ctx, stage) / "manifest.json").string(), m.dump(2) + "\n");
}

// A later stage consuming artifacts checks the producing stage ran under the
// same configuration.
void require_stage(const Ctx& ctx, const std::string& current, const std::string& needed) {
    const fs::path mpath = ctx.out / needed / "manifest.json";
    if (!fs::exists(mpath))
        throw StageError("stage '" + current + "' needs artifacts from stage '" + needed +
                         "'; run `viseff " + needed + "` first");
    json m;
    try {
        m = json::parse(read_file(mpath.string()));
    } catch (const std::exception& e) {
        throw StageError(mpath.string() + ": unreadable manifest: " + e.what());
    }
    const std::string produced = m.value("config_hash", "");
    if (produced != ctx.hash)
        throw StageError("stage '" + needed + "' artifacts carry config hash " + produced +
                         " but the current config hashes to " + ctx.hash + "; re-run `viseff " +
                         needed + "`");
}

// ---- CSV helpers -----------------------------------------------------------

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

struct Csv {
    std::string buf;

    explicit Csv(const Ctx& ctx) : buf("# config_hash=" + ctx.hash + "\n") {}
    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) buf += ',';
            buf += csv_escape(cells[i]);
        }
        buf += '\n';
    }
    void save(const fs::path& path) const { write_file(path.string(), buf); }
};

std::string num(double v) { return fmt_double(v); }
std::string num(size_t v) { return std::to_string(v); }

// Reads back one of our own CSV artifacts: skips '#' lines, validates the
// header, splits rows on ',' (the fields we write never contain commas).
std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::string& expect_header) {
    if (!fs::exists(path)) throw StageError("missing artifact: " + path);
    std::istringstream in(read_file(path));
    std::string line;
    bool header_seen = false;
    std::vector<std::vector<std::string>> rows;
    const size_t ncols = split(expect_header, ',').size();
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != expect_header)
                throw StageError(path + ": unexpected header '" + line + "', wanted '" +
                                 expect_header + "'");
            header_seen = true;
            continue;
        }
        auto cells = split(line, ',');
        if (cells.size() != ncols)
            throw StageError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(ncols) + " columns");
        rows.push_back(std::move(cells));
    }
    if (!header_seen) throw StageError(path + ": empty artifact");
    return rows;
}

double parse_num(const std::string& path, const std::string& s) {
    try {
        size_t used = 0;
        double d = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return d;
    } catch (const std::exception&) {
        throw StageError(path + ": bad number '" + s + "'");
    }
}

// ---- shared loading ---------------------------------------------------------

std::string must_exist(const std::string& path, const std::string& given, const char* what) {
    if (!fs::exists(path)) {
        std::string msg = std::string(what) + " file not found: " + path;
        if (given.empty()) msg += "; run `viseff simulate` first or set paths." + std::string(what);
        throw StageError(msg);
    }
    return path;
}

std::optional<corpus::Platform> platform_filter(const Ctx& ctx) {
    if (ctx.cfg.platform == "A") return corpus::Platform::A;
    if (ctx.cfg.platform == "B") return corpus::Platform::B;
    return std::nullopt;
}

corpus::Dataset load_dataset(const Ctx& ctx, bool need_embeddings) {
    const auto paths = config::input_paths(ctx.cfg);
    auto posts = corpus::load_posts(must_exist(paths.posts, ctx.cfg.posts, "posts"));
    if (const auto pf = platform_filter(ctx)) {
        std::erase_if(posts, [&](const corpus::PostRecord& p) { return p.platform != *pf; });
    }
    auto legislators = corpus::load_legislators(
        must_exist(paths.legislators, ctx.cfg.legislators, "legislators"));
    auto graph = corpus::load_edges(must_exist(paths.edges, ctx.cfg.edges, "edges"));
    corpus::EmbeddingMatrix emb;
    if (need_embeddings)
        emb = corpus::load_embeddings(
            must_exist(paths.embeddings, ctx.cfg.embeddings, "embeddings"));
    else if (fs::exists(paths.embeddings))
        emb = corpus::load_embeddings(paths.embeddings);
    std::optional<int64_t> wstart, wend;
    if (!ctx.cfg.window_start.empty()) wstart = parse_iso8601_utc(ctx.cfg.window_start);
    if (!ctx.cfg.window_end.empty()) wend = parse_iso8601_utc(ctx.cfg.window_end);
    return corpus::build_dataset(std::move(posts), std::move(legislators), std::move(graph),
                                 std::move(emb), wstart, wend);
}

std::vector<std::string> raw_input_files(const Ctx& ctx, bool with_embeddings,
                                         bool with_domains) {
    const auto paths = config::input_paths(ctx.cfg);
    std::vector<std::string> files{paths.posts, paths.legislators, paths.edges};
    if (with_embeddings) files.push_back(paths.embeddings);
    if (with_domains) files.push_back(paths.domains);
    return files;
}

std::set<std::string> load_domains(const Ctx& ctx) {
    const auto paths = config::input_paths(ctx.cfg);
    return corpus::load_domain_list(must_exist(paths.domains, ctx.cfg.domains, "domains"));
}

// labels in dataset post order; label_posts preserves input order
std::vector<labeling::TreatmentLabel> compute_labels(const Ctx& ctx,
                                                     const corpus::Dataset& ds) {
    return labeling::label_posts(ds.posts, load_domains(ctx), ctx.cfg.toxicity_cutoff);
}

// ---- stage: ingest -----------------------------------------------------------

void do_ingest(const Ctx& ctx) {
    const auto ds = load_dataset(ctx, false);
    size_t on_a = 0, on_b = 0;
    for (const auto& p : ds.posts) (p.platform == corpus::Platform::A ? on_a : on_b)++;
    json r;
    r["config_hash"] = ctx.hash;
    r["posts_loaded"] = ds.report.posts_loaded;
    r["posts_kept"] = ds.report.posts_kept;
    r["excluded_unresolved_author"] = ds.report.excluded_unresolved_author;
    r["excluded_outside_window"] = ds.report.excluded_outside_window;
    r["edges_loaded"] = ds.report.edges_loaded;
    r["edges_dropped_self_loop"] = ds.report.edges_dropped_self_loop;
    r["edges_dropped_unknown_endpoint"] = ds.report.edges_dropped_unknown_endpoint;
    r["legislators"] = ds.report.legislators;
    r["authors_with_posts"] = ds.posts_by_author.size();
    r["posts_platform_a"] = on_a;
    r["posts_platform_b"] = on_b;
    r["embedding_rows"] = ds.embeddings.rows();
    const fs::path dir = stage_dir(ctx, "ingest");
    write_file((dir / "report.json").string(), r.dump(2) + "\n");
    write_manifest(ctx, "ingest", raw_input_files(ctx, true, true), {"report.json"});
}

// ---- stage: label -------------------------------------------------------------

void do_label(const Ctx& ctx) {
    const auto ds = load_dataset(ctx, false);
    const auto labels = compute_labels(ctx, ds);
    Csv csv(ctx);
    csv.row({"post_id", "uncivil", "low_credible", "matched_domain"});
    size_t n_uncivil = 0, n_unscored = 0, n_lowcred = 0;
    for (const auto& l : labels) {
        std::string uncivil = "NA";
        if (l.uncivil.has_value()) {
            uncivil = *l.uncivil ? "1" : "0";
            n_uncivil += *l.uncivil ? 1 : 0;
        } else {
            ++n_unscored;
        }
        n_lowcred += l.low_credible ? 1 : 0;
        csv.row({l.post_id, uncivil, l.low_credible ? "1" : "0",
                 l.matched_domain ? *l.matched_domain : ""});
    }
    const fs::path dir = stage_dir(ctx, "label");
    csv.save(dir / "labels.csv");
    json s;
    s["config_hash"] = ctx.hash;
    s["n_posts"] = labels.size();
    s["n_uncivil"] = n_uncivil;
    s["n_unscored"] = n_unscored;
    s["n_low_credible"] = n_lowcred;
    s["toxicity_cutoff"] = ctx.cfg.toxicity_cutoff;
    write_file((dir / "summary.json").string(), s.dump(2) + "\n");
    write_manifest(ctx, "label", raw_input_files(ctx, false, true),
                   {"labels.csv", "summary.json"});
}

std::vector<labeling::TreatmentLabel> read_labels_artifact(const Ctx& ctx) {
    const std::string path = (ctx.out / "label" / "labels.csv").string();
    std::vector<labeling::TreatmentLabel> out;
    for (const auto& row : read_csv(path, "post_id,uncivil,low_credible,matched_domain")) {
        labeling::TreatmentLabel l;
        l.post_id = row[0];
        if (row[1] != "NA") l.uncivil = row[1] == "1";
        l.low_credible = row[2] == "1";
        if (!row[3].empty()) l.matched_domain = row[3];
        out.push_back(std::move(l));
    }
    return out;
}

// ---- stage: visibility ---------------------------------------------------------

void do_visibility(const Ctx& ctx) {
    const auto ds = load_dataset(ctx, false);
    const auto summaries = visibility::author_visibility(ds);
    const auto outcomes = visibility::overperforming(ds, ctx.cfg.w, ctx.cfg.thres_a,
                                                     ctx.cfg.thres_b);
    const auto centrality = corpus::in_degree_centrality(ds.graph);
    const auto netvis = visibility::network_visibility(ds.graph, summaries);

    Csv authors(ctx);
    authors.row({"author_id", "post_count", "total_interactions", "v_ip", "v_if", "v_ipf",
                 "percentile_25", "percentile_50", "percentile_75"});
    for (const auto& s : summaries)
        authors.row({s.author_id, num(s.post_count), std::to_string(s.total_interactions),
                     num(s.v_ip), s.v_if ? num(*s.v_if) : "", s.v_ipf ? num(*s.v_ipf) : "",
                     num(s.percentile_25), num(s.percentile_50), num(s.percentile_75)});

    Csv over(ctx);
    over.row({"post_id", "baseline", "score", "overperforms"});
    for (const auto& o : outcomes)
        over.row({o.post_id, num(o.baseline), num(o.score), o.overperforms ? "1" : "0"});

    Csv network(ctx);
    network.row({"author_id", "centrality", "network_visibility"});
    for (const auto& s : summaries) {
        const auto c = centrality.find(s.author_id);
        const auto nv = netvis.find(s.author_id);
        network.row({s.author_id, num(c != centrality.end() ? c->second : 0.0),
                     num(nv != netvis.end() ? nv->second : 0.0)});
    }

    const fs::path dir = stage_dir(ctx, "visibility");
    authors.save(dir / "authors.csv");
    over.save(dir / "overperforming.csv");
    network.save(dir / "network.csv");
    write_manifest(ctx, "visibility", raw_input_files(ctx, false, false),
                   {"authors.csv", "overperforming.csv", "network.csv"});
}

std::vector<visibility::OverperformingOutcome> read_overperforming_artifact(const Ctx& ctx) {
    const std::string path = (ctx.out / "visibility" / "overperforming.csv").string();
    std::vector<visibility::OverperformingOutcome> out;
    for (const auto& row : read_csv(path, "post_id,baseline,score,overperforms")) {
        visibility::OverperformingOutcome o;
        o.post_id = row[0];
        o.baseline = parse_num(path, row[1]);
        o.score = parse_num(path, row[2]);
        o.overperforms = row[3] == "1";
        out.push_back(std::move(o));
    }
    return out;
}

// ---- stage: describe -------------------------------------------------------------

std::pair<std::string, std::string> group_names(stats::Grouping g) {
    switch (g) {
        case stats::Grouping::Party: return {"Rep", "Dem"};
        case stats::Grouping::Gender: return {"Men", "Women"};
        case stats::Grouping::Ethnicity: return {"White", "NonWhite"};
        case stats::Grouping::PostingFreq: return {"LowPosting", "HighPosting"};
    }
    return {"?", "?"};
}

void do_describe(const Ctx& ctx) {
    const auto ds = load_dataset(ctx, false);
    const auto summaries = visibility::author_visibility(ds);
    const fs::path dir = stage_dir(ctx, "describe");

    Csv table(ctx);
    table.row({"grouping", "dv", "group1", "group2", "n1", "n2", "u_statistic", "p_value",
               "stars", "rank_biserial", "ci_low", "ci_high", "ks_d", "ks_p"});
    std::vector<std::string> outputs{"describe.csv"};
    size_t test_idx = 0;
    for (auto grouping : {stats::Grouping::Party, stats::Grouping::Gender,
                          stats::Grouping::Ethnicity, stats::Grouping::PostingFreq}) {
        for (auto dv : {stats::DependentVariable::VIP, stats::DependentVariable::P25,
                        stats::DependentVariable::P50, stats::DependentVariable::P75}) {
            const auto [g1, g2] = stats::split_groups(summaries, ds.legislators, grouping, dv);
            ++test_idx;
            if (g1.empty() || g2.empty()) continue;
            stats::MannWhitneyOptions opt;
            opt.bootstrap_b = ctx.cfg.bootstrap_b;
            opt.seed = derive_seed(ctx.cfg.seed, "describe", test_idx);
            const auto mw = stats::mann_whitney(g1, g2, opt);
            const auto ks = stats::ks_two_sample(g1, g2);
            const auto [n1, n2] = group_names(grouping);
            table.row({stats::to_string(grouping), stats::to_string(dv), n1, n2, num(mw.n1),
                       num(mw.n2), num(mw.statistic), num(mw.p_value), stats::p_stars(mw.p_value),
                       num(mw.effect_size), num(mw.ci_low), num(mw.ci_high), num(ks.statistic),
                       num(ks.p_value)});

            Csv points(ctx);
            points.row({"group", "value", "fraction"});
            const auto e1 = stats::ecdf(g1), e2 = stats::ecdf(g2);
            for (size_t i = 0; i < e1.points.size(); ++i)
                points.row({n1, num(e1.points[i]), num(e1.fractions[i])});
            for (size_t i = 0; i < e2.points.size(); ++i)
                points.row({n2, num(e2.points[i]), num(e2.fractions[i])});
            const std::string fname = std::string("ecdf_") + stats::to_string(grouping) + "_" +
                                      stats::to_string(dv) + ".csv";
            points.save(dir / fname);
            outputs.push_back(fname);
        }
    }
    table.save(dir / "describe.csv");
    write_manifest(ctx, "describe", raw_input_files(ctx, false, false), outputs);
}

// ---- stage: regress ---------------------------------------------------------------

regress::ResponseVariable parse_response(const std::string& r) {
    if (r == "VIP") return regress::ResponseVariable::VIP;
    if (r == "VIF") return regress::ResponseVariable::VIF;
    if (r == "VIPF") return regress::ResponseVariable::VIPF;
    if (r == "P25") return regress::ResponseVariable::P25;
    if (r == "P50") return regress::ResponseVariable::P50;
    return regress::ResponseVariable::P75;
}

void do_regress(const Ctx& ctx) {
    const auto ds = load_dataset(ctx, false);
    const auto summaries = visibility::author_visibility(ds);
    const auto labels = compute_labels(ctx, ds);

    regress::DesignInputs in;
    in.summaries = summaries;
    in.legislators = ds.legislators;
    for (size_t i = 0; i < ds.posts.size(); ++i) {
        const auto& author = ds.posts[i].author_id;
        if (labels[i].uncivil.value_or(false)) in.uncivil_counts[author]++;
        if (labels[i].low_credible) in.low_credible_counts[author]++;
    }
    for (const auto& [id, c] : corpus::in_degree_centrality(ds.graph)) in.centrality[id] = c;
    for (const auto& [id, v] : visibility::network_visibility(ds.graph, summaries))
        in.network_visibility[id] = v;

    regress::DesignOptions opt;
    opt.dv = parse_response(ctx.cfg.response);
    const auto design = regress::build_design(in, opt);
    const auto fit = regress::fit_mixed(design.x, design.y, design.groups, design.column_names);

    Csv coef(ctx);
    coef.row({"term", "estimate", "std_error", "z", "p_value", "stars", "ci_low", "ci_high"});
    for (const auto& c : fit.coefficients)
        coef.row({c.term, num(c.estimate), num(c.std_error), num(c.z), num(c.p),
                  stats::p_stars(c.p), num(c.estimate - 1.96 * c.std_error),
                  num(c.estimate + 1.96 * c.std_error)});

    json m;
    m["config_hash"] = ctx.hash;
    m["response"] = ctx.cfg.response;
    m["response_lambda"] = design.response_lambda;
    m["posts_lambda"] = design.posts_lambda;
    if (design.followers_lambda) m["followers_lambda"] = *design.followers_lambda;
    m["n_obs"] = fit.n_obs;
    m["n_groups"] = fit.n_groups;
    m["n_dropped_authors"] = design.n_dropped;
    m["sigma_group"] = fit.sigma_group;
    m["sigma_resid"] = fit.sigma_resid;
    m["lambda_ratio"] = fit.lambda_ratio;
    m["r_squared"] = fit.r_squared;
    m["reml_criterion"] = fit.reml_criterion;

    const fs::path dir = stage_dir(ctx, "regress");
    coef.save(dir / "coefficients.csv");
    write_file((dir / "model.json").string(), m.dump(2) + "\n");
    write_manifest(ctx, "regress", raw_input_files(ctx, false, true),
                   {"coefficients.csv", "model.json"});
}

// ---- stage: train-dragonnet ----------------------------------------------------------

dragonnet::AssembleOptions assemble_options(const Ctx& ctx) {
    dragonnet::AssembleOptions opt;
    opt.treatment = ctx.cfg.treatment == "uncivil" ? dragonnet::Treatment::Uncivil
                                                   : dragonnet::Treatment::LowCredible;
    opt.min_words = ctx.cfg.min_words;
    opt.seed = derive_seed(ctx.cfg.seed, "assemble");
    opt.platform = platform_filter(ctx);
    return opt;
}

dragonnet::DragonnetConfig dragonnet_config(const Ctx& ctx) {
    dragonnet::DragonnetConfig dc;
    dc.trunk_width = ctx.cfg.trunk_width;
    dc.head_width = ctx.cfg.head_width;
    dc.alpha = ctx.cfg.alpha;
    dc.beta = ctx.cfg.beta;
    dc.lr = ctx.cfg.lr;
    dc.momentum = ctx.cfg.momentum;
    dc.batch_size = ctx.cfg.batch_size;
    dc.epochs = ctx.cfg.epochs;
    dc.folds = ctx.cfg.folds;
    dc.seed = derive_seed(ctx.cfg.seed, "dragonnet");
    return dc;
}

dragonnet::AssembledData assemble_from_artifacts(const Ctx& ctx, const corpus::Dataset& ds) {
    return dragonnet::assemble_features(ds, read_labels_artifact(ctx),
                                        read_overperforming_artifact(ctx),
                                        assemble_options(ctx));
}

std::string checkpoint_name(size_t fold) {
    return "checkpoint_fold" + std::to_string(fold) + ".dgn";
}

void do_train(const Ctx& ctx) {
    require_stage(ctx, "train-dragonnet", "label");
    require_stage(ctx, "train-dragonnet", "visibility");
    const auto ds = load_dataset(ctx, true);
    const auto data = assemble_from_artifacts(ctx, ds);
    const auto dc = dragonnet_config(ctx);
    const auto result = dragonnet::train(data, dc);

    const fs::path dir = stage_dir(ctx, "train-dragonnet");
    std::vector<std::string> outputs{"metrics.csv", "folds.csv", "training.json"};
    for (size_t k = 0; k < result.fold_params.size(); ++k) {
        dragonnet::save_checkpoint((dir / checkpoint_name(k)).string(), result.fold_params[k]);
        outputs.push_back(checkpoint_name(k));
    }

    Csv metrics(ctx);
    metrics.row({"fold", "n_train", "n_valid", "auc", "macro_f1", "cutoff",
                 "final_train_loss"});
    for (const auto& f : result.metrics)
        metrics.row({num(f.fold), num(f.n_train), num(f.n_valid), num(f.auc), num(f.macro_f1),
                     num(f.cutoff), num(f.final_train_loss)});
    metrics.save(dir / "metrics.csv");

    // held-out fold assignment, needed to reproduce the fold-ensemble embedding
    std::vector<size_t> fold_of(data.samples.size(), 0);
    for (size_t k = 0; k < result.fold_valid_indices.size(); ++k)
        for (size_t idx : result.fold_valid_indices[k]) fold_of[idx] = k;
    Csv folds(ctx);
    folds.row({"post_id", "fold"});
    for (size_t i = 0; i < data.samples.size(); ++i)
        folds.row({data.samples[i].post_id, num(fold_of[i])});
    folds.save(dir / "folds.csv");

    // pooled targeted estimate: every sample scored by the fold that held it out
    double pooled = 0.0;
    json by_fold = json::array();
    for (size_t k = 0; k < result.fold_params.size(); ++k) {
        const double c = dragonnet::targeted_cate(result.fold_params[k], dc, data.samples,
                                                  result.fold_valid_indices[k]);
        by_fold.push_back(c);
        pooled += c * static_cast<double>(result.fold_valid_indices[k].size());
    }
    pooled /= static_cast<double>(data.samples.size());

    json t;
    t["config_hash"] = ctx.hash;
    t["treatment"] = ctx.cfg.treatment;
    t["feature_names"] = data.feature_names;
    t["input_dim"] = data.dim;
    t["embedding_dim"] = data.embedding_dim;
    t["n_treated"] = data.n_treated;
    t["n_controls"] = data.n_controls;
    t["excluded_short"] = data.excluded_short;
    t["excluded_no_embedding"] = data.excluded_no_embedding;
    t["excluded_unlabeled"] = data.excluded_unlabeled;
    t["excluded_no_url"] = data.excluded_no_url;
    t["targeted_cate"] = pooled;
    t["targeted_cate_by_fold"] = by_fold;
    t["epoch_losses"] = result.epoch_losses;
    write_file((dir / "training.json").string(), t.dump(2) + "\n");

    auto inputs = raw_input_files(ctx, true, false);
    inputs.push_back((ctx.out / "label" / "labels.csv").string());
    inputs.push_back((ctx.out / "visibility" / "overperforming.csv").string());
    write_manifest(ctx, "train-dragonnet", inputs, outputs);
}

// ---- stage: embed ---------------------------------------------------------------------

void do_embed(const Ctx& ctx) {
    require_stage(ctx, "embed", "train-dragonnet");
    require_stage(ctx, "embed", "label");
    require_stage(ctx, "embed", "visibility");
    const auto ds = load_dataset(ctx, true);
    const auto data = assemble_from_artifacts(ctx, ds);

    const fs::path ddir = ctx.out / "train-dragonnet";
    const std::string folds_path = (ddir / "folds.csv").string();
    std::unordered_map<std::string, size_t> fold_of;
    for (const auto& row : read_csv(folds_path, "post_id,fold"))
        fold_of[row[0]] = static_cast<size_t>(parse_num(folds_path, row[1]));

    dragonnet::TrainResult tr;
    tr.fold_valid_indices.resize(ctx.cfg.folds);
    for (size_t k = 0; k < ctx.cfg.folds; ++k) {
        const std::string cp = (ddir / checkpoint_name(k)).string();
        if (!fs::exists(cp)) throw StageError("missing checkpoint " + cp);
        tr.fold_params.push_back(dragonnet::load_checkpoint(cp));
    }
    for (size_t i = 0; i < data.samples.size(); ++i) {
        const auto it = fold_of.find(data.samples[i].post_id);
        if (it == fold_of.end())
            throw StageError(folds_path + ": no fold recorded for sample '" +
                             data.samples[i].post_id + "'");
        if (it->second >= ctx.cfg.folds)
            throw StageError(folds_path + ": fold out of range for '" +
                             data.samples[i].post_id + "'");
        tr.fold_valid_indices[it->second].push_back(i);
    }

    const auto phi = dragonnet::deconfounded_embeddings(tr, data);
    const fs::path dir = stage_dir(ctx, "embed");
    corpus::save_embeddings_binary(phi, (dir / "phi.emb").string());

    Csv units(ctx);
    units.row({"post_id", "t", "y"});
    for (const auto& s : data.samples)
        units.row({s.post_id, s.t ? "1" : "0", s.y ? "1" : "0"});
    units.save(dir / "units.csv");

    auto inputs = raw_input_files(ctx, true, false);
    inputs.push_back(folds_path);
    for (size_t k = 0; k < ctx.cfg.folds; ++k)
        inputs.push_back((ddir / checkpoint_name(k)).string());
    write_manifest(ctx, "embed", inputs, {"phi.emb", "units.csv"});
}

// ---- stage: match ----------------------------------------------------------------------

struct Units {
    std::vector<std::string> ids;
    std::vector<int> t, y;
};

Units read_units_artifact(const Ctx& ctx) {
    const std::string path = (ctx.out / "embed" / "units.csv").string();
    Units u;
    for (const auto& row : read_csv(path, "post_id,t,y")) {
        u.ids.push_back(row[0]);
        u.t.push_back(row[1] == "1" ? 1 : 0);
        u.y.push_back(row[2] == "1" ? 1 : 0);
    }
    return u;
}

void do_match(const Ctx& ctx) {
    require_stage(ctx, "match", "embed");
    require_stage(ctx, "match", "label");
    require_stage(ctx, "match", "visibility");
    const auto phi = corpus::load_embeddings((ctx.out / "embed" / "phi.emb").string());
    const auto units = read_units_artifact(ctx);

    corpus::EmbeddingMatrix treated, control;
    treated.dim = control.dim = phi.dim;
    for (size_t i = 0; i < units.ids.size(); ++i) {
        const float* r = phi.row_for(units.ids[i]);
        if (!r)
            throw StageError("embed/phi.emb has no row for unit '" + units.ids[i] +
                             "'; re-run `viseff embed`");
        std::vector<float> v(r, r + phi.dim);
        (units.t[i] ? treated : control).add_row(units.ids[i], v);
    }

    matching::MatchOptions mopt;
    mopt.caliper = ctx.cfg.caliper;
    mopt.normalize = ctx.cfg.normalize_distance;
    const auto ms = matching::match(treated, control, mopt);

    const fs::path dir = stage_dir(ctx, "match");
    Csv pairs(ctx);
    pairs.row({"treated_id", "control_id", "distance"});
    for (const auto& p : ms.pairs) pairs.row({p.treated_id, p.control_id, num(p.distance)});
    pairs.save(dir / "pairs.csv");

    Csv unmatched(ctx);
    unmatched.row({"treated_id"});
    for (const auto& id : ms.unmatched_treated) unmatched.row({id});
    unmatched.save(dir / "unmatched.csv");

    // balance on the raw model covariates, before vs after matching
    const auto ds = load_dataset(ctx, true);
    const auto data = assemble_from_artifacts(ctx, ds);
    matching::Covariates tcov, ccov;
    tcov.names = ccov.names = data.feature_names;
    for (const auto& s : data.samples) {
        auto& cov = s.t ? tcov : ccov;
        cov.ids.push_back(s.post_id);
        cov.values.push_back(s.x);
    }
    const auto rep = matching::standardized_differences(tcov, ccov, ms,
                                                        ctx.cfg.balance_threshold);
    Csv balance(ctx);
    balance.row({"covariate", "before", "after"});
    for (const auto& e : rep.entries) balance.row({e.covariate, num(e.before), num(e.after)});
    balance.save(dir / "balance.csv");

    json m;
    m["config_hash"] = ctx.hash;
    m["n_treated"] = treated.rows();
    m["n_controls"] = control.rows();
    m["n_pairs"] = ms.pairs.size();
    m["n_unmatched_treated"] = ms.unmatched_treated.size();
    m["match_rate"] = treated.rows()
                          ? static_cast<double>(ms.pairs.size()) / static_cast<double>(treated.rows())
                          : 0.0;
    m["caliper"] = ctx.cfg.caliper;
    m["normalized_distance"] = ctx.cfg.normalize_distance;
    m["balance_threshold"] = rep.threshold;
    m["max_abs_before"] = std::isfinite(rep.max_abs_before) ? json(rep.max_abs_before)
                                                            : json("inf");
    m["max_abs_after"] = std::isfinite(rep.max_abs_after) ? json(rep.max_abs_after)
                                                          : json("inf");
    m["balanced"] = rep.balanced;
    write_file((dir / "match.json").string(), m.dump(2) + "\n");

    auto inputs = raw_input_files(ctx, true, false);
    inputs.push_back((ctx.out / "embed" / "phi.emb").string());
    inputs.push_back((ctx.out / "embed" / "units.csv").string());
    write_manifest(ctx, "match", inputs,
                   {"pairs.csv", "unmatched.csv", "balance.csv", "match.json"});
}

// ---- stage: cate -----------------------------------------------------------------------

void do_cate(const Ctx& ctx) {
    require_stage(ctx, "cate", "match");
    require_stage(ctx, "cate", "embed");
    const auto ds = load_dataset(ctx, false);
    const auto units = read_units_artifact(ctx);
    std::unordered_map<std::string, int> outcomes;
    for (size_t i = 0; i < units.ids.size(); ++i) outcomes[units.ids[i]] = units.y[i];

    const std::string pairs_path = (ctx.out / "match" / "pairs.csv").string();
    matching::MatchSet ms;
    ms.caliper = ctx.cfg.caliper;
    ms.normalized = ctx.cfg.normalize_distance;
    for (const auto& row : read_csv(pairs_path, "treated_id,control_id,distance"))
        ms.pairs.push_back({row[0], row[1], parse_num(pairs_path, row[2])});

    std::unordered_map<std::string, const corpus::LegislatorRecord*> author_of;
    for (const auto& p : ds.posts) {
        const auto* leg = ds.find_legislator(p.author_id);
        if (leg) author_of[p.post_id] = leg;
    }
    const auto masks = matching::subgroup_masks(ds.legislators);

    auto with_author = [&](auto pred) {
        return [&, pred](const std::string& post_id) {
            const auto it = author_of.find(post_id);
            return it != author_of.end() && pred(*it->second);
        };
    };
    using corpus::Party;
    using LR = corpus::LegislatorRecord;
    const std::vector<std::pair<matching::Subgroup, std::function<bool(const std::string&)>>>
        groups{
            {matching::Subgroup::All, [](const std::string&) { return true; }},
            {matching::Subgroup::Dem,
             with_author([](const LR& l) { return l.party == Party::Dem; })},
            {matching::Subgroup::Rep,
             with_author([](const LR& l) { return l.party == Party::Rep; })},
            {matching::Subgroup::ExtremeDem,
             with_author([&](const LR& l) { return masks.extreme_dem.count(l.author_id) > 0; })},
            {matching::Subgroup::ExtremeRep,
             with_author([&](const LR& l) { return masks.extreme_rep.count(l.author_id) > 0; })},
            {matching::Subgroup::OverlapDem, with_author([&](const LR& l) {
                 return l.party == Party::Dem && masks.overlap.count(l.author_id) > 0;
             })},
            {matching::Subgroup::OverlapRep, with_author([&](const LR& l) {
                 return l.party == Party::Rep && masks.overlap.count(l.author_id) > 0;
             })},
        };

    matching::CateOptions copt;
    copt.min_pairs = ctx.cfg.min_pairs;
    copt.bootstrap_b = ctx.cfg.bootstrap_b;
    copt.seed = derive_seed(ctx.cfg.seed, "cate");

    Csv table(ctx);
    table.row({"subgroup", "cate", "ci_low", "ci_high", "n_pairs", "withheld"});
    for (const auto& [sg, filter] : groups) {
        const auto est = matching::matched_cate(ms, outcomes, filter, sg, copt);
        table.row({matching::to_string(sg), num(est.cate), num(est.ci_low), num(est.ci_high),
                   num(est.n_pairs), est.withheld ? "1" : "0"});
    }
    const fs::path dir = stage_dir(ctx, "cate");
    table.save(dir / "cate.csv");

    auto inputs = raw_input_files(ctx, false, false);
    inputs.push_back(pairs_path);
    inputs.push_back((ctx.out / "embed" / "units.csv").string());
    write_manifest(ctx, "cate", inputs, {"cate.csv"});
}

// ---- stage: simulate --------------------------------------------------------------------

void do_simulate(const Ctx& ctx) {
    const fs::path dir = stage_dir(ctx, "sim");
    const auto res = synthgen::generate(ctx.cfg.sim, dir.string());
    write_manifest(ctx, "sim", {},
                   {"posts.jsonl", "legislators.jsonl", "edges.csv", "embeddings.emb",
                    "domains.txt", "truth.jsonl", "truth_summary.json"});
    std::cout << "simulated " << res.n_posts << " posts (" << res.n_treated
              << " treated) for " << ctx.cfg.sim.n_authors << " authors; naive estimate "
              << fmt_double(res.naive) << " vs mean effect " << fmt_double(res.mean_tau)
              << "\n";
}

// ---- schema reference ---------------------------------------------------------------------

constexpr const char* kSchema = R"(# Artifact schema

Every CSV starts with a `# config_hash=<hex>` comment line tying it to the
configuration that produced it; every JSON artifact carries a `config_hash`
field. Each stage directory contains a `manifest.json` with `stage`,
`tool_version`, `config_hash`, `seed`, `inputs` (path -> content digest) and
`outputs`.

## ingest/report.json
Ingest counters: posts loaded/kept, exclusion reasons, edge drops, legislator
count, per-platform post counts, embedding rows.

## label/labels.csv
`post_id, uncivil, low_credible, matched_domain` — uncivil is 1/0 or NA when
the post has no toxicity score; matched_domain is the matched list entry for
low-credibility posts, else empty.

## label/summary.json
Label counts and the toxicity cutoff in effect.

## visibility/authors.csv
`author_id, post_count, total_interactions, v_ip, v_if, v_ipf, percentile_25,
percentile_50, percentile_75` — v_if/v_ipf are empty without a positive
follower count.

## visibility/overperforming.csv
`post_id, baseline, score, overperforms` — baseline is the rolling-window
median of the author's prior interaction totals on that platform; score =
interactions / (baseline + platform threshold); overperforms = 1 iff
score > 1.

## visibility/network.csv
`author_id, centrality, network_visibility` — in-degree centrality and the
median per-post visibility of in-neighbors.

## describe/describe.csv
`grouping, dv, group1, group2, n1, n2, u_statistic, p_value, stars,
rank_biserial, ci_low, ci_high, ks_d, ks_p` — Mann-Whitney (group1 vs group2)
with a bootstrap CI on the rank-biserial effect size, plus the two-sample
Kolmogorov-Smirnov test.

## describe/ecdf_<grouping>_<dv>.csv
`group, value, fraction` — empirical CDF points for both groups, for plotting.

## regress/coefficients.csv
`term, estimate, std_error, z, p_value, stars, ci_low, ci_high` — fixed
effects of the random-intercept model on the transformed response; the CI is
estimate +/- 1.96 se.

## regress/model.json
Transform lambdas, observation/group counts, variance components
(sigma_group, sigma_resid, lambda_ratio), marginal r_squared, REML criterion.

## train-dragonnet/metrics.csv
`fold, n_train, n_valid, auc, macro_f1, cutoff, final_train_loss` — held-out
metrics per cross-validation fold.

## train-dragonnet/folds.csv
`post_id, fold` — which fold held each assembled sample out; the embed stage
uses this to score every sample with the model that never trained on it.

## train-dragonnet/checkpoint_fold<k>.dgn
Binary checkpoint: magic "DGN1", little-endian u32 layer dims (input, trunk,
head), float32 weights in layer order (trunk w1,b1,w2,b2; arm-0 head; arm-1
head; propensity w,b; epsilon), then the input standardizer mean and scale.

## train-dragonnet/training.json
Feature names, sample counts, exclusion counters, pooled and per-fold
targeted effect estimates, per-epoch training losses (fold-major).

## embed/phi.emb
Binary embedding matrix ("EMB1") of deconfounded representations, one row per
assembled sample keyed by post id.

## embed/units.csv
`post_id, t, y` — treatment indicator and binary overperforming outcome for
every embedded sample.

## match/pairs.csv
`treated_id, control_id, distance` — greedy 1:1 caliper matches in ascending
distance order.

## match/unmatched.csv
`treated_id` — treated units with no control inside the caliper.

## match/balance.csv
`covariate, before, after` — standardized mean differences before and after
matching for every model covariate.

## match/match.json
Match counts, match rate, caliper, distance normalization flag, balance
threshold and the max |standardized difference| before/after.

## cate/cate.csv
`subgroup, cate, ci_low, ci_high, n_pairs, withheld` — matched difference in
mean outcomes with a percentile-bootstrap CI for All, Dem, Rep, ExtremeDem,
ExtremeRep, OverlapDem and OverlapRep; rows with fewer than the minimum pair
count are withheld (estimate zeroed, withheld = 1).

## sim/
A complete synthetic corpus in the ingestion formats (posts.jsonl,
legislators.jsonl, edges.csv, embeddings.emb, domains.txt) plus ground truth:
truth.jsonl (`post_id, propensity, p0, p1, t, y` per post) and
truth_summary.json (realized effect means, overall and per subgroup).
)";

// ---- dispatch -------------------------------------------------------------------------

void run_stage(const Ctx& ctx, const std::string& stage);

void do_pipeline(const Ctx& ctx) {
    for (const char* stage : {"ingest", "label", "visibility", "describe", "regress",
                              "train-dragonnet", "embed", "match", "cate"})
        run_stage(ctx, stage);
}

void run_stage(const Ctx& ctx, const std::string& stage) {
    if (stage == "ingest") do_ingest(ctx);
    else if (stage == "label") do_label(ctx);
    else if (stage == "visibility") do_visibility(ctx);
    else if (stage == "describe") do_describe(ctx);
    else if (stage == "regress") do_regress(ctx);
    else if (stage == "train-dragonnet") do_train(ctx);
    else if (stage == "embed") do_embed(ctx);
    else if (stage == "match") do_match(ctx);
    else if (stage == "cate") do_cate(ctx);
    else if (stage == "simulate") do_simulate(ctx);
    else if (stage == "pipeline") do_pipeline(ctx);
    else throw std::logic_error("unknown stage " + stage);
    if (stage != "pipeline")
        std::cout << stage << ": wrote "
                  << (ctx.out / (stage == "simulate" ? std::string("sim") : stage)).string()
                  << "\n";
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"engagement-visibility causal analysis pipeline"};
    app.set_version_flag("--version", std::string("viseff ") + kVersion);
    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("-c,--config", config_path, "TOML config file")->check(CLI::ExistingFile);
    app.add_option("--set", sets, "override a config value as section.key=value");
    app.require_subcommand(1);

    static const std::pair<const char*, const char*> kStages[] = {
        {"ingest", "load and validate the corpus, write an ingest report"},
        {"label", "incivility and low-credibility treatment labels"},
        {"visibility", "author visibility metrics and the overperforming outcome"},
        {"describe", "group comparisons (Mann-Whitney, KS) and ECDF point files"},
        {"regress", "mixed-effects regression of transformed visibility"},
        {"train-dragonnet", "train the potential-outcome network with cross-validation"},
        {"embed", "deconfounded representations from the trained network"},
        {"match", "caliper matching on deconfounded embeddings with balance checks"},
        {"cate", "matched treatment-effect estimates by subgroup"},
        {"simulate", "generate a synthetic corpus with known ground truth"},
        {"pipeline", "run every analysis stage in order"},
    };
    for (const auto& [name, desc] : kStages) app.add_subcommand(name, desc)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    Ctx ctx;
    try {
        if (!config_path.empty()) ctx.cfg = config::load_config(config_path);
        config::apply_overrides(ctx.cfg, sets);
        config::normalize_and_validate(ctx.cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    ctx.hash = config::config_hash(ctx.cfg);
    ctx.out = ctx.cfg.out_dir;

    const std::string stage = app.get_subcommands().front()->get_name();
    try {
        fs::create_directories(ctx.out);
        run_stage(ctx, stage);
        write_file((ctx.out / "SCHEMA.md").string(), kSchema);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace viseff::cli
