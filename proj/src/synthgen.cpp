#include "viseff/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "viseff/common.hpp"
#include "viseff/corpus.hpp"
#include "viseff/matching.hpp"

using nlohmann::json;

namespace viseff::synthgen {

namespace {

constexpr size_t kLowCredDomains = 20;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Author {
    std::string id;
    corpus::Party party = corpus::Party::Dem;
    corpus::Gender gender = corpus::Gender::Men;
    corpus::Ethnicity ethnicity = corpus::Ethnicity::White;
    std::string state;
    double ideology = 0.0;
    int64_t followers = 0;
    bool on_b = false;      // has an account on platform B as well
    double effect = 0.0;    // outcome random intercept
    size_t n_posts = 0;
};

struct Draft {
    std::string post_id;
    size_t author = 0;
    corpus::Platform platform = corpus::Platform::A;
    int64_t ts = 0;
    double u = 0.0;  // latent topic score, the confounder
    std::vector<float> emb;
    double pi = 0.0, p0 = 0.0, p1 = 0.0, tau = 0.0;
    int t = 0, y = 0;
    int64_t total = 0;
    double toxicity = 0.0;
    bool lowcred_url = false;
};

std::string pad_id(const char* prefix, size_t n, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, n);
    return buf;
}

void validate(const SynthConfig& c) {
    auto bad = [](const std::string& what) {
        throw std::invalid_argument("synthgen: " + what);
    };
    if (c.n_authors == 0) bad("n_authors must be > 0");
    if (c.embedding_dim == 0) bad("embedding_dim must be > 0");
    if (c.posts_per_author_min == 0) bad("posts_per_author_min must be > 0");
    if (!(c.posts_per_author_mean > 0)) bad("posts_per_author_mean must be > 0");
    if (!(c.treatment_base_rate > 0 && c.treatment_base_rate < 1))
        bad("treatment_base_rate must be in (0,1)");
    if (!(c.outcome_base_rate > 0 && c.outcome_base_rate < 1))
        bad("outcome_base_rate must be in (0,1)");
    if (std::abs(c.true_cate) + std::abs(c.party_effect_asymmetry) > 0.9)
        bad("|true_cate| + |party_effect_asymmetry| must be <= 0.9");
    if (c.w_days == 0) bad("w_days must be > 0");
    if (!(c.thres_a > 0 && c.thres_b > 0)) bad("thresholds must be > 0");
    if (c.window_span_days <= 0) bad("window_span_days must be > 0");
    if (c.n_states == 0) bad("n_states must be > 0");
    if (c.platform_b_share < 0 || c.platform_b_share > 1 || c.overlap_share < 0 ||
        c.overlap_share > 1)
        bad("platform shares must be in [0,1]");
    if (c.url_flip < 0 || c.url_flip > 1) bad("url_flip must be in [0,1]");
    if (!(c.confounder_strength >= 0)) bad("confounder_strength must be >= 0");
    if (!(c.author_effect_sd >= 0) || !(c.embedding_noise_sd >= 0))
        bad("noise standard deviations must be >= 0");
}

// Solve for the intercept that makes mean(eval(b)) hit `target`. eval must be
// nondecreasing in b. Plain bisection; the calibrated mean is exact to ~1e-12.
double calibrate_intercept(const std::function<double(double)>& mean_at, double target) {
    double lo = -40.0, hi = 40.0;
    if (mean_at(lo) > target || mean_at(hi) < target)
        throw std::invalid_argument("synthgen: calibration target unreachable");
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        double mid = 0.5 * (lo + hi);
        (mean_at(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Interaction totals for one (author, platform) stream, constructed so the
// rolling-window overperforming flag of the finished corpus equals the drawn
// y for every post. `order` indexes into drafts, already sorted by timestamp
// with strictly increasing values.
void synthesize_totals(std::vector<Draft>& drafts, const std::vector<size_t>& order,
                       double thres, int64_t w_seconds, Rng& rng) {
    const auto theta_int = static_cast<int64_t>(thres);
    for (size_t k = 0; k < order.size(); ++k) {
        Draft& d = drafts[order[k]];
        std::vector<double> window;
        for (size_t j = 0; j < k; ++j) {
            const Draft& prev = drafts[order[j]];
            if (prev.ts >= d.ts - w_seconds && prev.ts < d.ts)
                window.push_back(static_cast<double>(prev.total));
        }
        double b = 0.0;
        if (!window.empty()) {
            std::sort(window.begin(), window.end());
            b = quantile_sorted(window, 0.5);
        }
        const auto cap = static_cast<int64_t>(std::floor(b + thres));
        if (d.y == 1) {
            d.total = cap + 1 + std::uniform_int_distribution<int64_t>(0, theta_int)(rng);
        } else {
            d.total = std::uniform_int_distribution<int64_t>(0, cap)(rng);
        }
    }
}

std::string post_text(size_t i) {
    static const char* kTopics[] = {"budget",   "transport", "schools",  "health",
                                    "parks",    "housing",   "safety",   "energy",
                                    "staffing", "libraries", "licenses", "zoning"};
    const size_t a = i % 12, b = (i / 12) % 12, c = (i / 144) % 12;
    std::string s = "Working session " + std::to_string(i + 1) + " notes cover " + kTopics[a] +
                    " and " + kTopics[b] + " with an update on " + kTopics[c] +
                    " for district residents this week.";
    return s;
}

json interactions_json(int64_t total) {
    const int64_t likes = total * 6 / 10;
    const int64_t shares = total * 2 / 10;
    const int64_t comments = total / 10;
    json j;
    j["likes"] = likes;
    j["shares"] = shares;
    j["comments"] = comments;
    j["quotes"] = total - likes - shares - comments;
    return j;
}

}  // namespace

double naive_estimate(const std::vector<int>& t, const std::vector<int>& y) {
    if (t.size() != y.size()) throw std::invalid_argument("naive_estimate: size mismatch");
    double s1 = 0, n1 = 0, s0 = 0, n0 = 0;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i]) {
            s1 += y[i];
            ++n1;
        } else {
            s0 += y[i];
            ++n0;
        }
    }
    if (n1 == 0 || n0 == 0) throw std::invalid_argument("naive_estimate: an arm is empty");
    return s1 / n1 - s0 / n0;
}

SynthResult generate(const SynthConfig& cfg, const std::string& out_dir) {
    validate(cfg);
    std::filesystem::create_directories(out_dir);

    // --- authors -----------------------------------------------------------
    std::vector<Author> authors(cfg.n_authors);
    {
        Rng rng(derive_seed(cfg.seed, "authors"));
        std::bernoulli_distribution rep(0.5), men(0.5), white(0.7), onb(cfg.overlap_share);
        std::normal_distribution<double> ideo(0.0, 0.3), logf(8.0, 1.0),
            eff(0.0, cfg.author_effect_sd);
        std::uniform_int_distribution<size_t> state(1, cfg.n_states);
        std::poisson_distribution<long> nposts(cfg.posts_per_author_mean);
        for (size_t i = 0; i < cfg.n_authors; ++i) {
            Author& a = authors[i];
            a.id = pad_id("L", i, 4);
            a.party = rep(rng) ? corpus::Party::Rep : corpus::Party::Dem;
            a.gender = men(rng) ? corpus::Gender::Men : corpus::Gender::Women;
            a.ethnicity = white(rng) ? corpus::Ethnicity::White : corpus::Ethnicity::NonWhite;
            a.state = pad_id("S", state(rng), 2);
            a.ideology = (a.party == corpus::Party::Rep ? 1.0 : -1.0) + ideo(rng);
            a.followers = std::max<int64_t>(1, std::llround(std::exp(logf(rng))));
            a.on_b = onb(rng);
            a.effect = eff(rng);
            a.n_posts = std::max<size_t>(cfg.posts_per_author_min,
                                         static_cast<size_t>(std::max(0L, nposts(rng))));
        }
    }

    // --- follower edges ------------------------------------------------------
    std::vector<std::pair<std::string, std::string>> edges;
    if (cfg.n_authors > 1) {
        Rng rng(derive_seed(cfg.seed, "edges"));
        std::uniform_int_distribution<size_t> pick(0, cfg.n_authors - 1);
        const size_t k = std::min<size_t>(8, cfg.n_authors - 1);
        for (size_t i = 0; i < cfg.n_authors; ++i) {
            std::set<size_t> out;
            while (out.size() < k) {
                size_t j = pick(rng);
                if (j != i) out.insert(j);
            }
            for (size_t j : out) edges.emplace_back(authors[i].id, authors[j].id);
        }
    }

    // --- post skeleton: ids, platforms, timestamps --------------------------
    const int64_t t0 = parse_iso8601_utc(cfg.window_start);
    const int64_t span = static_cast<int64_t>(cfg.window_span_days) * 86400;
    std::vector<Draft> drafts;
    // per (author, platform): draft indices sorted by timestamp
    std::vector<std::array<std::vector<size_t>, 2>> streams(cfg.n_authors);
    for (size_t i = 0; i < cfg.n_authors; ++i) {
        Rng rng(derive_seed(cfg.seed, "posts", i));
        std::uniform_int_distribution<int64_t> when(t0, t0 + span - 1);
        std::bernoulli_distribution to_b(cfg.platform_b_share);
        std::vector<std::pair<int64_t, int>> stamped;  // (ts, platform)
        stamped.reserve(authors[i].n_posts);
        for (size_t p = 0; p < authors[i].n_posts; ++p) {
            const int plat = authors[i].on_b && to_b(rng) ? 1 : 0;
            stamped.emplace_back(when(rng), plat);
        }
        // strictly increasing timestamps within each platform stream so the
        // rolling window never sees two posts at the same instant
        for (int plat = 0; plat < 2; ++plat) {
            std::vector<int64_t> ts;
            for (auto& [w, pl] : stamped)
                if (pl == plat) ts.push_back(w);
            std::sort(ts.begin(), ts.end());
            for (size_t p = 1; p < ts.size(); ++p) ts[p] = std::max(ts[p], ts[p - 1] + 1);
            for (int64_t w : ts) {
                Draft d;
                d.post_id = pad_id("P", drafts.size(), 7);
                d.author = i;
                d.platform = plat == 0 ? corpus::Platform::A : corpus::Platform::B;
                d.ts = w;
                streams[i][plat].push_back(drafts.size());
                drafts.push_back(std::move(d));
            }
        }
    }
    const size_t n = drafts.size();

    // --- latent topic + embeddings ------------------------------------------
    std::vector<double> w_vec(cfg.embedding_dim);
    {
        Rng rng(derive_seed(cfg.seed, "confounder"));
        std::normal_distribution<double> nd(0.0, 1.0);
        double norm2 = 0.0;
        for (auto& w : w_vec) {
            w = nd(rng);
            norm2 += w * w;
        }
        const double inv = 1.0 / std::sqrt(std::max(norm2, 1e-30));
        for (auto& w : w_vec) w *= inv;
    }
    {
        Rng rng(derive_seed(cfg.seed, "latent"));
        std::normal_distribution<double> nd(0.0, 1.0);
        for (Draft& d : drafts) {
            d.emb.resize(cfg.embedding_dim);
            double u = 0.0;
            for (size_t k = 0; k < cfg.embedding_dim; ++k) {
                const double z = nd(rng);
                u += w_vec[k] * z;
                d.emb[k] = static_cast<float>(z + cfg.embedding_noise_sd * nd(rng));
            }
            d.u = u;
        }
    }

    // --- treatment: calibrated propensity, then a Bernoulli draw ------------
    {
        std::vector<double> logit(n);
        for (size_t i = 0; i < n; ++i)
            logit[i] = cfg.confounder_strength * drafts[i].u +
                       (authors[drafts[i].author].party == corpus::Party::Rep
                            ? cfg.party_propensity_shift
                            : 0.0);
        const double b0 = calibrate_intercept(
            [&](double b) {
                double s = 0.0;
                for (double l : logit) s += std::clamp(sigmoid(b + l), 0.02, 0.98);
                return s / static_cast<double>(n);
            },
            cfg.treatment_base_rate);
        Rng rng(derive_seed(cfg.seed, "treatment"));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (size_t i = 0; i < n; ++i) {
            drafts[i].pi = std::clamp(sigmoid(b0 + logit[i]), 0.02, 0.98);
            drafts[i].t = unif(rng) < drafts[i].pi ? 1 : 0;
        }
    }

    // --- per-post effect, demeaned so mean(tau) == true_cate exactly --------
    {
        long double acc = 0.0L;
        for (const Draft& d : drafts)
            acc += authors[d.author].party == corpus::Party::Rep
                       ? 0.5L * cfg.party_effect_asymmetry
                       : -0.5L * cfg.party_effect_asymmetry;
        const long double shift = static_cast<long double>(cfg.true_cate) -
                                  acc / static_cast<long double>(n);
        for (Draft& d : drafts) {
            const long double half = authors[d.author].party == corpus::Party::Rep
                                         ? 0.5L * cfg.party_effect_asymmetry
                                         : -0.5L * cfg.party_effect_asymmetry;
            d.tau = static_cast<double>(half + shift);
        }
    }

    // --- potential outcomes ---------------------------------------------------
    {
        std::vector<double> base(n), lo(n), hi(n);
        for (size_t i = 0; i < n; ++i) {
            base[i] = cfg.confounder_strength * drafts[i].u + authors[drafts[i].author].effect;
            lo[i] = std::max(0.02, 0.02 - drafts[i].tau);
            hi[i] = std::min(0.98, 0.98 - drafts[i].tau);
        }
        const double d0 = calibrate_intercept(
            [&](double b) {
                double s = 0.0;
                for (size_t i = 0; i < n; ++i)
                    s += std::clamp(sigmoid(b + base[i]), lo[i], hi[i]);
                return s / static_cast<double>(n);
            },
            cfg.outcome_base_rate);
        Rng rng(derive_seed(cfg.seed, "outcome"));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (size_t i = 0; i < n; ++i) {
            Draft& d = drafts[i];
            d.p0 = std::clamp(sigmoid(d0 + base[i]), lo[i], hi[i]);
            d.p1 = d.p0 + d.tau;
            d.y = unif(rng) < (d.t ? d.p1 : d.p0) ? 1 : 0;
        }
    }

    // --- interaction totals that reproduce y through the rolling window -----
    {
        Rng rng(derive_seed(cfg.seed, "interactions"));
        const int64_t w_seconds = static_cast<int64_t>(cfg.w_days) * 86400;
        for (size_t i = 0; i < cfg.n_authors; ++i) {
            synthesize_totals(drafts, streams[i][0], cfg.thres_a, w_seconds, rng);
            synthesize_totals(drafts, streams[i][1], cfg.thres_b, w_seconds, rng);
        }
    }

    // --- toxicity scores: treated clear the cutoff, controls stay below -----
    {
        Rng rng(derive_seed(cfg.seed, "toxicity"));
        std::uniform_real_distribution<double> hot(0.83, 0.99), cold(0.0, 0.80);
        for (Draft& d : drafts) d.toxicity = d.t ? hot(rng) : cold(rng);
    }

    // --- URL encoding: tracks treatment but disagrees on a url_flip share so
    // the two treatment codings are correlated, not collinear
    {
        Rng rng(derive_seed(cfg.seed, "urls"));
        std::bernoulli_distribution flip(cfg.url_flip);
        for (Draft& d : drafts) d.lowcred_url = flip(rng) ? d.t == 0 : d.t == 1;
    }

    // --- emit files ----------------------------------------------------------
    const std::filesystem::path dir(out_dir);
    SynthResult res;
    res.posts_path = (dir / "posts.jsonl").string();
    res.legislators_path = (dir / "legislators.jsonl").string();
    res.edges_path = (dir / "edges.csv").string();
    res.embeddings_path = (dir / "embeddings.emb").string();
    res.domains_path = (dir / "domains.txt").string();
    res.truth_path = (dir / "truth.jsonl").string();
    res.truth_summary_path = (dir / "truth_summary.json").string();

    {
        std::ofstream out(res.posts_path);
        if (!out) throw std::runtime_error("cannot write " + res.posts_path);
        for (size_t i = 0; i < n; ++i) {
            const Draft& d = drafts[i];
            json j;
            j["post_id"] = d.post_id;
            j["author_id"] = authors[d.author].id;
            j["platform"] = corpus::to_string(d.platform);
            j["timestamp"] = format_iso8601_utc(d.ts);
            j["text"] = post_text(i);
            j["interactions"] = interactions_json(d.total);
            j["toxicity_score"] = d.toxicity;
            j["embedding_id"] = d.post_id;
            const std::string host = d.lowcred_url
                                         ? "lowcred" + std::to_string(i % kLowCredDomains) +
                                               ".example/p/"
                                         : "civic" + std::to_string(i % kLowCredDomains) +
                                               ".example/a/";
            j["urls"] = json::array({"https://" + host + d.post_id});
            out << j.dump() << "\n";
        }
    }
    {
        std::ofstream out(res.legislators_path);
        if (!out) throw std::runtime_error("cannot write " + res.legislators_path);
        for (const Author& a : authors) {
            json j;
            j["author_id"] = a.id;
            j["party"] = corpus::to_string(a.party);
            j["gender"] = corpus::to_string(a.gender);
            j["ethnicity"] = corpus::to_string(a.ethnicity);
            j["state"] = a.state;
            j["ideology"] = a.ideology;
            j["follower_count"] = a.followers;
            j["platforms"] = a.on_b ? json::array({"A", "B"}) : json::array({"A"});
            out << j.dump() << "\n";
        }
    }
    {
        std::string csv = "src,dst\n";
        for (const auto& [s, t] : edges) csv += s + "," + t + "\n";
        write_file(res.edges_path, csv);
    }
    {
        corpus::EmbeddingMatrix m;
        m.dim = cfg.embedding_dim;
        for (const Draft& d : drafts) m.add_row(d.post_id, d.emb);
        corpus::save_embeddings_binary(m, res.embeddings_path);
    }
    {
        std::string txt = "# synthetic low-credibility domains\n";
        for (size_t k = 0; k < kLowCredDomains; ++k)
            txt += "lowcred" + std::to_string(k) + ".example\n";
        write_file(res.domains_path, txt);
    }

    // --- ground truth ---------------------------------------------------------
    res.n_posts = n;
    std::vector<int> tv(n), yv(n);
    long double pi_acc = 0.0L, tau_acc = 0.0L;
    {
        std::ofstream out(res.truth_path);
        if (!out) throw std::runtime_error("cannot write " + res.truth_path);
        for (size_t i = 0; i < n; ++i) {
            const Draft& d = drafts[i];
            json j;
            j["post_id"] = d.post_id;
            j["propensity"] = d.pi;
            j["p0"] = d.p0;
            j["p1"] = d.p1;
            j["t"] = d.t;
            j["y"] = d.y;
            out << j.dump() << "\n";
            tv[i] = d.t;
            yv[i] = d.y;
            res.n_treated += static_cast<size_t>(d.t);
            pi_acc += d.pi;
            tau_acc += static_cast<long double>(d.p1) - d.p0;
            res.truth.push_back({d.post_id, d.pi, d.p0, d.p1, d.t, d.y});
        }
    }
    res.mean_propensity = static_cast<double>(pi_acc / static_cast<long double>(n));
    res.mean_tau = static_cast<double>(tau_acc / static_cast<long double>(n));
    res.naive = naive_estimate(tv, yv);

    {
        std::unordered_map<std::string, corpus::LegislatorRecord> legmap;
        for (const Author& a : authors) {
            corpus::LegislatorRecord r;
            r.author_id = a.id;
            r.party = a.party;
            r.gender = a.gender;
            r.ethnicity = a.ethnicity;
            r.state = a.state;
            r.ideology = a.ideology;
            r.follower_count = a.followers;
            r.accounts.insert(corpus::Platform::A);
            if (a.on_b) r.accounts.insert(corpus::Platform::B);
            legmap.emplace(a.id, std::move(r));
        }
        const auto masks = matching::subgroup_masks(legmap);
        auto group_mean = [&](const std::function<bool(const Author&)>& keep) {
            long double acc = 0.0L;
            size_t cnt = 0;
            for (const Draft& d : drafts) {
                if (!keep(authors[d.author])) continue;
                acc += static_cast<long double>(d.p1) - d.p0;
                ++cnt;
            }
            json j;
            j["n_posts"] = cnt;
            j["mean_tau"] =
                cnt ? static_cast<double>(acc / static_cast<long double>(cnt)) : 0.0;
            return j;
        };
        json sub;
        sub["All"] = group_mean([](const Author&) { return true; });
        sub["Dem"] = group_mean([](const Author& a) { return a.party == corpus::Party::Dem; });
        sub["Rep"] = group_mean([](const Author& a) { return a.party == corpus::Party::Rep; });
        sub["ExtremeDem"] =
            group_mean([&](const Author& a) { return masks.extreme_dem.count(a.id) > 0; });
        sub["ExtremeRep"] =
            group_mean([&](const Author& a) { return masks.extreme_rep.count(a.id) > 0; });
        sub["OverlapDem"] = group_mean([&](const Author& a) {
            return a.party == corpus::Party::Dem && masks.overlap.count(a.id) > 0;
        });
        sub["OverlapRep"] = group_mean([&](const Author& a) {
            return a.party == corpus::Party::Rep && masks.overlap.count(a.id) > 0;
        });

        json summary;
        summary["seed"] = cfg.seed;
        summary["n_authors"] = cfg.n_authors;
        summary["n_posts"] = res.n_posts;
        summary["n_treated"] = res.n_treated;
        summary["true_cate"] = cfg.true_cate;
        summary["mean_tau"] = res.mean_tau;
        summary["mean_propensity"] = res.mean_propensity;
        summary["treatment_base_rate"] = cfg.treatment_base_rate;
        summary["outcome_base_rate"] = cfg.outcome_base_rate;
        summary["confounder_strength"] = cfg.confounder_strength;
        summary["party_effect_asymmetry"] = cfg.party_effect_asymmetry;
        summary["naive"] = res.naive;
        summary["subgroups"] = sub;
        write_file(res.truth_summary_path, summary.dump(2) + "\n");
    }
    return res;
}

}  // namespace viseff::synthgen
