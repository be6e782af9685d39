#pragma once
// Synthetic observational corpora with controllable confounding and known
// ground-truth treatment effects, emitted in the exact file formats the
// ingestion layer reads. The generator is the oracle for the causal pipeline:
// treatment is encoded as a toxicity score above the default cutoff, with a
// correlated (but deliberately non-identical) low-credibility URL encoding,
// and interaction counts are constructed so the rolling-window overperforming
// outcome reproduces the sampled Y.

#include <cstdint>
#include <string>
#include <vector>

namespace viseff::synthgen {

struct SynthConfig {
    size_t n_authors = 500;
    double posts_per_author_mean = 40.0;  // Poisson, clamped below
    size_t posts_per_author_min = 3;
    size_t embedding_dim = 16;
    double confounder_strength = 2.0;   // c: latent-topic weight in both logits
    double true_cate = 0.3;             // tau, risk-difference scale
    double treatment_base_rate = 0.3;   // calibrated exactly via the intercept
    double party_effect_asymmetry = 0.0;  // tau(Rep) - tau(Dem), demeaned to keep mean tau
    uint64_t seed = 42;

    // Generator internals (defaults are sensible; exposed for tests).
    double party_propensity_shift = 0.5;  // treatment logit bump for Rep
    double url_flip = 0.1;                // P(URL encoding disagrees with toxicity encoding)
    double author_effect_sd = 0.3;        // outcome random intercept per author
    double embedding_noise_sd = 0.1;      // embedding = latent + noise; kept small so
                                          // the confounder stays recoverable downstream
    double outcome_base_rate = 0.35;      // target mean of p0 after clipping
    double platform_b_share = 0.0;        // fraction of authors posting on B
    double overlap_share = 0.5;           // fraction with accounts on both platforms
    size_t w_days = 14;                   // must mirror the pipeline window
    double thres_a = 10.0;
    double thres_b = 100.0;
    size_t n_states = 25;
    std::string window_start = "2020-01-01T00:00:00Z";
    int window_span_days = 180;
};

struct PostTruth {
    std::string post_id;
    double propensity = 0.0;
    double p0 = 0.0;
    double p1 = 0.0;
    int t = 0;
    int y = 0;
};

struct SynthResult {
    // emitted files
    std::string posts_path, legislators_path, edges_path, embeddings_path, domains_path,
        truth_path, truth_summary_path;
    // realized quantities
    size_t n_posts = 0;
    size_t n_treated = 0;
    double mean_propensity = 0.0;
    double mean_tau = 0.0;  // mean(p1 - p0), equals true_cate by construction
    double naive = 0.0;     // unadjusted difference in mean Y by T
    std::vector<PostTruth> truth;
};

// Writes posts.jsonl, legislators.jsonl, edges.csv, embeddings.emb (binary),
// domains.txt, truth.jsonl and truth_summary.json under out_dir. Deterministic
// under cfg.seed; throws on invalid config.
SynthResult generate(const SynthConfig& cfg, const std::string& out_dir);

// Unadjusted difference in mean outcome between treated and untreated.
// Throws when either arm is empty.
double naive_estimate(const std::vector<int>& t, const std::vector<int>& y);

}  // namespace viseff::synthgen
