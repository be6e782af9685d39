#pragma once
// Potential-outcome network: shared trunk, two outcome heads, a propensity
// head, and a scalar nudge parameter trained with a targeted regularization
// term. Backprop is implemented by hand on top of the kern:: primitives and
// is verified against finite differences in the tests.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "viseff/corpus.hpp"
#include "viseff/labeling.hpp"
#include "viseff/visibility.hpp"

namespace viseff::dragonnet {

enum class Treatment { Uncivil, LowCredible };

const char* to_string(Treatment t);

struct Sample {
    std::string post_id;
    std::vector<double> x;
    int t = 0;  // treatment indicator
    int y = 0;  // binarized overperforming outcome
};

struct AssembledData {
    std::vector<Sample> samples;  // treated first, then the sampled controls
    size_t dim = 0;
    size_t embedding_dim = 0;             // leading feature columns
    std::vector<std::string> feature_names;  // size dim
    size_t n_treated = 0;
    size_t n_controls = 0;
    size_t excluded_short = 0;         // under the word minimum
    size_t excluded_no_embedding = 0;  // embedding id unresolvable
    size_t excluded_unlabeled = 0;     // toxicity missing (uncivil task)
    size_t excluded_no_url = 0;        // URL-free control candidates (credibility task)
};

struct AssembleOptions {
    Treatment treatment = Treatment::Uncivil;
    size_t min_words = 10;
    uint64_t seed = 1;
    std::optional<corpus::Platform> platform;  // restrict to one platform
};

// Builds (features, T, Y) triples: feature vector = text embedding, one-hot
// author attributes (party/gender/ethnicity/state levels observed in the
// legislator table), standardized post/follower/centrality counts, and days
// since 2020-01-01. Controls are sampled 1:1 against the treated count,
// seeded; for the credibility treatment only URL-carrying posts are control
// candidates. Throws when the control pool is smaller than the treated set.
AssembledData assemble_features(const corpus::Dataset& ds,
                                const std::vector<labeling::TreatmentLabel>& labels,
                                const std::vector<visibility::OverperformingOutcome>& outcomes,
                                const AssembleOptions& opt);

struct DragonnetConfig {
    size_t trunk_width = 200;
    size_t head_width = 100;
    double alpha = 1.0;  // propensity CE weight
    double beta = 1.0;   // targeted term weight
    double lr = 1e-3;
    double momentum = 0.9;
    size_t batch_size = 64;
    size_t epochs = 30;
    size_t folds = 5;
    double pi_clamp = 0.01;    // inverse-propensity clamp [c, 1-c]
    double out_clamp = 1e-6;   // forward probability clamp
    double lr_decay = 0.5;     // multiplier on plateau
    size_t plateau_patience = 3;
    uint64_t seed = 1;
};

// All trainable weights live in one flat vector; the offsets below document
// the serialization order: w1, b1, w2, b2, then per arm (0 first) h1, hb1,
// h2, hb2, then wp, bp, epsilon. The input standardizer (mean, scale) is
// stored alongside but not trained.
struct DragonnetParams {
    size_t input_dim = 0;
    size_t trunk_width = 0;
    size_t head_width = 0;
    std::vector<double> theta;
    std::vector<double> in_mean, in_scale;

    size_t o_w1() const { return 0; }
    size_t o_b1() const { return trunk_width * input_dim; }
    size_t o_w2() const { return o_b1() + trunk_width; }
    size_t o_b2() const { return o_w2() + trunk_width * trunk_width; }
    size_t head_block() const { return head_width * trunk_width + 2 * head_width + 1; }
    size_t o_h1(int arm) const {
        return o_b2() + trunk_width + static_cast<size_t>(arm) * head_block();
    }
    size_t o_hb1(int arm) const { return o_h1(arm) + head_width * trunk_width; }
    size_t o_h2(int arm) const { return o_hb1(arm) + head_width; }
    size_t o_hb2(int arm) const { return o_h2(arm) + head_width; }
    size_t o_wp() const { return o_b2() + trunk_width + 2 * head_block(); }
    size_t o_bp() const { return o_wp() + trunk_width; }
    size_t o_eps() const { return o_bp() + 1; }
    size_t total_params() const { return o_eps() + 1; }
    double epsilon() const { return theta[o_eps()]; }
};

struct DragonnetOutput {
    double y_hat_0 = 0.5;
    double y_hat_1 = 0.5;
    double pi_hat = 0.5;
    std::vector<double> phi;  // trunk output, the deconfounded embedding
};

// Seeded weight initialization (N(0, 1/sqrt(fan_in)) per matrix, zero biases
// and epsilon); the standardizer defaults to identity until set by train().
DragonnetParams init_params(const DragonnetConfig& cfg, size_t input_dim, uint64_t seed);

DragonnetOutput forward(const DragonnetParams& p, const std::vector<double>& x,
                        double out_clamp = 1e-6);

// Mean over the batch of CE(y, yhat_t) + alpha CE(t, pi) + beta (y - y*)^2
// with y* = yhat_t + eps (t/pi_c - (1-t)/(1-pi_c)), pi_c the clamped
// propensity. `indices` selects rows of `samples`.
double loss(const DragonnetParams& p, const DragonnetConfig& cfg,
            const std::vector<Sample>& samples, const std::vector<size_t>& indices);

// Same value; also writes d(loss)/d(theta) into grad (resized to match).
double loss_and_grad(const DragonnetParams& p, const DragonnetConfig& cfg,
                     const std::vector<Sample>& samples, const std::vector<size_t>& indices,
                     std::vector<double>& grad);

struct FoldMetrics {
    size_t fold = 0;
    double auc = 0.0;       // held-out, factual-arm outcome prediction
    double macro_f1 = 0.0;  // at the Youden-optimal cutoff
    double cutoff = 0.5;
    double final_train_loss = 0.0;
    size_t n_train = 0;
    size_t n_valid = 0;
};

struct TrainResult {
    std::vector<DragonnetParams> fold_params;
    std::vector<FoldMetrics> metrics;
    std::vector<std::vector<size_t>> fold_valid_indices;
    std::vector<double> epoch_losses;  // fold-major, epochs per fold
};

// Stratified K-fold training (strata = treatment x outcome), SGD with
// momentum and plateau lr decay, deterministic under cfg.seed. Throws when a
// fold would miss a treatment arm.
TrainResult train(const AssembledData& data, const DragonnetConfig& cfg);

// Mean over the selected samples of Y*(1) - Y*(0), where Y*(1) = yhat_1 +
// eps t/pi_c and Y*(0) = yhat_0 - eps (1-t)/(1-pi_c).
double targeted_cate(const DragonnetParams& p, const DragonnetConfig& cfg,
                     const std::vector<Sample>& samples, const std::vector<size_t>& indices);

// Trunk outputs phi(x) keyed by post id. The fold-ensemble variant averages
// phi over the fold models so all samples share one coordinate system.
corpus::EmbeddingMatrix embed_with(const DragonnetParams& p, const std::vector<Sample>& samples);
corpus::EmbeddingMatrix deconfounded_embeddings(const TrainResult& result,
                                                const AssembledData& data);

// Binary checkpoint: magic "DGN1", little-endian u32 dims (input, trunk,
// head), then float32 theta in the documented order, then the standardizer
// mean and scale.
void save_checkpoint(const std::string& path, const DragonnetParams& p);
DragonnetParams load_checkpoint(const std::string& path);

// Held-out classification quality helpers (shared with the CLI).
double macro_f1_at(const std::vector<double>& scores, const std::vector<int>& labels,
                   double cutoff);

}  // namespace viseff::dragonnet
