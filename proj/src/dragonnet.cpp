#include "viseff/dragonnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "viseff/common.hpp"
#include "viseff/kernels.hpp"

namespace viseff::dragonnet {

const char* to_string(Treatment t) {
    return t == Treatment::Uncivil ? "uncivil" : "low_credible";
}

namespace {

constexpr int64_t kEpoch2020 = 1577836800;  // 2020-01-01T00:00:00Z

double softplus(double a) {
    if (a > 30.0) return a;
    if (a < -30.0) return std::exp(a);
    return std::log1p(std::exp(a));
}

double sigmoid(double a) {
    if (a >= 0.0) {
        const double e = std::exp(-a);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(a);
    return e / (1.0 + e);
}

double clampp(double p, double c) { return std::min(1.0 - c, std::max(c, p)); }

}  // namespace

AssembledData assemble_features(const corpus::Dataset& ds,
                                const std::vector<labeling::TreatmentLabel>& labels,
                                const std::vector<visibility::OverperformingOutcome>& outcomes,
                                const AssembleOptions& opt) {
    using corpus::Ethnicity;
    using corpus::Gender;
    using corpus::Party;

    std::unordered_map<std::string, const labeling::TreatmentLabel*> label_by_id;
    for (const auto& l : labels) label_by_id[l.post_id] = &l;
    std::unordered_map<std::string, const visibility::OverperformingOutcome*> outcome_by_id;
    for (const auto& o : outcomes) outcome_by_id[o.post_id] = &o;

    // Observed attribute levels define the one-hot layout.
    std::set<Party> parties;
    std::set<Gender> genders;
    std::set<Ethnicity> ethnicities;
    std::set<std::string> states;
    for (const auto& [id, leg] : ds.legislators) {
        parties.insert(leg.party);
        genders.insert(leg.gender);
        ethnicities.insert(leg.ethnicity);
        states.insert(leg.state);
    }
    const std::vector<Party> party_levels(parties.begin(), parties.end());
    const std::vector<Gender> gender_levels(genders.begin(), genders.end());
    const std::vector<Ethnicity> eth_levels(ethnicities.begin(), ethnicities.end());
    const std::vector<std::string> state_levels(states.begin(), states.end());

    AssembledData out;
    out.embedding_dim = ds.embeddings.dim;
    for (size_t i = 0; i < out.embedding_dim; ++i)
        out.feature_names.push_back("emb" + std::to_string(i));
    for (auto p : party_levels)
        out.feature_names.push_back(std::string("party_") + corpus::to_string(p));
    for (auto g : gender_levels)
        out.feature_names.push_back(std::string("gender_") + corpus::to_string(g));
    for (auto e : eth_levels)
        out.feature_names.push_back(std::string("ethnicity_") + corpus::to_string(e));
    for (const auto& s : state_levels) out.feature_names.push_back("state_" + s);
    out.feature_names.push_back("posts_std");
    out.feature_names.push_back("followers_std");
    out.feature_names.push_back("centrality_std");
    out.feature_names.push_back("time_days");
    out.dim = out.feature_names.size();

    const auto centrality = corpus::in_degree_centrality(ds.graph);

    // Classify posts into treated / control-pool indices.
    std::vector<size_t> treated, pool;
    for (size_t i = 0; i < ds.posts.size(); ++i) {
        const auto& post = ds.posts[i];
        if (opt.platform && post.platform != *opt.platform) continue;
        if (labeling::word_count(post.text) < opt.min_words) {
            ++out.excluded_short;
            continue;
        }
        const std::string emb_key = post.embedding_id ? *post.embedding_id : post.post_id;
        if (!ds.embeddings.row_for(emb_key)) {
            ++out.excluded_no_embedding;
            continue;
        }
        auto lit = label_by_id.find(post.post_id);
        auto oit = outcome_by_id.find(post.post_id);
        if (lit == label_by_id.end() || oit == outcome_by_id.end()) {
            ++out.excluded_unlabeled;
            continue;
        }
        const auto& label = *lit->second;
        if (opt.treatment == Treatment::Uncivil) {
            if (!label.uncivil.has_value()) {
                ++out.excluded_unlabeled;
                continue;
            }
            (*label.uncivil ? treated : pool).push_back(i);
        } else {
            if (label.low_credible) {
                treated.push_back(i);
            } else if (post.urls.empty()) {
                ++out.excluded_no_url;  // control candidates must carry a URL
            } else {
                pool.push_back(i);
            }
        }
    }
    if (treated.empty()) throw std::runtime_error("assemble_features: no treated posts");
    if (pool.size() < treated.size())
        throw std::runtime_error("assemble_features: control pool (" +
                                 std::to_string(pool.size()) + ") smaller than treated set (" +
                                 std::to_string(treated.size()) + ")");

    std::vector<size_t> controls;
    controls.reserve(treated.size());
    Rng rng(derive_seed(opt.seed, "control-sample"));
    std::sample(pool.begin(), pool.end(), std::back_inserter(controls), treated.size(), rng);

    auto emit = [&](size_t post_idx, int t) {
        const auto& post = ds.posts[post_idx];
        const auto* leg = ds.find_legislator(post.author_id);
        Sample s;
        s.post_id = post.post_id;
        s.t = t;
        s.y = outcome_by_id.at(post.post_id)->overperforms ? 1 : 0;
        s.x.assign(out.dim, 0.0);
        size_t k = 0;
        const std::string emb_key = post.embedding_id ? *post.embedding_id : post.post_id;
        const float* e = ds.embeddings.row_for(emb_key);
        for (size_t d = 0; d < out.embedding_dim; ++d) s.x[k++] = static_cast<double>(e[d]);
        for (auto p : party_levels) s.x[k++] = leg->party == p ? 1.0 : 0.0;
        for (auto g : gender_levels) s.x[k++] = leg->gender == g ? 1.0 : 0.0;
        for (auto eth : eth_levels) s.x[k++] = leg->ethnicity == eth ? 1.0 : 0.0;
        for (const auto& st : state_levels) s.x[k++] = leg->state == st ? 1.0 : 0.0;
        const auto& author_posts = ds.posts_by_author.at(post.author_id);
        s.x[k++] = static_cast<double>(author_posts.size());
        s.x[k++] = leg->follower_count ? static_cast<double>(*leg->follower_count) : 0.0;
        auto cit = centrality.find(post.author_id);
        s.x[k++] = cit == centrality.end() ? 0.0 : cit->second;
        s.x[k++] = std::floor(static_cast<double>(post.timestamp - kEpoch2020) / 86400.0);
        out.samples.push_back(std::move(s));
    };
    for (size_t idx : treated) emit(idx, 1);
    for (size_t idx : controls) emit(idx, 0);
    out.n_treated = treated.size();
    out.n_controls = controls.size();

    // The contract standardizes the three count-ish columns over the
    // assembled set; the trainer additionally standardizes the whole input.
    const size_t base = out.embedding_dim + party_levels.size() + gender_levels.size() +
                        eth_levels.size() + state_levels.size();
    for (size_t col = base; col < base + 3; ++col) {
        double m = 0.0;
        for (const auto& s : out.samples) m += s.x[col];
        m /= static_cast<double>(out.samples.size());
        double v = 0.0;
        for (const auto& s : out.samples) v += (s.x[col] - m) * (s.x[col] - m);
        const double sd = std::sqrt(v / static_cast<double>(out.samples.size()));
        for (auto& s : out.samples) s.x[col] = sd > 0.0 ? (s.x[col] - m) / sd : 0.0;
    }
    return out;
}

DragonnetParams init_params(const DragonnetConfig& cfg, size_t input_dim, uint64_t seed) {
    DragonnetParams p;
    p.input_dim = input_dim;
    p.trunk_width = cfg.trunk_width;
    p.head_width = cfg.head_width;
    p.theta.assign(p.total_params(), 0.0);
    p.in_mean.assign(input_dim, 0.0);
    p.in_scale.assign(input_dim, 1.0);

    Rng rng(seed);
    auto fill = [&](size_t off, size_t count, size_t fan_in) {
        std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
        for (size_t i = 0; i < count; ++i) p.theta[off + i] = dist(rng);
    };
    fill(p.o_w1(), p.trunk_width * input_dim, input_dim);
    fill(p.o_w2(), p.trunk_width * p.trunk_width, p.trunk_width);
    for (int arm = 0; arm < 2; ++arm) {
        fill(p.o_h1(arm), p.head_width * p.trunk_width, p.trunk_width);
        fill(p.o_h2(arm), p.head_width, p.head_width);
    }
    fill(p.o_wp(), p.trunk_width, p.trunk_width);
    return p;
}

namespace {

// Per-sample activations reused across the batch loop.
struct Workspace {
    std::vector<double> xs, a1, z1, a2, phi;
    std::vector<double> c1[2], u[2];
    std::vector<double> gphi, ga2, gz1, ga1, gc1, tmp;

    void resize(const DragonnetParams& p) {
        xs.resize(p.input_dim);
        a1.resize(p.trunk_width);
        z1.resize(p.trunk_width);
        a2.resize(p.trunk_width);
        phi.resize(p.trunk_width);
        for (int arm = 0; arm < 2; ++arm) {
            c1[arm].resize(p.head_width);
            u[arm].resize(p.head_width);
        }
        gphi.resize(p.trunk_width);
        ga2.resize(p.trunk_width);
        gz1.resize(p.trunk_width);
        ga1.resize(p.trunk_width);
        gc1.resize(p.head_width);
        tmp.resize(std::max(p.trunk_width, p.head_width));
    }
};

struct ForwardScalars {
    double o[2];   // outcome head pre-activations
    double yh[2];  // clamped sigmoids
    double op;     // propensity pre-activation
    double pi;     // clamped sigmoid
};

void forward_ws(const DragonnetParams& p, const double* x, double out_clamp, Workspace& ws,
                ForwardScalars& fs) {
    const double* th = p.theta.data();
    for (size_t i = 0; i < p.input_dim; ++i) ws.xs[i] = (x[i] - p.in_mean[i]) / p.in_scale[i];
    kern::gemv(th + p.o_w1(), ws.xs.data(), th + p.o_b1(), ws.a1.data(), p.trunk_width,
               p.input_dim);
    for (size_t i = 0; i < p.trunk_width; ++i) ws.z1[i] = softplus(ws.a1[i]);
    kern::gemv(th + p.o_w2(), ws.z1.data(), th + p.o_b2(), ws.a2.data(), p.trunk_width,
               p.trunk_width);
    for (size_t i = 0; i < p.trunk_width; ++i) ws.phi[i] = softplus(ws.a2[i]);
    for (int arm = 0; arm < 2; ++arm) {
        kern::gemv(th + p.o_h1(arm), ws.phi.data(), th + p.o_hb1(arm), ws.c1[arm].data(),
                   p.head_width, p.trunk_width);
        for (size_t i = 0; i < p.head_width; ++i) ws.u[arm][i] = softplus(ws.c1[arm][i]);
        fs.o[arm] = kern::dot(th + p.o_h2(arm), ws.u[arm].data(), p.head_width) +
                    th[p.o_hb2(arm)];
        fs.yh[arm] = clampp(sigmoid(fs.o[arm]), out_clamp);
    }
    fs.op = kern::dot(th + p.o_wp(), ws.phi.data(), p.trunk_width) + th[p.o_bp()];
    fs.pi = clampp(sigmoid(fs.op), out_clamp);
}

}  // namespace

DragonnetOutput forward(const DragonnetParams& p, const std::vector<double>& x,
                        double out_clamp) {
    if (x.size() != p.input_dim)
        throw std::invalid_argument("forward: input dimension mismatch (got " +
                                    std::to_string(x.size()) + ", expected " +
                                    std::to_string(p.input_dim) + ")");
    Workspace ws;
    ws.resize(p);
    ForwardScalars fs;
    forward_ws(p, x.data(), out_clamp, ws, fs);
    DragonnetOutput out;
    out.y_hat_0 = fs.yh[0];
    out.y_hat_1 = fs.yh[1];
    out.pi_hat = fs.pi;
    out.phi = ws.phi;
    return out;
}

namespace {

double cross_entropy(double y, double p) { return -(y * std::log(p) + (1.0 - y) * std::log1p(-p)); }

struct SampleTerms {
    double loss;
    double go;   // d loss / d o_t (factual arm pre-activation)
    double gop;  // d loss / d op
    double geps;
};

SampleTerms per_sample_terms(const DragonnetConfig& cfg, const ForwardScalars& fs, int t,
                             int y, double eps) {
    const double yh = fs.yh[t];
    const double pic = clampp(fs.pi, cfg.pi_clamp);
    const double dy = static_cast<double>(y);
    const double dt = static_cast<double>(t);
    const double shift = dt / pic - (1.0 - dt) / (1.0 - pic);
    const double ystar = yh + eps * shift;
    const double resid = dy - ystar;

    SampleTerms st;
    st.loss = cross_entropy(dy, yh) + cfg.alpha * cross_entropy(dt, fs.pi) +
              cfg.beta * resid * resid;
    // Outcome pre-activation: CE collapses through the sigmoid; the targeted
    // term adds -2 beta resid scaled by sigmoid'.
    const double sig_prime_o = fs.yh[t] * (1.0 - fs.yh[t]);
    st.go = (yh - dy) - 2.0 * cfg.beta * resid * sig_prime_o;
    // Propensity pre-activation: alpha CE plus the targeted term through the
    // clamped pi (zero when the clamp is active).
    st.gop = cfg.alpha * (fs.pi - dt);
    if (fs.pi > cfg.pi_clamp && fs.pi < 1.0 - cfg.pi_clamp) {
        const double dshift_dpi = -dt / (pic * pic) - (1.0 - dt) / ((1.0 - pic) * (1.0 - pic));
        st.gop += -2.0 * cfg.beta * resid * eps * dshift_dpi * fs.pi * (1.0 - fs.pi);
    }
    st.geps = -2.0 * cfg.beta * resid * shift;
    return st;
}

}  // namespace

double loss(const DragonnetParams& p, const DragonnetConfig& cfg,
            const std::vector<Sample>& samples, const std::vector<size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("loss: empty batch");
    Workspace ws;
    ws.resize(p);
    ForwardScalars fs;
    double total = 0.0;
    for (size_t idx : indices) {
        const auto& s = samples[idx];
        forward_ws(p, s.x.data(), cfg.out_clamp, ws, fs);
        total += per_sample_terms(cfg, fs, s.t, s.y, p.epsilon()).loss;
    }
    return total / static_cast<double>(indices.size());
}

double loss_and_grad(const DragonnetParams& p, const DragonnetConfig& cfg,
                     const std::vector<Sample>& samples, const std::vector<size_t>& indices,
                     std::vector<double>& grad) {
    if (indices.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
    grad.assign(p.total_params(), 0.0);
    const double* th = p.theta.data();
    double* g = grad.data();
    Workspace ws;
    ws.resize(p);
    ForwardScalars fs;
    double total = 0.0;

    for (size_t idx : indices) {
        const auto& s = samples[idx];
        forward_ws(p, s.x.data(), cfg.out_clamp, ws, fs);
        const auto st = per_sample_terms(cfg, fs, s.t, s.y, p.epsilon());
        total += st.loss;
        g[p.o_eps()] += st.geps;

        const int arm = s.t;
        // Factual outcome head.
        kern::axpy(g + p.o_h2(arm), st.go, ws.u[arm].data(), p.head_width);
        g[p.o_hb2(arm)] += st.go;
        for (size_t i = 0; i < p.head_width; ++i)
            ws.gc1[i] = st.go * th[p.o_h2(arm) + i] * sigmoid(ws.c1[arm][i]);
        kern::ger(g + p.o_h1(arm), 1.0, ws.gc1.data(), ws.phi.data(), p.head_width,
                  p.trunk_width);
        kern::axpy(g + p.o_hb1(arm), 1.0, ws.gc1.data(), p.head_width);
        kern::gemv_t(th + p.o_h1(arm), ws.gc1.data(), ws.gphi.data(), p.head_width,
                     p.trunk_width);
        // Propensity head.
        kern::axpy(g + p.o_wp(), st.gop, ws.phi.data(), p.trunk_width);
        g[p.o_bp()] += st.gop;
        kern::axpy(ws.gphi.data(), st.gop, th + p.o_wp(), p.trunk_width);
        // Trunk.
        for (size_t i = 0; i < p.trunk_width; ++i) ws.ga2[i] = ws.gphi[i] * sigmoid(ws.a2[i]);
        kern::ger(g + p.o_w2(), 1.0, ws.ga2.data(), ws.z1.data(), p.trunk_width, p.trunk_width);
        kern::axpy(g + p.o_b2(), 1.0, ws.ga2.data(), p.trunk_width);
        kern::gemv_t(th + p.o_w2(), ws.ga2.data(), ws.gz1.data(), p.trunk_width, p.trunk_width);
        for (size_t i = 0; i < p.trunk_width; ++i) ws.ga1[i] = ws.gz1[i] * sigmoid(ws.a1[i]);
        kern::ger(g + p.o_w1(), 1.0, ws.ga1.data(), ws.xs.data(), p.trunk_width, p.input_dim);
        kern::axpy(g + p.o_b1(), 1.0, ws.ga1.data(), p.trunk_width);
    }

    const double inv_n = 1.0 / static_cast<double>(indices.size());
    for (auto& v : grad) v *= inv_n;
    return total * inv_n;
}

namespace {

std::vector<std::vector<size_t>> stratified_folds(const std::vector<Sample>& samples,
                                                  size_t folds, uint64_t seed) {
    std::map<std::pair<int, int>, std::vector<size_t>> strata;
    for (size_t i = 0; i < samples.size(); ++i)
        strata[{samples[i].t, samples[i].y}].push_back(i);
    std::vector<std::vector<size_t>> out(folds);
    size_t stratum_id = 0;
    for (auto& [key, idxs] : strata) {
        Rng rng(derive_seed(seed, "stratum-shuffle", stratum_id++));
        std::shuffle(idxs.begin(), idxs.end(), rng);
        for (size_t i = 0; i < idxs.size(); ++i) out[i % folds].push_back(idxs[i]);
    }
    for (auto& fold : out) std::sort(fold.begin(), fold.end());
    for (size_t f = 0; f < folds; ++f) {
        bool has[2] = {false, false};
        for (size_t i : out[f]) has[samples[i].t] = true;
        if (!has[0] || !has[1])
            throw std::runtime_error("train: stratification failed, fold " + std::to_string(f) +
                                     " lacks a treatment arm");
    }
    return out;
}

}  // namespace

double macro_f1_at(const std::vector<double>& scores, const std::vector<int>& labels,
                   double cutoff) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument("macro_f1_at: bad inputs");
    size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] > cutoff;
        if (pred && labels[i] == 1) ++tp;
        else if (pred && labels[i] == 0) ++fp;
        else if (!pred && labels[i] == 1) ++fn;
        else ++tn;
    }
    auto f1 = [](size_t tpos, size_t fpos, size_t fneg) {
        const double denom = static_cast<double>(2 * tpos + fpos + fneg);
        return denom > 0.0 ? 2.0 * static_cast<double>(tpos) / denom : 0.0;
    };
    return 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp));
}

TrainResult train(const AssembledData& data, const DragonnetConfig& cfg) {
    if (data.samples.empty()) throw std::invalid_argument("train: no samples");
    if (cfg.folds < 2) throw std::invalid_argument("train: need at least 2 folds");

    TrainResult result;
    result.fold_valid_indices = stratified_folds(data.samples, cfg.folds, cfg.seed);

    for (size_t fold = 0; fold < cfg.folds; ++fold) {
        const auto& valid_idx = result.fold_valid_indices[fold];
        std::vector<size_t> train_idx;
        train_idx.reserve(data.samples.size() - valid_idx.size());
        for (size_t f = 0; f < cfg.folds; ++f)
            if (f != fold)
                train_idx.insert(train_idx.end(), result.fold_valid_indices[f].begin(),
                                 result.fold_valid_indices[f].end());
        std::sort(train_idx.begin(), train_idx.end());

        auto params = init_params(cfg, data.dim, derive_seed(cfg.seed, "init", fold));
        // Input standardizer from the training split.
        for (size_t d = 0; d < data.dim; ++d) {
            double m = 0.0;
            for (size_t i : train_idx) m += data.samples[i].x[d];
            m /= static_cast<double>(train_idx.size());
            double v = 0.0;
            for (size_t i : train_idx) {
                const double dd = data.samples[i].x[d] - m;
                v += dd * dd;
            }
            const double sd = std::sqrt(v / static_cast<double>(train_idx.size()));
            params.in_mean[d] = m;
            params.in_scale[d] = sd > 1e-12 ? sd : 1.0;
        }

        std::vector<double> grad, velocity(params.total_params(), 0.0);
        double lr = cfg.lr;
        double best_loss = std::numeric_limits<double>::infinity();
        size_t patience = 0;
        double epoch_loss = 0.0;
        std::vector<size_t> order(train_idx);
        std::vector<size_t> batch;

        for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            Rng rng(derive_seed(cfg.seed, "shuffle", fold * 100000 + epoch));
            std::shuffle(order.begin(), order.end(), rng);
            double loss_sum = 0.0;
            for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const size_t stop = std::min(order.size(), start + cfg.batch_size);
                batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
                const double l = loss_and_grad(params, cfg, data.samples, batch, grad);
                loss_sum += l * static_cast<double>(batch.size());
                for (size_t k = 0; k < params.theta.size(); ++k) {
                    velocity[k] = cfg.momentum * velocity[k] - lr * grad[k];
                    params.theta[k] += velocity[k];
                }
            }
            epoch_loss = loss_sum / static_cast<double>(order.size());
            result.epoch_losses.push_back(epoch_loss);
            if (epoch_loss < best_loss - 1e-5) {
                best_loss = epoch_loss;
                patience = 0;
            } else if (++patience >= cfg.plateau_patience) {
                lr = std::max(1e-6, lr * cfg.lr_decay);
                patience = 0;
            }
        }

        FoldMetrics fm;
        fm.fold = fold;
        fm.n_train = train_idx.size();
        fm.n_valid = valid_idx.size();
        fm.final_train_loss = epoch_loss;
        std::vector<double> scores;
        std::vector<bool> ys;
        std::vector<int> ys_int;
        scores.reserve(valid_idx.size());
        for (size_t i : valid_idx) {
            const auto& s = data.samples[i];
            const auto o = forward(params, s.x, cfg.out_clamp);
            scores.push_back(s.t == 1 ? o.y_hat_1 : o.y_hat_0);
            ys.push_back(s.y == 1);
            ys_int.push_back(s.y);
        }
        const auto roc = labeling::calibrate_toxicity_cutoff(scores, ys);
        fm.auc = roc.auc;
        fm.cutoff = roc.cutoff;
        fm.macro_f1 = macro_f1_at(scores, ys_int, roc.cutoff);
        result.metrics.push_back(fm);
        result.fold_params.push_back(std::move(params));
    }
    return result;
}

double targeted_cate(const DragonnetParams& p, const DragonnetConfig& cfg,
                     const std::vector<Sample>& samples, const std::vector<size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("targeted_cate: empty sample set");
    Workspace ws;
    ws.resize(p);
    ForwardScalars fs;
    const double eps = p.epsilon();
    double total = 0.0;
    for (size_t idx : indices) {
        const auto& s = samples[idx];
        forward_ws(p, s.x.data(), cfg.out_clamp, ws, fs);
        const double pic = clampp(fs.pi, cfg.pi_clamp);
        const double dt = static_cast<double>(s.t);
        const double ystar1 = fs.yh[1] + eps * dt / pic;
        const double ystar0 = fs.yh[0] - eps * (1.0 - dt) / (1.0 - pic);
        total += ystar1 - ystar0;
    }
    return total / static_cast<double>(indices.size());
}

corpus::EmbeddingMatrix embed_with(const DragonnetParams& p, const std::vector<Sample>& samples) {
    corpus::EmbeddingMatrix m;
    m.dim = p.trunk_width;
    std::vector<float> row(p.trunk_width);
    Workspace ws;
    ws.resize(p);
    ForwardScalars fs;
    for (const auto& s : samples) {
        forward_ws(p, s.x.data(), 1e-6, ws, fs);
        for (size_t i = 0; i < p.trunk_width; ++i) row[i] = static_cast<float>(ws.phi[i]);
        m.add_row(s.post_id, row);
    }
    return m;
}

corpus::EmbeddingMatrix deconfounded_embeddings(const TrainResult& result,
                                                const AssembledData& data) {
    if (result.fold_params.empty()) throw std::invalid_argument("deconfounded_embeddings: no folds");
    // Average the trunk output over folds. Every sample goes through the same
    // K maps, so distances compare like with like; per-fold trunks are
    // separate coordinate systems and mixing them row-wise would make
    // cross-sample distances meaningless.
    corpus::EmbeddingMatrix m;
    m.dim = result.fold_params[0].trunk_width;
    const double k = static_cast<double>(result.fold_params.size());
    std::vector<double> acc(m.dim);
    std::vector<float> row(m.dim);
    Workspace ws;
    ForwardScalars fs;
    for (size_t i = 0; i < data.samples.size(); ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (const auto& p : result.fold_params) {
            ws.resize(p);
            forward_ws(p, data.samples[i].x.data(), 1e-6, ws, fs);
            for (size_t d = 0; d < m.dim; ++d) acc[d] += ws.phi[d];
        }
        for (size_t d = 0; d < m.dim; ++d) row[d] = static_cast<float>(acc[d] / k);
        m.add_row(data.samples[i].post_id, row);
    }
    return m;
}

void save_checkpoint(const std::string& path, const DragonnetParams& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write("DGN1", 4);
    auto put_u32 = [&](uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    put_u32(static_cast<uint32_t>(p.input_dim));
    put_u32(static_cast<uint32_t>(p.trunk_width));
    put_u32(static_cast<uint32_t>(p.head_width));
    auto put_f32s = [&](const std::vector<double>& v) {
        for (double d : v) {
            const float f = static_cast<float>(d);
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32(bits);
        }
    };
    put_f32s(p.theta);
    put_f32s(p.in_mean);
    put_f32s(p.in_scale);
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

DragonnetParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DGN1", 4) != 0)
        throw std::runtime_error("bad checkpoint magic in " + path);
    auto get_u32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        if (!in) throw std::runtime_error("truncated checkpoint: " + path);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    };
    DragonnetParams p;
    p.input_dim = get_u32();
    p.trunk_width = get_u32();
    p.head_width = get_u32();
    if (p.input_dim == 0 || p.trunk_width == 0 || p.head_width == 0)
        throw std::runtime_error("bad checkpoint dims in " + path);
    auto get_f32s = [&](std::vector<double>& v, size_t n) {
        v.resize(n);
        for (size_t i = 0; i < n; ++i) {
            const uint32_t bits = get_u32();
            float f;
            std::memcpy(&f, &bits, 4);
            v[i] = static_cast<double>(f);
        }
    };
    get_f32s(p.theta, p.total_params());
    get_f32s(p.in_mean, p.input_dim);
    get_f32s(p.in_scale, p.input_dim);
    return p;
}

}  // namespace viseff::dragonnet
