#include "viseff/regress.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "viseff/common.hpp"

namespace viseff::regress {

const char* to_string(TransformKind k) {
    switch (k) {
        case TransformKind::YeoJohnson: return "yeo_johnson";
        case TransformKind::BoxCox: return "box_cox";
        case TransformKind::Sqrt: return "sqrt";
        case TransformKind::CenterScale: return "center_scale";
        case TransformKind::None: return "none";
    }
    return "?";
}

double yeo_johnson(double y, double lambda) {
    if (y >= 0.0) {
        if (lambda == 0.0) return std::log1p(y);
        return std::expm1(lambda * std::log1p(y)) / lambda;
    }
    const double two_ml = 2.0 - lambda;
    if (two_ml == 0.0) return -std::log1p(-y);
    return -std::expm1(two_ml * std::log1p(-y)) / two_ml;
}

double box_cox(double y, double lambda) {
    if (y <= 0.0) throw std::domain_error("box_cox: requires strictly positive values");
    if (lambda == 0.0) return std::log(y);
    return std::expm1(lambda * std::log(y)) / lambda;
}

namespace {

template <class F>
double golden_max(F f, double lo, double hi, int iters) {
    const double gr = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters; ++i) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

double population_variance(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

}  // namespace

double fit_lambda_mle(const std::vector<double>& sample, TransformKind kind) {
    if (kind != TransformKind::YeoJohnson && kind != TransformKind::BoxCox)
        throw std::invalid_argument("fit_lambda_mle: only yeo_johnson and box_cox have a lambda");
    if (sample.size() < 10) throw std::invalid_argument("fit_lambda_mle: need at least 10 values");
    if (population_variance(sample) == 0.0)
        throw std::invalid_argument("fit_lambda_mle: constant sample");
    const double n = static_cast<double>(sample.size());

    // Log-Jacobian slope: sum of log-derivative factors that multiply (lambda-1).
    double jac = 0.0;
    if (kind == TransformKind::BoxCox) {
        for (double y : sample) {
            if (y <= 0.0) throw std::domain_error("fit_lambda_mle: box_cox needs positive data");
            jac += std::log(y);
        }
    } else {
        for (double y : sample) {
            const double t = std::log1p(std::fabs(y));
            jac += (y >= 0.0) ? t : -t;
        }
    }

    std::vector<double> transformed(sample.size());
    auto loglik = [&](double lambda) {
        for (size_t i = 0; i < sample.size(); ++i)
            transformed[i] = (kind == TransformKind::BoxCox) ? box_cox(sample[i], lambda)
                                                             : yeo_johnson(sample[i], lambda);
        const double var = population_variance(transformed);
        if (!(var > 0.0) || !std::isfinite(var)) return -std::numeric_limits<double>::infinity();
        return -0.5 * n * std::log(var) + (lambda - 1.0) * jac;
    };
    return golden_max(loglik, -3.0, 3.0, 100);
}

std::vector<double> apply_transform(const std::vector<double>& values, TransformKind kind,
                                    double lambda) {
    std::vector<double> out(values.size());
    switch (kind) {
        case TransformKind::YeoJohnson:
            for (size_t i = 0; i < values.size(); ++i) out[i] = yeo_johnson(values[i], lambda);
            break;
        case TransformKind::BoxCox:
            for (size_t i = 0; i < values.size(); ++i) out[i] = box_cox(values[i], lambda);
            break;
        case TransformKind::Sqrt:
            for (size_t i = 0; i < values.size(); ++i) {
                if (values[i] < 0.0) throw std::domain_error("sqrt transform: negative value");
                out[i] = std::sqrt(values[i]);
            }
            break;
        case TransformKind::CenterScale: {
            double m = 0.0;
            for (double v : values) m += v;
            m /= static_cast<double>(values.empty() ? 1 : values.size());
            double s = 0.0;
            for (double v : values) s += (v - m) * (v - m);
            s = values.size() > 1 ? std::sqrt(s / static_cast<double>(values.size() - 1)) : 0.0;
            for (size_t i = 0; i < values.size(); ++i)
                out[i] = s > 0.0 ? (values[i] - m) / s : 0.0;
            break;
        }
        case TransformKind::None: out = values; break;
    }
    return out;
}

const char* to_string(ResponseVariable rv) {
    switch (rv) {
        case ResponseVariable::VIP: return "v_ip";
        case ResponseVariable::VIF: return "v_if";
        case ResponseVariable::VIPF: return "v_ipf";
        case ResponseVariable::P25: return "p25";
        case ResponseVariable::P50: return "p50";
        case ResponseVariable::P75: return "p75";
    }
    return "?";
}

bool follower_normalized(ResponseVariable rv) {
    return rv == ResponseVariable::VIF || rv == ResponseVariable::VIPF;
}

namespace {

// Standardize in place to mean 0 / sd 1 (sample sd). Zero-variance columns
// are centered only; the rank check downstream reports them by name.
void standardize(std::vector<double>& col) {
    const size_t n = col.size();
    if (n < 2) return;
    double m = 0.0;
    for (double v : col) m += v;
    m /= static_cast<double>(n);
    double s = 0.0;
    for (double v : col) s += (v - m) * (v - m);
    s = std::sqrt(s / static_cast<double>(n - 1));
    for (auto& v : col) v = s > 0.0 ? (v - m) / s : v - m;
}

}  // namespace

Design build_design(const DesignInputs& in, const DesignOptions& opt) {
    using corpus::Ethnicity;
    using corpus::Gender;
    using corpus::Party;

    const bool with_followers = opt.include_followers && !follower_normalized(opt.dv);

    struct Row {
        const visibility::VisibilitySummary* s;
        const corpus::LegislatorRecord* leg;
        double dv;
    };
    std::vector<Row> rows;
    size_t dropped = 0;
    for (const auto& s : in.summaries) {
        auto it = in.legislators.find(s.author_id);
        if (it == in.legislators.end()) {
            ++dropped;
            continue;
        }
        const auto& leg = it->second;
        const bool attrs_ok = (leg.party == Party::Dem || leg.party == Party::Rep) &&
                              (leg.gender == Gender::Men || leg.gender == Gender::Women) &&
                              (leg.ethnicity == Ethnicity::White ||
                               leg.ethnicity == Ethnicity::NonWhite) &&
                              !leg.state.empty();
        if (!attrs_ok) {
            ++dropped;
            continue;
        }
        if (with_followers && !(leg.follower_count && *leg.follower_count > 0)) {
            ++dropped;
            continue;
        }
        double dv = 0.0;
        bool have_dv = true;
        switch (opt.dv) {
            case ResponseVariable::VIP: dv = s.v_ip; break;
            case ResponseVariable::VIF:
                if (s.v_if) dv = *s.v_if;
                else have_dv = false;
                break;
            case ResponseVariable::VIPF:
                if (s.v_ipf) dv = *s.v_ipf;
                else have_dv = false;
                break;
            case ResponseVariable::P25: dv = s.percentile_25; break;
            case ResponseVariable::P50: dv = s.percentile_50; break;
            case ResponseVariable::P75: dv = s.percentile_75; break;
        }
        if (!have_dv) {
            ++dropped;
            continue;
        }
        rows.push_back({&s, &leg, dv});
    }
    if (rows.size() < 3) throw std::invalid_argument("build_design: fewer than 3 usable authors");

    const size_t n = rows.size();
    auto lookup = [](const std::unordered_map<std::string, double>& m, const std::string& k) {
        auto it = m.find(k);
        return it == m.end() ? 0.0 : it->second;
    };
    auto count_of = [](const std::unordered_map<std::string, size_t>& m, const std::string& k) {
        auto it = m.find(k);
        return it == m.end() ? 0.0 : static_cast<double>(it->second);
    };

    std::vector<double> dv_raw(n), posts_raw(n), followers_raw(n), centr(n), netvis(n),
        lowcred(n), uncivil(n), party_col(n), gender_col(n), eth_col(n);
    for (size_t i = 0; i < n; ++i) {
        const auto& r = rows[i];
        dv_raw[i] = r.dv;
        posts_raw[i] = static_cast<double>(r.s->post_count);
        followers_raw[i] = with_followers ? static_cast<double>(*r.leg->follower_count) : 0.0;
        centr[i] = lookup(in.centrality, r.s->author_id);
        netvis[i] = lookup(in.network_visibility, r.s->author_id);
        lowcred[i] = count_of(in.low_credible_counts, r.s->author_id);
        uncivil[i] = count_of(in.uncivil_counts, r.s->author_id);
        party_col[i] = r.leg->party == Party::Rep ? 1.0 : 0.0;
        gender_col[i] = r.leg->gender == Gender::Men ? 1.0 : 0.0;
        eth_col[i] = r.leg->ethnicity == Ethnicity::White ? 1.0 : 0.0;
    }

    Design d;
    d.response_lambda = fit_lambda_mle(dv_raw, TransformKind::YeoJohnson);
    d.y = apply_transform(dv_raw, TransformKind::YeoJohnson, d.response_lambda);

    d.posts_lambda = fit_lambda_mle(posts_raw, TransformKind::BoxCox);
    auto posts_t = apply_transform(posts_raw, TransformKind::BoxCox, d.posts_lambda);
    std::vector<double> followers_t;
    if (with_followers) {
        d.followers_lambda = fit_lambda_mle(followers_raw, TransformKind::BoxCox);
        followers_t = apply_transform(followers_raw, TransformKind::BoxCox, *d.followers_lambda);
    }
    auto lowcred_t = apply_transform(lowcred, TransformKind::Sqrt, 0.0);
    auto uncivil_t = apply_transform(uncivil, TransformKind::Sqrt, 0.0);

    standardize(posts_t);
    if (with_followers) standardize(followers_t);
    standardize(centr);
    standardize(netvis);
    standardize(lowcred_t);
    standardize(uncivil_t);

    std::vector<std::pair<std::string, const std::vector<double>*>> cols;
    std::vector<double> ones(n, 1.0);
    cols.emplace_back("(Intercept)", &ones);
    cols.emplace_back("party_rep", &party_col);
    cols.emplace_back("gender_men", &gender_col);
    cols.emplace_back("ethnicity_white", &eth_col);
    cols.emplace_back("posts_boxcox", &posts_t);
    if (with_followers) cols.emplace_back("followers_boxcox", &followers_t);
    cols.emplace_back("centrality", &centr);
    cols.emplace_back("network_visibility", &netvis);
    cols.emplace_back("low_credible_sqrt", &lowcred_t);
    cols.emplace_back("uncivil_sqrt", &uncivil_t);
    std::vector<double> interaction(n, 0.0);
    if (opt.include_interaction) {
        for (size_t i = 0; i < n; ++i) interaction[i] = party_col[i] * lowcred_t[i];
        cols.emplace_back("party_rep:low_credible_sqrt", &interaction);
    }

    d.x = Mat(n, cols.size());
    for (size_t j = 0; j < cols.size(); ++j) {
        d.column_names.push_back(cols[j].first);
        const auto& src = *cols[j].second;
        for (size_t i = 0; i < n; ++i) d.x.at(i, j) = src[i];
    }
    const std::vector<std::string> std_cols = {"posts_boxcox",    "followers_boxcox",
                                               "centrality",      "network_visibility",
                                               "low_credible_sqrt", "uncivil_sqrt"};
    for (const auto& name : d.column_names)
        d.standardized.push_back(std::find(std_cols.begin(), std_cols.end(), name) !=
                                 std_cols.end());
    d.groups.reserve(n);
    d.author_ids.reserve(n);
    for (const auto& r : rows) {
        d.groups.push_back(r.leg->state);
        d.author_ids.push_back(r.s->author_id);
    }
    d.n_dropped = dropped;

    // Rank check: columns pivoted past the numerical rank are the dependent ones.
    Eigen::MatrixXd xm(n, cols.size());
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < cols.size(); ++j) xm(static_cast<Eigen::Index>(i),
                                                    static_cast<Eigen::Index>(j)) = d.x.at(i, j);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xm);
    qr.setThreshold(1e-8);
    if (static_cast<size_t>(qr.rank()) < cols.size()) {
        const auto perm = qr.colsPermutation().indices();
        std::string names;
        for (Eigen::Index k = qr.rank(); k < perm.size(); ++k) {
            if (!names.empty()) names += ", ";
            names += d.column_names[static_cast<size_t>(perm[k])];
        }
        throw std::invalid_argument("build_design: rank-deficient design; collinear columns: " +
                                    names);
    }
    return d;
}

namespace {

struct GroupSums {
    std::vector<Eigen::VectorXd> sx;  // per-group column sums of X
    std::vector<double> sy;           // per-group sums of y
    std::vector<double> m;            // group sizes
};

struct RemlParts {
    Eigen::MatrixXd xtx;
    Eigen::VectorXd xty;
    double yty = 0.0;
    GroupSums g;
    size_t n = 0, p = 0;
};

RemlParts precompute(const Mat& x, const std::vector<double>& y,
                     const std::vector<std::string>& groups) {
    RemlParts parts;
    parts.n = x.rows;
    parts.p = x.cols;
    const auto n = static_cast<Eigen::Index>(x.rows);
    const auto p = static_cast<Eigen::Index>(x.cols);
    Eigen::MatrixXd xm(n, p);
    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        yv(i) = y[static_cast<size_t>(i)];
        for (Eigen::Index j = 0; j < p; ++j)
            xm(i, j) = x.at(static_cast<size_t>(i), static_cast<size_t>(j));
    }
    parts.xtx = xm.transpose() * xm;
    parts.xty = xm.transpose() * yv;
    parts.yty = yv.squaredNorm();

    std::map<std::string, size_t> ids;
    std::vector<size_t> gid(x.rows);
    for (size_t i = 0; i < x.rows; ++i)
        gid[i] = ids.emplace(groups[i], ids.size()).first->second;
    const size_t ng = ids.size();
    parts.g.sx.assign(ng, Eigen::VectorXd::Zero(p));
    parts.g.sy.assign(ng, 0.0);
    parts.g.m.assign(ng, 0.0);
    for (size_t i = 0; i < x.rows; ++i) {
        parts.g.sx[gid[i]] += xm.row(static_cast<Eigen::Index>(i)).transpose();
        parts.g.sy[gid[i]] += y[i];
        parts.g.m[gid[i]] += 1.0;
    }
    return parts;
}

struct RemlEval {
    double criterion;
    Eigen::VectorXd beta;
    Eigen::MatrixXd a;  // X' V0^-1 X
    double rvr;         // r' V0^-1 r
    double logdet_v;
};

// V0 = I + ratio * block-ones; V0^-1 applied through group sums only.
RemlEval eval_reml(const RemlParts& parts, double ratio) {
    Eigen::MatrixXd a = parts.xtx;
    Eigen::VectorXd b = parts.xty;
    double q = parts.yty;
    double logdet_v = 0.0;
    for (size_t gidx = 0; gidx < parts.g.m.size(); ++gidx) {
        const double mg = parts.g.m[gidx];
        const double c = ratio / (1.0 + mg * ratio);
        a.noalias() -= c * (parts.g.sx[gidx] * parts.g.sx[gidx].transpose());
        b -= c * parts.g.sy[gidx] * parts.g.sx[gidx];
        q -= c * parts.g.sy[gidx] * parts.g.sy[gidx];
        logdet_v += std::log1p(mg * ratio);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("fit_mixed: GLS normal equations not positive definite");
    const Eigen::VectorXd beta = ldlt.solve(b);
    double rvr = q - beta.dot(b);
    rvr = std::max(rvr, 1e-300);
    double logdet_a = 0.0;
    const auto& dvec = ldlt.vectorD();
    for (Eigen::Index i = 0; i < dvec.size(); ++i) logdet_a += std::log(std::fabs(dvec(i)));
    const double df = static_cast<double>(parts.n - parts.p);
    RemlEval ev;
    ev.criterion = df * std::log(rvr / df) + logdet_v + logdet_a;
    ev.beta = beta;
    ev.a = a;
    ev.rvr = rvr;
    ev.logdet_v = logdet_v;
    return ev;
}

template <class F>
double golden_min(F f, double lo, double hi, int iters) {
    const double gr = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

double reml_criterion_at(const Mat& x, const std::vector<double>& y,
                         const std::vector<std::string>& groups, double ratio) {
    const auto parts = precompute(x, y, groups);
    return eval_reml(parts, ratio).criterion;
}

MixedModelFit fit_mixed(const Mat& x, const std::vector<double>& y,
                        const std::vector<std::string>& groups,
                        const std::vector<std::string>& column_names) {
    if (x.rows != y.size() || x.rows != groups.size())
        throw std::invalid_argument("fit_mixed: row count mismatch");
    if (x.cols == 0 || x.rows <= x.cols)
        throw std::invalid_argument("fit_mixed: need more observations than columns");
    if (column_names.size() != x.cols)
        throw std::invalid_argument("fit_mixed: column name count mismatch");

    const auto parts = precompute(x, y, groups);
    if (parts.g.m.size() < 2) throw std::invalid_argument("fit_mixed: need at least 2 groups");

    std::ostringstream trace;
    auto crit_at_log10 = [&](double t) {
        const double val = eval_reml(parts, std::pow(10.0, t)).criterion;
        trace << " (log10=" << t << ", crit=" << val << ")";
        if (!std::isfinite(val))
            throw std::runtime_error("fit_mixed: non-finite REML criterion; trace:" + trace.str());
        return val;
    };
    const double t_opt = golden_min(crit_at_log10, -6.0, 3.0, 80);
    double ratio = std::pow(10.0, t_opt);

    // Boundary: treat near-lower-bound optima as sigma_group = 0 (exact OLS).
    const auto ev_zero = eval_reml(parts, 0.0);
    auto ev = eval_reml(parts, ratio);
    if (t_opt <= -5.9 || ev_zero.criterion <= ev.criterion) {
        ratio = 0.0;
        ev = ev_zero;
    }

    MixedModelFit fit;
    fit.n_obs = parts.n;
    fit.n_groups = parts.g.m.size();
    fit.lambda_ratio = ratio;
    fit.reml_criterion = ev.criterion;
    const double df = static_cast<double>(parts.n - parts.p);
    const double sigma2_e = ev.rvr / df;
    fit.sigma_resid = std::sqrt(sigma2_e);
    fit.sigma_group = std::sqrt(ratio * sigma2_e);

    const Eigen::MatrixXd cov = sigma2_e * ev.a.ldlt().solve(
                                               Eigen::MatrixXd::Identity(
                                                   static_cast<Eigen::Index>(parts.p),
                                                   static_cast<Eigen::Index>(parts.p)));
    for (size_t j = 0; j < parts.p; ++j) {
        Coefficient c;
        c.term = column_names[j];
        c.estimate = ev.beta(static_cast<Eigen::Index>(j));
        c.std_error = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(j),
                                                  static_cast<Eigen::Index>(j))));
        c.z = c.std_error > 0.0 ? c.estimate / c.std_error : 0.0;
        c.p = 2.0 * (1.0 - norm_cdf(std::fabs(c.z)));
        c.p = std::min(1.0, std::max(0.0, c.p));
        fit.coefficients.push_back(c);
    }

    // Marginal R^2: variance of the fixed-effect fit over variance of y.
    double fit_var = 0.0, y_var = 0.0;
    {
        std::vector<double> xb(x.rows, 0.0);
        for (size_t i = 0; i < x.rows; ++i)
            for (size_t j = 0; j < x.cols; ++j)
                xb[i] += x.at(i, j) * ev.beta(static_cast<Eigen::Index>(j));
        fit_var = population_variance(xb);
        y_var = population_variance(y);
    }
    fit.r_squared = y_var > 0.0 ? std::min(1.0, std::max(0.0, fit_var / y_var)) : 0.0;
    return fit;
}

}  // namespace viseff::regress
