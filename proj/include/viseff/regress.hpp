#pragma once
// Power transforms and the random-intercept mixed model for author-level
// visibility regressions.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "viseff/corpus.hpp"
#include "viseff/visibility.hpp"

namespace viseff::regress {

enum class TransformKind { YeoJohnson, BoxCox, Sqrt, CenterScale, None };

const char* to_string(TransformKind k);

// Scalar transforms with exact limit branches (lambda=0 -> log forms,
// Yeo-Johnson lambda=2 negative branch -> -log1p(-y)).
double yeo_johnson(double y, double lambda);
double box_cox(double y, double lambda);  // requires y > 0

// Profile-MLE lambda on [-3, 3] by golden-section search; the objective is
// the Gaussian log-likelihood of the transformed sample plus the log-Jacobian
// of the transform. Only YeoJohnson and BoxCox are admissible kinds.
double fit_lambda_mle(const std::vector<double>& sample, TransformKind kind);

// Applies a transform elementwise; lambda ignored for Sqrt/CenterScale/None.
// CenterScale maps to (x - mean)/sd.
std::vector<double> apply_transform(const std::vector<double>& values, TransformKind kind,
                                    double lambda);

struct Mat {
    size_t rows = 0, cols = 0;
    std::vector<double> data;  // row-major

    Mat() = default;
    Mat(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& at(size_t i, size_t j) { return data[i * cols + j]; }
    double at(size_t i, size_t j) const { return data[i * cols + j]; }
};

enum class ResponseVariable { VIP, VIF, VIPF, P25, P50, P75 };

const char* to_string(ResponseVariable rv);
bool follower_normalized(ResponseVariable rv);

struct DesignInputs {
    std::vector<visibility::VisibilitySummary> summaries;
    std::unordered_map<std::string, corpus::LegislatorRecord> legislators;
    std::unordered_map<std::string, size_t> uncivil_counts;
    std::unordered_map<std::string, size_t> low_credible_counts;
    std::unordered_map<std::string, double> centrality;
    std::unordered_map<std::string, double> network_visibility;
};

struct DesignOptions {
    ResponseVariable dv = ResponseVariable::VIP;
    // Follower count enters only when the DV is not already normalized by it.
    bool include_followers = true;
    bool include_interaction = true;  // Party x sqrt(#low_credible)
};

struct Design {
    std::vector<std::string> column_names;  // leading "(Intercept)"
    Mat x;
    std::vector<double> y;
    std::vector<std::string> groups;  // state per row
    std::vector<std::string> author_ids;
    std::vector<bool> standardized;  // per column: was it centered/scaled
    double response_lambda = 1.0;    // Yeo-Johnson lambda fitted on the DV
    double posts_lambda = 1.0;       // Box-Cox lambda on post counts
    std::optional<double> followers_lambda;
    size_t n_dropped = 0;  // authors missing a required term
};

// Assembles the author-level design: dummies Party[Rep], Gender[Men],
// Ethnicity[White]; Box-Cox post counts (and follower counts when included);
// centrality; network visibility; sqrt uncivil / low-credible counts; the
// party interaction as the elementwise product of the final party and
// low-credible columns. Continuous columns are standardized to mean 0, sd 1.
// Response is the Yeo-Johnson-transformed DV; grouping vector is the state.
// Authors with an unresolvable term (unknown gender, missing followers, ...)
// are dropped and counted. Throws on rank deficiency, naming the columns.
Design build_design(const DesignInputs& in, const DesignOptions& opt = {});

struct Coefficient {
    std::string term;
    double estimate = 0.0;
    double std_error = 0.0;
    double z = 0.0;
    double p = 1.0;
};

struct MixedModelFit {
    std::vector<Coefficient> coefficients;
    double sigma_group = 0.0;  // random-intercept sd
    double sigma_resid = 0.0;
    double r_squared = 0.0;  // var(X beta) / var(y), clamped to [0,1]
    size_t n_obs = 0;
    size_t n_groups = 0;
    double reml_criterion = 0.0;
    double lambda_ratio = 0.0;  // sigma_group^2 / sigma_resid^2
};

// Random-intercept model y = X beta + z_group + eps fit by REML. The variance
// ratio is profiled by golden-section on log10(ratio) in [-6, 3] with the
// closed-form GLS solution at each ratio; ratios below the lower bound
// collapse to OLS (sigma_group = 0). Wald z p-values.
MixedModelFit fit_mixed(const Mat& x, const std::vector<double>& y,
                        const std::vector<std::string>& groups,
                        const std::vector<std::string>& column_names);

// REML profile criterion (-2 restricted log-likelihood up to a constant) at a
// given variance ratio; exposed so the optimum can be grid-checked.
double reml_criterion_at(const Mat& x, const std::vector<double>& y,
                         const std::vector<std::string>& groups, double ratio);

}  // namespace viseff::regress
