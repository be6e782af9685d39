#pragma once
// Nonparametric tests, effect sizes, ECDFs and bootstrap CIs.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "viseff/corpus.hpp"
#include "viseff/visibility.hpp"

namespace viseff::stats {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double effect_size = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    size_t n1 = 0;
    size_t n2 = 0;
};

struct MannWhitneyOptions {
    size_t exact_threshold = 16;  // exact p by enumeration when n1+n2 <= this
    size_t bootstrap_b = 2000;
    uint64_t seed = 1;
};

// U counts (x > y) pairs plus half-ties (midrank convention). Effect size is
// the rank-biserial r = 2U/(n1 n2) - 1, so r > 0 means x tends larger.
// p is two-sided: exact by enumeration for small samples, else a
// tie-corrected normal approximation with continuity correction.
TestResult mann_whitney(const std::vector<double>& x, const std::vector<double>& y,
                        const MannWhitneyOptions& opt = {});

// D = sup |ECDF_x - ECDF_y| with the asymptotic two-sample p-value.
TestResult ks_two_sample(const std::vector<double>& x, const std::vector<double>& y);

// Pearson correlation of midranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct Ecdf {
    std::vector<double> points;     // sorted unique sample values
    std::vector<double> fractions;  // cumulative fraction at each point

    double operator()(double x) const;  // right-continuous step evaluation
};

Ecdf ecdf(std::vector<double> sample);

enum class Grouping { Party, Gender, Ethnicity, PostingFreq };
enum class DependentVariable { VIP, P25, P50, P75 };

const char* to_string(Grouping g);
const char* to_string(DependentVariable d);

// Mann-Whitney of the chosen DV between two author groups. Group 1 is Rep /
// Men / White / (<= median posts); group 2 the complement. Authors missing
// the grouping attribute are excluded; Other-party authors are excluded from
// the party split.
TestResult group_compare(const std::vector<visibility::VisibilitySummary>& summaries,
                         const std::unordered_map<std::string, corpus::LegislatorRecord>& legs,
                         Grouping grouping, DependentVariable dv,
                         const MannWhitneyOptions& opt = {});

// Splits DV values by the grouping, same rules as group_compare; exposed for
// reuse (ECDF output, median-split tests).
std::pair<std::vector<double>, std::vector<double>> split_groups(
    const std::vector<visibility::VisibilitySummary>& summaries,
    const std::unordered_map<std::string, corpus::LegislatorRecord>& legs, Grouping grouping,
    DependentVariable dv);

// Percentile CI at 2.5/97.5 from B seeded resamples. Each of `samples` is
// resampled with replacement independently; deterministic given the seed.
std::pair<double, double> bootstrap_ci(
    const std::function<double(const std::vector<std::vector<double>>&)>& statistic,
    const std::vector<std::vector<double>>& samples, size_t B, uint64_t seed);

// Significance stars: *** <0.001, ** <0.01, * <0.05, . <0.1, else empty.
std::string p_stars(double p);

// Midranks of a sample (ties get the average of the ranks they span).
std::vector<double> midranks(const std::vector<double>& values);

}  // namespace viseff::stats
