#pragma once
// Incivility and low-credibility treatment labels, toxicity cutoff
// calibration, annotation utilities, readability.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "viseff/corpus.hpp"

namespace viseff::labeling {

struct TreatmentLabel {
    std::string post_id;
    std::optional<bool> uncivil;  // absent when the post has no toxicity score
    bool low_credible = false;
    std::optional<std::string> matched_domain;
};

// item id -> one binary label per annotator (same count per item)
using AnnotationSet = std::map<std::string, std::vector<int>>;

// Lowercase host, scheme/path/query/port stripped, leading "www." removed.
// Throws on inputs without a scheme://host structure.
std::string extract_registrable_domain(const std::string& url);

// low_credible iff any URL's registrable domain equals a list entry or is a
// subdomain of one (dot-boundary suffix). Unparseable URLs are skipped.
std::vector<TreatmentLabel> label_low_credible(const std::vector<corpus::PostRecord>& posts,
                                               const std::set<std::string>& domain_list);

struct RocCalibration {
    double cutoff = 0.0;  // Youden-optimal threshold, at an observed score
    double auc = 0.0;
};

// AUC = P(score+ > score-) + 0.5 P(tie); cutoff maximizes J = TPR - FPR with
// "positive" meaning score > cutoff. Ties in J resolve to the higher cutoff.
RocCalibration calibrate_toxicity_cutoff(const std::vector<double>& scores,
                                         const std::vector<bool>& labels);

// uncivil = toxicity_score > cutoff (strict); posts without scores stay
// unlabeled. Fills only the uncivil field.
void label_uncivil(const std::vector<corpus::PostRecord>& posts, double cutoff,
                   std::vector<TreatmentLabel>& labels);

// Combined pass producing one label row per post.
std::vector<TreatmentLabel> label_posts(const std::vector<corpus::PostRecord>& posts,
                                        const std::set<std::string>& domain_list, double cutoff);

struct AgreementReport {
    // (annotator i, annotator j) -> percent of items they agree on, i < j
    std::map<std::pair<size_t, size_t>, double> pairwise;
    std::map<std::string, int> majority;  // item -> majority label
    std::vector<std::string> ties;        // items with tied votes (resolved to 0)
};

AgreementReport annotation_agreement(const AnnotationSet& ann);

// 0.39*(words/sentences) + 11.8*(syllables/words) - 15.59 with a vowel-group
// syllable heuristic. Throws when the text has no words.
double flesch_kincaid_grade(const std::string& text);

// exposed for the readability tests
int count_syllables(const std::string& word);

// Whitespace tokens containing at least one alphanumeric character, the same
// word rule the readability grade uses.
size_t word_count(const std::string& text);

}  // namespace viseff::labeling
