#include "viseff/labeling.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace viseff::labeling {

std::string extract_registrable_domain(const std::string& url) {
    const auto scheme_pos = url.find("://");
    if (scheme_pos == std::string::npos || scheme_pos == 0)
        throw std::runtime_error("cannot parse URL (missing scheme): " + url);
    for (size_t i = 0; i < scheme_pos; ++i)
        if (!std::isalnum(static_cast<unsigned char>(url[i])) && url[i] != '+' && url[i] != '-' &&
            url[i] != '.')
            throw std::runtime_error("cannot parse URL (bad scheme): " + url);
    size_t start = scheme_pos + 3;
    size_t end = url.find_first_of("/?#", start);
    std::string host = url.substr(start, end == std::string::npos ? std::string::npos : end - start);
    // strip userinfo and port
    if (auto at = host.rfind('@'); at != std::string::npos) host.erase(0, at + 1);
    if (auto colon = host.find(':'); colon != std::string::npos) host.erase(colon);
    if (host.empty()) throw std::runtime_error("cannot parse URL (empty host): " + url);
    std::transform(host.begin(), host.end(), host.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    for (unsigned char c : host)
        if (!std::isalnum(c) && c != '.' && c != '-')
            throw std::runtime_error("cannot parse URL (bad host): " + url);
    if (host.rfind("www.", 0) == 0) host.erase(0, 4);
    if (host.empty()) throw std::runtime_error("cannot parse URL (empty host): " + url);
    return host;
}

namespace {

// exact match or dot-boundary suffix ("blog.badsite.com" matches "badsite.com")
std::optional<std::string> match_domain(const std::string& domain,
                                        const std::set<std::string>& list) {
    if (list.count(domain)) return domain;
    size_t pos = 0;
    while ((pos = domain.find('.', pos)) != std::string::npos) {
        ++pos;
        const std::string suffix = domain.substr(pos);
        if (list.count(suffix)) return suffix;
    }
    return std::nullopt;
}

}  // namespace

std::vector<TreatmentLabel> label_low_credible(const std::vector<corpus::PostRecord>& posts,
                                               const std::set<std::string>& domain_list) {
    std::vector<TreatmentLabel> out;
    out.reserve(posts.size());
    for (const auto& p : posts) {
        TreatmentLabel l;
        l.post_id = p.post_id;
        for (const auto& url : p.urls) {
            std::string domain;
            try {
                domain = extract_registrable_domain(url);
            } catch (const std::exception&) {
                continue;  // malformed URLs never match
            }
            if (auto m = match_domain(domain, domain_list)) {
                l.low_credible = true;
                l.matched_domain = *m;
                break;
            }
        }
        out.push_back(std::move(l));
    }
    return out;
}

RocCalibration calibrate_toxicity_cutoff(const std::vector<double>& scores,
                                         const std::vector<bool>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("scores/labels length mismatch");
    size_t n_pos = 0, n_neg = 0;
    for (bool l : labels) (l ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw std::runtime_error("cutoff calibration needs both classes present");

    // AUC via midranks: (sum of positive ranks - n_pos(n_pos+1)/2) / (n_pos*n_neg)
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(scores.size());
    for (size_t i = 0; i < order.size();) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0 + 1.0;
        for (size_t k = i; k < j; ++k) rank[order[k]] = mid;
        i = j;
    }
    double rank_sum_pos = 0.0;
    for (size_t i = 0; i < scores.size(); ++i)
        if (labels[i]) rank_sum_pos += rank[i];
    const double auc =
        (rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0) /
        (static_cast<double>(n_pos) * static_cast<double>(n_neg));

    // Youden: scan cutoffs at observed values, predict positive iff score > t.
    // Walking the sorted order from high to low accumulates TP/FP counts.
    double best_j = -2.0, best_cutoff = scores[order.back()];
    size_t tp = 0, fp = 0;
    // candidates descending; at candidate t = scores[k], counts are over scores > t
    for (size_t i = order.size(); i-- > 0;) {
        // process ties: all equal scores share the same cutoff candidate
        size_t j = i + 1;
        while (i > 0 && scores[order[i - 1]] == scores[order[i]]) --i;
        const double t = scores[order[i]];
        const double tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
        const double youden = tpr - fpr;
        if (youden > best_j || (youden == best_j && t > best_cutoff)) {
            best_j = youden;
            best_cutoff = t;
        }
        for (size_t k = i; k < j; ++k) (labels[order[k]] ? tp : fp)++;
    }
    return RocCalibration{best_cutoff, auc};
}

void label_uncivil(const std::vector<corpus::PostRecord>& posts, double cutoff,
                   std::vector<TreatmentLabel>& labels) {
    if (cutoff < 0.0 || cutoff > 1.0) throw std::invalid_argument("cutoff must be in [0,1]");
    if (labels.size() != posts.size()) throw std::invalid_argument("labels size mismatch");
    for (size_t i = 0; i < posts.size(); ++i) {
        if (posts[i].toxicity_score)
            labels[i].uncivil = *posts[i].toxicity_score > cutoff;
        else
            labels[i].uncivil.reset();
    }
}

std::vector<TreatmentLabel> label_posts(const std::vector<corpus::PostRecord>& posts,
                                        const std::set<std::string>& domain_list, double cutoff) {
    auto labels = label_low_credible(posts, domain_list);
    label_uncivil(posts, cutoff, labels);
    return labels;
}

AgreementReport annotation_agreement(const AnnotationSet& ann) {
    AgreementReport rep;
    if (ann.empty()) return rep;
    const size_t n_annot = ann.begin()->second.size();
    if (n_annot < 2) throw std::invalid_argument("need at least 2 annotators");
    for (const auto& [item, votes] : ann)
        if (votes.size() != n_annot)
            throw std::invalid_argument("item '" + item + "' has inconsistent annotator count");

    for (size_t i = 0; i < n_annot; ++i) {
        for (size_t j = i + 1; j < n_annot; ++j) {
            size_t agree = 0;
            for (const auto& [item, votes] : ann) {
                (void)item;
                if (votes[i] == votes[j]) ++agree;
            }
            rep.pairwise[{i, j}] =
                100.0 * static_cast<double>(agree) / static_cast<double>(ann.size());
        }
    }
    for (const auto& [item, votes] : ann) {
        const size_t ones = static_cast<size_t>(std::count(votes.begin(), votes.end(), 1));
        const size_t zeros = votes.size() - ones;
        if (ones == zeros) {
            rep.ties.push_back(item);
            rep.majority[item] = 0;  // even split resolves to civil
        } else {
            rep.majority[item] = ones > zeros ? 1 : 0;
        }
    }
    return rep;
}

int count_syllables(const std::string& word) {
    // vowel groups (a,e,i,o,u,y), minus a silent trailing 'e', minimum 1
    std::string w;
    for (char c : word)
        if (std::isalpha(static_cast<unsigned char>(c)))
            w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (w.empty()) return 0;
    auto is_vowel = [](char c) {
        return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
    };
    int groups = 0;
    bool in_group = false;
    for (char c : w) {
        if (is_vowel(c)) {
            if (!in_group) ++groups;
            in_group = true;
        } else {
            in_group = false;
        }
    }
    if (w.size() > 1 && w.back() == 'e') --groups;
    return std::max(1, groups);
}

double flesch_kincaid_grade(const std::string& text) {
    size_t sentences = 0;
    size_t words = 0;
    size_t syllables = 0;
    std::string word;
    bool sentence_has_words = false;
    auto flush_word = [&] {
        if (word.empty()) return;
        bool has_alpha = std::any_of(word.begin(), word.end(), [](unsigned char c) {
            return std::isalnum(c);
        });
        if (has_alpha) {
            ++words;
            syllables += static_cast<size_t>(std::max(1, count_syllables(word)));
            sentence_has_words = true;
        }
        word.clear();
    };
    for (char c : text) {
        if (c == '.' || c == '!' || c == '?') {
            flush_word();
            if (sentence_has_words) {
                ++sentences;
                sentence_has_words = false;
            }
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            flush_word();
        } else {
            word.push_back(c);
        }
    }
    flush_word();
    if (sentence_has_words) ++sentences;  // trailing sentence without terminator
    if (words == 0) throw std::runtime_error("readability needs at least one word");
    if (sentences == 0) sentences = 1;
    const double w = static_cast<double>(words);
    const double s = static_cast<double>(sentences);
    const double sy = static_cast<double>(syllables);
    return 0.39 * (w / s) + 11.8 * (sy / w) - 15.59;
}

size_t word_count(const std::string& text) {
    size_t words = 0;
    bool in_token = false, token_has_alnum = false;
    auto flush = [&] {
        if (in_token && token_has_alnum) ++words;
        in_token = token_has_alnum = false;
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else {
            in_token = true;
            if (std::isalnum(static_cast<unsigned char>(c))) token_has_alnum = true;
        }
    }
    flush();
    return words;
}

}  // namespace viseff::labeling
