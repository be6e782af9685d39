#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "viseff/labeling.hpp"

using namespace viseff;
using namespace viseff::labeling;

namespace {

corpus::PostRecord post(const std::string& id, std::vector<std::string> urls,
                        std::optional<double> tox = std::nullopt) {
    corpus::PostRecord p;
    p.post_id = id;
    p.author_id = "a";
    p.urls = std::move(urls);
    p.toxicity_score = tox;
    return p;
}

// AUC by counting pairs, half credit for tied scores
double auc_pair_oracle(const std::vector<double>& scores, const std::vector<bool>& labels) {
    double wins = 0.0, pairs = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

// best J = TPR - FPR over cutoffs at observed scores, predicting score > t;
// ties in J resolve to the larger threshold
double youden_cutoff_oracle(const std::vector<double>& scores, const std::vector<bool>& labels) {
    double n_pos = 0, n_neg = 0;
    for (bool l : labels) (l ? n_pos : n_neg) += 1.0;
    double best_j = -2.0, best_t = 0.0;
    for (double t : scores) {
        double tp = 0, fp = 0;
        for (size_t i = 0; i < scores.size(); ++i)
            if (scores[i] > t) (labels[i] ? tp : fp) += 1.0;
        const double j = tp / n_pos - fp / n_neg;
        if (j > best_j + 1e-12 || (std::fabs(j - best_j) <= 1e-12 && t > best_t)) {
            best_j = j;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace

TEST_CASE("extract_registrable_domain normalizes hosts") {
    CHECK(extract_registrable_domain("https://example.com") == "example.com");
    CHECK(extract_registrable_domain("http://Example.COM/path?q=1#frag") == "example.com");
    CHECK(extract_registrable_domain("https://www.example.com/x") == "example.com");
    CHECK(extract_registrable_domain("https://example.com:8080/a") == "example.com");
    CHECK(extract_registrable_domain("ftp://user:pw@files.example.com/f") == "files.example.com");
    CHECK(extract_registrable_domain("https://a.b.c.example.com") == "a.b.c.example.com");
    // only one leading www is dropped
    CHECK(extract_registrable_domain("https://www.www.example.com") == "www.example.com");
    CHECK(extract_registrable_domain("x+y-z://host.org") == "host.org");

    CHECK_THROWS(extract_registrable_domain("example.com"));          // no scheme
    CHECK_THROWS(extract_registrable_domain("://example.com"));       // empty scheme
    CHECK_THROWS(extract_registrable_domain("ht tp://example.com"));  // bad scheme char
    CHECK_THROWS(extract_registrable_domain("https://"));             // empty host
    CHECK_THROWS(extract_registrable_domain("https:///path"));
    CHECK_THROWS(extract_registrable_domain("https://www./x"));       // empty after www strip
    CHECK_THROWS(extract_registrable_domain("https://ex ample.com")); // bad host char
    CHECK_THROWS(extract_registrable_domain("https://host_name.com"));
}

TEST_CASE("label_low_credible matches exact domains and dot-boundary subdomains") {
    std::set<std::string> list{"badsite.com", "fake.news"};
    std::vector<corpus::PostRecord> posts{
        post("p1", {"https://badsite.com/story"}),
        post("p2", {"https://www.badsite.com/x"}),
        post("p3", {"https://blog.badsite.com/y"}),       // subdomain matches
        post("p4", {"https://notbadsite.com/z"}),         // suffix without dot boundary
        post("p5", {"https://badsite.com.evil.org/w"}),   // list entry not a suffix
        post("p6", {"https://good.org", "https://fake.news/a"}),  // second URL hits
        post("p7", {"not a url", "https://badsite.com"}),         // bad URL skipped
        post("p8", {}),
        post("p9", {"%%%"}),
    };
    auto labels = label_low_credible(posts, list);
    REQUIRE(labels.size() == posts.size());
    CHECK(labels[0].low_credible);
    CHECK(labels[0].matched_domain == "badsite.com");
    CHECK(labels[1].low_credible);
    CHECK(labels[2].low_credible);
    CHECK(labels[2].matched_domain == "badsite.com");  // the list entry, not the host
    CHECK_FALSE(labels[3].low_credible);
    CHECK_FALSE(labels[4].low_credible);
    CHECK(labels[5].low_credible);
    CHECK(labels[5].matched_domain == "fake.news");
    CHECK(labels[6].low_credible);
    CHECK_FALSE(labels[7].low_credible);
    CHECK_FALSE(labels[8].low_credible);
    for (size_t i = 0; i < labels.size(); ++i) {
        CHECK(labels[i].post_id == posts[i].post_id);
        CHECK_FALSE(labels[i].uncivil.has_value());  // this pass leaves incivility alone
    }
}

TEST_CASE("calibrate_toxicity_cutoff AUC equals brute-force pair counting") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> unif(0, 1);
    std::bernoulli_distribution coin(0.4);
    for (int rep = 0; rep < 30; ++rep) {
        const size_t n = 10 + rng() % 200;
        std::vector<double> scores(n);
        std::vector<bool> labels(n);
        bool any_pos = false, any_neg = false;
        for (size_t i = 0; i < n; ++i) {
            scores[i] = std::round(unif(rng) * 20.0) / 20.0;  // force ties
            labels[i] = coin(rng);
            (labels[i] ? any_pos : any_neg) = true;
        }
        if (!any_pos || !any_neg) continue;
        auto cal = calibrate_toxicity_cutoff(scores, labels);
        CHECK(cal.auc == doctest::Approx(auc_pair_oracle(scores, labels)).epsilon(1e-12));
        CHECK(cal.cutoff == doctest::Approx(youden_cutoff_oracle(scores, labels)).epsilon(1e-12));
    }
}

TEST_CASE("calibrate_toxicity_cutoff on separable and degenerate data") {
    // perfectly separable: cutoff sits at the top negative score
    auto cal = calibrate_toxicity_cutoff({0.1, 0.2, 0.8, 0.9}, {false, false, true, true});
    CHECK(cal.auc == 1.0);
    CHECK(cal.cutoff == 0.2);
    // anti-separable
    auto anti = calibrate_toxicity_cutoff({0.9, 0.8, 0.1, 0.2}, {false, false, true, true});
    CHECK(anti.auc == 0.0);
    // all scores equal: no information
    auto flat = calibrate_toxicity_cutoff({0.5, 0.5, 0.5}, {true, false, true});
    CHECK(flat.auc == 0.5);
    CHECK(flat.cutoff == 0.5);

    CHECK_THROWS(calibrate_toxicity_cutoff({0.5}, {true, false}));         // length mismatch
    CHECK_THROWS(calibrate_toxicity_cutoff({0.5, 0.6}, {true, true}));     // one class
    CHECK_THROWS(calibrate_toxicity_cutoff({0.5, 0.6}, {false, false}));
}

TEST_CASE("label_uncivil is strict at the cutoff and skips unscored posts") {
    std::vector<corpus::PostRecord> posts{
        post("p1", {}, 0.83), post("p2", {}, 0.82), post("p3", {}, 0.81), post("p4", {}),
        post("p5", {}, 1.0),
    };
    auto labels = label_low_credible(posts, {});
    label_uncivil(posts, 0.82, labels);
    CHECK(labels[0].uncivil == true);
    CHECK(labels[1].uncivil == false);  // exactly the cutoff is civil
    CHECK(labels[2].uncivil == false);
    CHECK_FALSE(labels[3].uncivil.has_value());
    CHECK(labels[4].uncivil == true);

    CHECK_THROWS(label_uncivil(posts, -0.1, labels));
    CHECK_THROWS(label_uncivil(posts, 1.1, labels));
    std::vector<TreatmentLabel> wrong(2);
    CHECK_THROWS(label_uncivil(posts, 0.5, wrong));
}

TEST_CASE("label_posts composes both passes") {
    std::set<std::string> list{"badsite.com"};
    std::vector<corpus::PostRecord> posts{
        post("p1", {"https://badsite.com"}, 0.9),
        post("p2", {"https://ok.org"}, 0.1),
        post("p3", {}, std::nullopt),
    };
    auto combined = label_posts(posts, list, 0.82);
    auto separate = label_low_credible(posts, list);
    label_uncivil(posts, 0.82, separate);
    REQUIRE(combined.size() == separate.size());
    for (size_t i = 0; i < combined.size(); ++i) {
        CHECK(combined[i].post_id == separate[i].post_id);
        CHECK(combined[i].uncivil == separate[i].uncivil);
        CHECK(combined[i].low_credible == separate[i].low_credible);
        CHECK(combined[i].matched_domain == separate[i].matched_domain);
    }
}

TEST_CASE("annotation_agreement computes pairwise percents and majority votes") {
    AnnotationSet ann{
        {"i1", {1, 1, 1}},  // unanimous uncivil
        {"i2", {0, 0, 1}},  // majority civil
        {"i3", {1, 0, 1}},  // majority uncivil
        {"i4", {0, 0, 0}},
    };
    auto rep = annotation_agreement(ann);
    // annotators 0,1 agree on i1,i2',i4... check by hand:
    // (0,1): i1 1=1, i2 0=0, i3 1!=0, i4 0=0 -> 3/4
    CHECK(rep.pairwise.at({0, 1}) == doctest::Approx(75.0));
    // (0,2): i1 =, i2 0!=1, i3 =, i4 = -> 75
    CHECK(rep.pairwise.at({0, 2}) == doctest::Approx(75.0));
    // (1,2): i1 =, i2 !=, i3 !=, i4 = -> 50
    CHECK(rep.pairwise.at({1, 2}) == doctest::Approx(50.0));
    CHECK(rep.pairwise.size() == 3);
    CHECK(rep.majority.at("i1") == 1);
    CHECK(rep.majority.at("i2") == 0);
    CHECK(rep.majority.at("i3") == 1);
    CHECK(rep.majority.at("i4") == 0);
    CHECK(rep.ties.empty());
}

TEST_CASE("annotation_agreement tie handling and validation") {
    AnnotationSet even{{"t1", {0, 1}}, {"t2", {1, 1}}, {"t3", {1, 0}}};
    auto rep = annotation_agreement(even);
    CHECK(rep.ties == std::vector<std::string>{"t1", "t3"});
    CHECK(rep.majority.at("t1") == 0);  // even split resolves to civil
    CHECK(rep.majority.at("t3") == 0);
    CHECK(rep.majority.at("t2") == 1);
    CHECK(rep.pairwise.at({0, 1}) == doctest::Approx(100.0 / 3.0));

    CHECK(annotation_agreement({}).pairwise.empty());
    CHECK_THROWS(annotation_agreement({{"x", {1}}}));             // one annotator
    CHECK_THROWS(annotation_agreement({{"x", {1, 0}}, {"y", {1}}}));  // ragged
}

TEST_CASE("count_syllables vowel-group heuristic") {
    CHECK(count_syllables("cat") == 1);
    CHECK(count_syllables("hello") == 2);
    CHECK(count_syllables("idea") == 2);
    CHECK(count_syllables("beautiful") == 3);   // eau / i / u
    CHECK(count_syllables("rhythm") == 1);      // y counts as a vowel
    CHECK(count_syllables("strength") == 1);
    CHECK(count_syllables("queue") == 1);       // one contiguous vowel run
    CHECK(count_syllables("the") == 1);         // trailing e drops, floor at 1
    CHECK(count_syllables("be") == 1);
    CHECK(count_syllables("e") == 1);           // single letter keeps its vowel
    CHECK(count_syllables("table") == 1);       // heuristic, not dictionary: a + (e dropped)
    CHECK(count_syllables("cat!!") == 1);       // punctuation stripped
    CHECK(count_syllables("don't") == 1);
    CHECK(count_syllables("1234") == 0);        // no letters at all
    CHECK(count_syllables("xyz") == 1);         // y vowel
    CHECK(count_syllables("tv") == 1);          // floor
}

TEST_CASE("flesch_kincaid_grade matches hand-computed fixtures") {
    // 3 words, 1 sentence, 3 syllables
    CHECK(flesch_kincaid_grade("The cat sat.") ==
          doctest::Approx(0.39 * 3.0 + 11.8 * 1.0 - 15.59).epsilon(1e-12));
    // hello(2) world(1) this(1) is(1) fine(1) = 6 syllables, 5 words, 2 sentences
    CHECK(flesch_kincaid_grade("Hello world. This is fine.") ==
          doctest::Approx(0.39 * 2.5 + 11.8 * (6.0 / 5.0) - 15.59).epsilon(1e-12));
    // no terminator still counts the trailing sentence
    CHECK(flesch_kincaid_grade("hello world") ==
          doctest::Approx(0.39 * 2.0 + 11.8 * 1.5 - 15.59).epsilon(1e-12));
    // repeated terminators do not create empty sentences
    CHECK(flesch_kincaid_grade("Stop!! Now...") ==
          doctest::Approx(flesch_kincaid_grade("Stop! Now.")).epsilon(1e-12));
    // numeric tokens count as one-syllable words
    CHECK(flesch_kincaid_grade("42 is prime.") ==
          doctest::Approx(0.39 * 3.0 + 11.8 * 1.0 - 15.59).epsilon(1e-12));
    // punctuation-only "sentences" are not sentences and "--" is not a word
    CHECK(flesch_kincaid_grade("a -- b.") ==
          doctest::Approx(flesch_kincaid_grade("a b.")).epsilon(1e-12));
    CHECK_THROWS(flesch_kincaid_grade(""));
    CHECK_THROWS(flesch_kincaid_grade("... !!! ???"));
}

TEST_CASE("word_count counts whitespace tokens containing alphanumerics") {
    CHECK(word_count("hello world") == 2);
    CHECK(word_count("  spaced   out  ") == 2);
    CHECK(word_count("a -- b") == 2);
    CHECK(word_count("42! ok?") == 2);
    CHECK(word_count("don't") == 1);
    CHECK(word_count("") == 0);
    CHECK(word_count("   ") == 0);
    CHECK(word_count("--- ***") == 0);
    CHECK(word_count("one\ttwo\nthree") == 3);
}
