#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "peftforge/errors.hpp"

namespace peftforge {

using Candidates = std::vector<std::string>;
using ReferenceSets = std::vector<std::vector<std::string>>;

/// Lowercased whitespace tokens with punctuation split off as its own tokens;
/// the fixed tokenization every metric here uses.
std::vector<std::string> metric_tokens(const std::string& text);

struct MetricReport {
    struct Entry {
        double score = 0.0;
        bool higher_better = true;
        bool external = false;
    };
    std::map<std::string, Entry> scores;
    size_t candidate_count = 0;
    /// Metrics that were requested but could not be produced (absent file,
    /// degenerate corpus).
    std::vector<std::string> absent;

    nlohmann::json to_json() const;
};

/// Corpus-pooled clipped n-gram precision statistics behind BLEU.
struct BleuStats {
    std::vector<long long> matched, total;  // per order, 1-based order i at [i-1]
    long long candidate_len = 0;
    long long effective_ref_len = 0;

    double precision(int order, bool smooth) const;
    double brevity_penalty() const;
    double score(bool smooth = false) const;  // in [0, 100]
};

BleuStats bleu_stats(const Candidates& candidates, const ReferenceSets& references, int max_n = 4);

/// Corpus BLEU on the 0-100 scale; geometric mean of clipped modified
/// precisions times the brevity penalty; zero when any pooled precision is
/// zero unless add-one smoothing is requested.
double corpus_bleu(const Candidates& candidates, const ReferenceSets& references, int max_n = 4,
                   bool smooth = false);

/// chrF++: character n-grams (1..6) averaged with word n-grams (1..2),
/// beta = 2; per segment the best reference is taken, the corpus score is
/// the mean over segments, scaled to 0-100.
double chrf_pp(const Candidates& candidates, const ReferenceSets& references);

/// Translation edit rate: word edits (insert/delete/substitute plus greedy
/// block shifts, each cost 1) per mean reference word; lower is better.
double ter(const Candidates& candidates, const ReferenceSets& references);

/// ROUGE-L F-score in [0, 1] (beta = 1.2, the E2E convention), best reference
/// per segment, corpus mean.
double rouge_l(const Candidates& candidates, const ReferenceSets& references);

/// NIST: information-weighted n-gram precision sum with the NIST brevity
/// penalty; info weights come from the reference corpus.
double nist(const Candidates& candidates, const ReferenceSets& references, int max_n = 5);

/// CIDEr with tf-idf n-gram cosines (n = 1..4), Gaussian length penalty,
/// x10 scale; needs at least two reference sets for the idf statistics.
double cider(const Candidates& candidates, const ReferenceSets& references, int max_n = 4,
             double sigma = 6.0);

struct ExternalScores {
    bool present = false;
    std::map<std::string, double> scores;
};

/// Reads {"metric": score, ...} written by any external scorer. A missing
/// file reports absence instead of failing; non-numeric values are errors.
ExternalScores external_scores(const std::string& path);

/// Every metric this module can compute for the corpus, in one report.
/// CIDEr is skipped (and recorded absent) on single-segment corpora.
MetricReport evaluate_all(const Candidates& candidates, const ReferenceSets& references);

/// Merges an external scorer file into the report, flagged external.
void merge_external(MetricReport& report, const std::string& path);

}  // namespace peftforge
