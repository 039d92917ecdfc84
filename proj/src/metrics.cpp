#include "peftforge/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <unordered_map>

namespace peftforge {

namespace {

using Tokens = std::vector<std::string>;
using NgramCounts = std::unordered_map<std::string, long long>;

void require_aligned(const Candidates& candidates, const ReferenceSets& references,
                     const char* who) {
    if (candidates.size() != references.size())
        throw ContractError(std::string(who) + ": " + std::to_string(candidates.size()) +
                            " candidates vs " + std::to_string(references.size()) +
                            " reference sets");
    if (candidates.empty()) throw ContractError(std::string(who) + ": empty corpus");
    for (size_t i = 0; i < references.size(); ++i)
        if (references[i].empty())
            throw ContractError(std::string(who) + ": reference set " + std::to_string(i) +
                                " is empty");
}

/// Joins a token window into one key; '\x1f' cannot appear in tokens.
std::string ngram_key(const Tokens& tokens, size_t start, int order) {
    std::string key;
    for (int k = 0; k < order; ++k) {
        if (k) key += '\x1f';
        key += tokens[start + static_cast<size_t>(k)];
    }
    return key;
}

NgramCounts ngram_counts(const Tokens& tokens, int order) {
    NgramCounts counts;
    if (static_cast<int>(tokens.size()) < order) return counts;
    for (size_t i = 0; i + static_cast<size_t>(order) <= tokens.size(); ++i)
        ++counts[ngram_key(tokens, i, order)];
    return counts;
}

long long levenshtein(const Tokens& a, const Tokens& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<long long> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<long long>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<long long>(i);
        for (size_t j = 1; j <= m; ++j) {
            const long long sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

bool contains_block(const Tokens& haystack, const Tokens& block, size_t start, size_t len) {
    if (haystack.size() < len) return false;
    for (size_t i = 0; i + len <= haystack.size(); ++i) {
        bool match = true;
        for (size_t k = 0; k < len && match; ++k) match = haystack[i + k] == block[start + k];
        if (match) return true;
    }
    return false;
}

constexpr int kMaxShifts = 50;
constexpr size_t kMaxShiftLen = 10;

/// Greedy shifted edit distance: repeatedly applies the block move that most
/// reduces the plain edit distance, one edit per shift.
long long shifted_edit_distance(Tokens cand, const Tokens& ref) {
    long long shifts = 0;
    long long best = levenshtein(cand, ref);
    while (shifts < kMaxShifts && best > 0) {
        long long best_after = best;
        Tokens best_cand;
        const size_t n = cand.size();
        for (size_t start = 0; start < n; ++start) {
            for (size_t len = 1; len <= std::min(kMaxShiftLen, n - start); ++len) {
                if (!contains_block(ref, cand, start, len)) continue;
                Tokens without;
                without.reserve(n - len);
                without.insert(without.end(), cand.begin(), cand.begin() + start);
                without.insert(without.end(), cand.begin() + start + len, cand.end());
                for (size_t dest = 0; dest <= without.size(); ++dest) {
                    if (dest == start) continue;
                    Tokens moved;
                    moved.reserve(n);
                    moved.insert(moved.end(), without.begin(), without.begin() + dest);
                    moved.insert(moved.end(), cand.begin() + start, cand.begin() + start + len);
                    moved.insert(moved.end(), without.begin() + dest, without.end());
                    const long long d = levenshtein(moved, ref);
                    if (d < best_after) {
                        best_after = d;
                        best_cand = std::move(moved);
                    }
                }
            }
        }
        if (best_after >= best) break;
        cand = std::move(best_cand);
        best = best_after;
        ++shifts;
    }
    return best + shifts;
}

}  // namespace

std::vector<std::string> metric_tokens(const std::string& text) {
    Tokens tokens;
    std::string current;
    auto flush = [&]() {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };
    for (char raw : text) {
        const unsigned char c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) {
            flush();
        } else if (std::ispunct(c)) {
            flush();
            tokens.push_back(std::string(1, static_cast<char>(std::tolower(c))));
        } else {
            current += static_cast<char>(std::tolower(c));
        }
    }
    flush();
    return tokens;
}

// ---------------------------------------------------------------------------
// BLEU
// ---------------------------------------------------------------------------

BleuStats bleu_stats(const Candidates& candidates, const ReferenceSets& references, int max_n) {
    require_aligned(candidates, references, "corpus_bleu");
    if (max_n < 1) throw ContractError("corpus_bleu: max_n must be >= 1");
    BleuStats stats;
    stats.matched.assign(static_cast<size_t>(max_n), 0);
    stats.total.assign(static_cast<size_t>(max_n), 0);

    for (size_t seg = 0; seg < candidates.size(); ++seg) {
        const Tokens cand = metric_tokens(candidates[seg]);
        std::vector<Tokens> refs;
        for (const auto& r : references[seg]) refs.push_back(metric_tokens(r));

        stats.candidate_len += static_cast<long long>(cand.size());
        // effective reference length: closest to the candidate, ties -> shorter
        long long best_len = static_cast<long long>(refs[0].size());
        for (const auto& r : refs) {
            const long long len = static_cast<long long>(r.size());
            const long long cur = std::llabs(best_len - static_cast<long long>(cand.size()));
            const long long alt = std::llabs(len - static_cast<long long>(cand.size()));
            if (alt < cur || (alt == cur && len < best_len)) best_len = len;
        }
        stats.effective_ref_len += best_len;

        for (int order = 1; order <= max_n; ++order) {
            NgramCounts cand_counts = ngram_counts(cand, order);
            NgramCounts max_ref;
            for (const auto& r : refs)
                for (const auto& [gram, count] : ngram_counts(r, order))
                    max_ref[gram] = std::max(max_ref[gram], count);
            for (const auto& [gram, count] : cand_counts) {
                auto it = max_ref.find(gram);
                stats.matched[static_cast<size_t>(order - 1)] +=
                    std::min(count, it == max_ref.end() ? 0LL : it->second);
                stats.total[static_cast<size_t>(order - 1)] += count;
            }
        }
    }
    return stats;
}

double BleuStats::precision(int order, bool smooth) const {
    const long long m = matched[static_cast<size_t>(order - 1)];
    const long long t = total[static_cast<size_t>(order - 1)];
    if (smooth) return static_cast<double>(m + 1) / static_cast<double>(t + 1);
    if (t == 0) return 0.0;
    return static_cast<double>(m) / static_cast<double>(t);
}

double BleuStats::brevity_penalty() const {
    if (candidate_len == 0) return 0.0;
    if (candidate_len >= effective_ref_len) return 1.0;
    return std::exp(1.0 - static_cast<double>(effective_ref_len) /
                              static_cast<double>(candidate_len));
}

double BleuStats::score(bool smooth) const {
    double log_sum = 0.0;
    const int orders = static_cast<int>(matched.size());
    for (int order = 1; order <= orders; ++order) {
        const double p = precision(order, smooth);
        if (p <= 0.0) return 0.0;
        log_sum += std::log(p);
    }
    return 100.0 * brevity_penalty() * std::exp(log_sum / orders);
}

double corpus_bleu(const Candidates& candidates, const ReferenceSets& references, int max_n,
                   bool smooth) {
    return bleu_stats(candidates, references, max_n).score(smooth);
}

// ---------------------------------------------------------------------------
// chrF++
// ---------------------------------------------------------------------------

namespace {

constexpr int kChrfCharOrder = 6;
constexpr int kChrfWordOrder = 2;
constexpr double kChrfBeta = 2.0;

Tokens char_tokens(const std::string& text) {
    Tokens chars;
    for (char raw : text) {
        const unsigned char c = static_cast<unsigned char>(raw);
        if (std::isspace(c)) continue;
        chars.push_back(std::string(1, static_cast<char>(std::tolower(c))));
    }
    return chars;
}

/// Mean F-beta over the char and word orders present on either side.
double chrf_segment(const Tokens& cand_chars, const Tokens& cand_words, const Tokens& ref_chars,
                    const Tokens& ref_words) {
    double f_sum = 0.0;
    int counted = 0;
    auto accumulate = [&](const Tokens& c, const Tokens& r, int max_order) {
        for (int order = 1; order <= max_order; ++order) {
            NgramCounts cc = ngram_counts(c, order);
            NgramCounts rc = ngram_counts(r, order);
            long long c_total = 0, r_total = 0, match = 0;
            for (const auto& [gram, count] : cc) c_total += count;
            for (const auto& [gram, count] : rc) r_total += count;
            if (c_total == 0 && r_total == 0) continue;  // order void on both sides
            for (const auto& [gram, count] : cc) {
                auto it = rc.find(gram);
                if (it != rc.end()) match += std::min(count, it->second);
            }
            ++counted;
            if (match == 0) continue;
            const double p = static_cast<double>(match) / static_cast<double>(c_total);
            const double r_ = static_cast<double>(match) / static_cast<double>(r_total);
            const double b2 = kChrfBeta * kChrfBeta;
            f_sum += (1.0 + b2) * p * r_ / (b2 * p + r_);
        }
    };
    accumulate(cand_chars, ref_chars, kChrfCharOrder);
    accumulate(cand_words, ref_words, kChrfWordOrder);
    return counted == 0 ? 0.0 : f_sum / counted;
}

}  // namespace

double chrf_pp(const Candidates& candidates, const ReferenceSets& references) {
    require_aligned(candidates, references, "chrf_pp");
    double total = 0.0;
    for (size_t seg = 0; seg < candidates.size(); ++seg) {
        const Tokens cand_chars = char_tokens(candidates[seg]);
        const Tokens cand_words = metric_tokens(candidates[seg]);
        double best = 0.0;
        for (const auto& ref : references[seg])
            best = std::max(best, chrf_segment(cand_chars, cand_words, char_tokens(ref),
                                               metric_tokens(ref)));
        total += best;
    }
    return 100.0 * total / static_cast<double>(candidates.size());
}

// ---------------------------------------------------------------------------
// TER
// ---------------------------------------------------------------------------

double ter(const Candidates& candidates, const ReferenceSets& references) {
    require_aligned(candidates, references, "ter");
    double total_edits = 0.0;
    double total_ref_words = 0.0;
    for (size_t seg = 0; seg < candidates.size(); ++seg) {
        const Tokens cand = metric_tokens(candidates[seg]);
        long long best = -1;
        double ref_words = 0.0;
        for (const auto& ref_text : references[seg]) {
            const Tokens ref = metric_tokens(ref_text);
            if (ref.empty()) throw ContractError("ter: empty reference in segment " +
                                                 std::to_string(seg));
            ref_words += static_cast<double>(ref.size());
            const long long edits = shifted_edit_distance(cand, ref);
            if (best < 0 || edits < best) best = edits;
        }
        total_edits += static_cast<double>(best);
        total_ref_words += ref_words / static_cast<double>(references[seg].size());
    }
    if (total_ref_words <= 0.0) throw ContractError("ter: no reference words");
    return total_edits / total_ref_words;
}

// ---------------------------------------------------------------------------
// ROUGE-L
// ---------------------------------------------------------------------------

namespace {

constexpr double kRougeBeta = 1.2;

long long lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<long long> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

double rouge_l(const Candidates& candidates, const ReferenceSets& references) {
    require_aligned(candidates, references, "rouge_l");
    double total = 0.0;
    for (size_t seg = 0; seg < candidates.size(); ++seg) {
        const Tokens cand = metric_tokens(candidates[seg]);
        double best = 0.0;
        for (const auto& ref_text : references[seg]) {
            const Tokens ref = metric_tokens(ref_text);
            if (cand.empty() || ref.empty()) continue;
            const double lcs = static_cast<double>(lcs_length(cand, ref));
            if (lcs == 0.0) continue;
            const double p = lcs / static_cast<double>(cand.size());
            const double r = lcs / static_cast<double>(ref.size());
            const double b2 = kRougeBeta * kRougeBeta;
            best = std::max(best, (1.0 + b2) * r * p / (r + b2 * p));
        }
        total += best;
    }
    return total / static_cast<double>(candidates.size());
}

// ---------------------------------------------------------------------------
// NIST
// ---------------------------------------------------------------------------

double nist(const Candidates& candidates, const ReferenceSets& references, int max_n) {
    require_aligned(candidates, references, "nist");
    if (max_n < 1) throw ContractError("nist: max_n must be >= 1");

    // reference-corpus n-gram frequencies for the information weights
    std::vector<NgramCounts> corpus_counts(static_cast<size_t>(max_n));
    long long corpus_words = 0;
    for (const auto& refs : references)
        for (const auto& ref_text : refs) {
            const Tokens ref = metric_tokens(ref_text);
            corpus_words += static_cast<long long>(ref.size());
            for (int order = 1; order <= max_n; ++order)
                for (const auto& [gram, count] : ngram_counts(ref, order))
                    corpus_counts[static_cast<size_t>(order - 1)][gram] += count;
        }
    auto info = [&](const std::string& gram, int order) -> double {
        const auto& counts = corpus_counts[static_cast<size_t>(order - 1)];
        auto it = counts.find(gram);
        if (it == counts.end() || it->second == 0) return 0.0;
        if (order == 1)
            return std::log2(static_cast<double>(corpus_words) / static_cast<double>(it->second));
        const auto pos = gram.rfind('\x1f');
        const std::string prefix = gram.substr(0, pos);
        const auto pit = corpus_counts[static_cast<size_t>(order - 2)].find(prefix);
        if (pit == corpus_counts[static_cast<size_t>(order - 2)].end()) return 0.0;
        return std::log2(static_cast<double>(pit->second) / static_cast<double>(it->second));
    };

    std::vector<double> numerator(static_cast<size_t>(max_n), 0.0);
    std::vector<long long> denominator(static_cast<size_t>(max_n), 0);
    long long sys_len = 0;
    double ref_len = 0.0;
    for (size_t seg = 0; seg < candidates.size(); ++seg) {
        const Tokens cand = metric_tokens(candidates[seg]);
        sys_len += static_cast<long long>(cand.size());
        double seg_ref_words = 0.0;
        std::vector<Tokens> refs;
        for (const auto& ref_text : references[seg]) {
            refs.push_back(metric_tokens(ref_text));
            seg_ref_words += static_cast<double>(refs.back().size());
        }
        ref_len += seg_ref_words / static_cast<double>(refs.size());

        for (int order = 1; order <= max_n; ++order) {
            NgramCounts max_ref;
            for (const auto& r : refs)
                for (const auto& [gram, count] : ngram_counts(r, order))
                    max_ref[gram] = std::max(max_ref[gram], count);
            for (const auto& [gram, count] : ngram_counts(cand, order)) {
                denominator[static_cast<size_t>(order - 1)] += count;
                auto it = max_ref.find(gram);
                if (it == max_ref.end()) continue;
                numerator[static_cast<size_t>(order - 1)] +=
                    static_cast<double>(std::min(count, it->second)) * info(gram, order);
            }
        }
    }

    double score = 0.0;
    for (int order = 1; order <= max_n; ++order)
        if (denominator[static_cast<size_t>(order - 1)] > 0)
            score += numerator[static_cast<size_t>(order - 1)] /
                     static_cast<double>(denominator[static_cast<size_t>(order - 1)]);

    if (sys_len == 0 || ref_len <= 0.0) return 0.0;
    const double ratio = std::min(1.0, static_cast<double>(sys_len) / ref_len);
    // beta chosen so the penalty is 0.5 at ratio 2/3
    const double beta = std::log(0.5) / std::pow(std::log(2.0 / 3.0), 2);
    const double penalty = std::exp(beta * std::pow(std::log(ratio), 2));
    return score * penalty;
}

// ---------------------------------------------------------------------------
// CIDEr
// ---------------------------------------------------------------------------

double cider(const Candidates& candidates, const ReferenceSets& references, int max_n,
             double sigma) {
    require_aligned(candidates, references, "cider");
    if (references.size() < 2)
        throw ContractError("cider: needs a corpus of at least 2 reference sets for idf");

    const double n_docs = static_cast<double>(references.size());
    std::vector<NgramCounts> doc_freq(static_cast<size_t>(max_n));
    for (const auto& refs : references) {
        std::vector<NgramCounts> present(static_cast<size_t>(max_n));
        for (const auto& ref_text : refs) {
            const Tokens ref = metric_tokens(ref_text);
            for (int order = 1; order <= max_n; ++order)
                for (const auto& [gram, count] : ngram_counts(ref, order))
                    present[static_cast<size_t>(order - 1)][gram] = 1;
        }
        for (int order = 1; order <= max_n; ++order)
            for (const auto& [gram, one] : present[static_cast<size_t>(order - 1)])
                doc_freq[static_cast<size_t>(order - 1)][gram] += 1;
    }
    auto idf = [&](const std::string& gram, int order) {
        auto it = doc_freq[static_cast<size_t>(order - 1)].find(gram);
        const double df = it == doc_freq[static_cast<size_t>(order - 1)].end()
                              ? 1.0
                              : std::max(1.0, static_cast<double>(it->second));
        return std::log(n_docs / df);
    };
    auto tfidf = [&](const Tokens& tokens, int order) {
        std::unordered_map<std::string, double> vec;
        for (const auto& [gram, count] : ngram_counts(tokens, order))
            vec[gram] = static_cast<double>(count) * idf(gram, order);
        return vec;
    };
    auto cosine = [](const std::unordered_map<std::string, double>& a,
                     const std::unordered_map<std::string, double>& b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (const auto& [gram, w] : a) {
            na += w * w;
            auto it = b.find(gram);
            if (it != b.end()) dot += w * it->second;
        }
        for (const auto& [gram, w] : b) nb += w * w;
        if (na <= 0.0 || nb <= 0.0) return 0.0;
        return dot / (std::sqrt(na) * std::sqrt(nb));
    };

    double corpus = 0.0;
    for (size_t seg = 0; seg < candidates.size(); ++seg) {
        const Tokens cand = metric_tokens(candidates[seg]);
        std::vector<std::unordered_map<std::string, double>> cand_vecs;
        for (int order = 1; order <= max_n; ++order) cand_vecs.push_back(tfidf(cand, order));

        double over_refs = 0.0;
        for (const auto& ref_text : references[seg]) {
            const Tokens ref = metric_tokens(ref_text);
            const double diff = static_cast<double>(cand.size()) - static_cast<double>(ref.size());
            const double penalty = std::exp(-diff * diff / (2.0 * sigma * sigma));
            double over_orders = 0.0;
            for (int order = 1; order <= max_n; ++order)
                over_orders +=
                    penalty * cosine(cand_vecs[static_cast<size_t>(order - 1)], tfidf(ref, order));
            over_refs += over_orders / static_cast<double>(max_n);
        }
        corpus += 10.0 * over_refs / static_cast<double>(references[seg].size());
    }
    return corpus / static_cast<double>(candidates.size());
}

// ---------------------------------------------------------------------------
// External scorer hook and report assembly
// ---------------------------------------------------------------------------

ExternalScores external_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) return {};  // absent file: explicit non-failure
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("external scores '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw ParseError("external scores '" + path + "': expected an object");
    ExternalScores out;
    out.present = true;
    for (const auto& [name, value] : j.items()) {
        if (!value.is_number())
            throw ParseError("external scores '" + path + "': metric '" + name +
                             "' is not numeric");
        out.scores[name] = value.get<double>();
    }
    return out;
}

MetricReport evaluate_all(const Candidates& candidates, const ReferenceSets& references) {
    MetricReport report;
    report.candidate_count = candidates.size();
    report.scores["BLEU"] = {corpus_bleu(candidates, references), true, false};
    report.scores["chrF++"] = {chrf_pp(candidates, references), true, false};
    report.scores["TER"] = {ter(candidates, references), false, false};
    report.scores["ROUGE-L"] = {rouge_l(candidates, references), true, false};
    report.scores["NIST"] = {nist(candidates, references), true, false};
    if (references.size() >= 2)
        report.scores["CIDEr"] = {cider(candidates, references), true, false};
    else
        report.absent.push_back("CIDEr");
    return report;
}

void merge_external(MetricReport& report, const std::string& path) {
    ExternalScores ext = external_scores(path);
    if (!ext.present) {
        report.absent.push_back("external:" + path);
        return;
    }
    for (const auto& [name, score] : ext.scores) report.scores[name] = {score, true, true};
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json scores_json = nlohmann::json::object();
    for (const auto& [name, entry] : scores)
        scores_json[name] = {{"score", entry.score},
                             {"higher_better", entry.higher_better},
                             {"external", entry.external}};
    return nlohmann::json{{"scores", scores_json},
                          {"candidate_count", candidate_count},
                          {"absent", absent}};
}

}  // namespace peftforge
