#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "peftforge/errors.hpp"
#include "peftforge/tensor.hpp"
#include "peftforge/tokens.hpp"

namespace peftforge {

struct Triple {
    std::string subject, predicate, object;
};

struct SlotValue {
    std::string slot, value;
};

enum class PayloadKind { triples, pairs };
enum class Split { train, dev, test };
enum class StratumScheme { category, slot_count, source };

/// One structured-data-to-text example: a payload, its stratum label, and
/// the reference texts.
struct Instance {
    std::string id;
    PayloadKind payload_kind = PayloadKind::pairs;
    std::vector<Triple> triples;
    std::vector<SlotValue> pairs;
    std::string stratum;
    std::vector<std::string> references;
    Split split = Split::train;
};

struct Dataset {
    std::vector<Instance> instances;

    std::vector<Instance> of_split(Split split) const {
        std::vector<Instance> out;
        for (const auto& inst : instances)
            if (inst.split == split) out.push_back(inst);
        return out;
    }
};

StratumScheme scheme_from_string(const std::string& name);
std::string to_string(StratumScheme scheme);
Split split_from_string(const std::string& name);
std::string to_string(Split split);

/// "<S> subj <P> pred <O> obj" per triple, single-spaced, order preserved.
std::string linearize_triples(const std::vector<Triple>& triples);

/// "<S> slot <V> value" per pair, single-spaced, order preserved.
std::string linearize_mr(const std::vector<SlotValue>& pairs);

std::string linearize_instance(const Instance& instance);

/// category/source pass the stored stratum through; slot_count is the decimal
/// pair count and is only defined for slot-value payloads.
std::string derive_stratum(const Instance& instance, StratumScheme scheme);

/// Draws min(n, stratum size) train instances uniformly without replacement
/// from every stratum; deterministic in the seed; output sorted by
/// (stratum, id). Shortfalls are reported, not fatal.
std::vector<Instance> sample_few_shot(const Dataset& dataset, int n, uint64_t rng_seed,
                                      StratumScheme scheme,
                                      std::vector<std::string>* shortfall_warnings = nullptr);

Dataset import_canonical_json(const std::string& path);
void export_canonical_json(const Dataset& dataset, const std::string& path);

/// E2E-format CSV with header "mr,ref"; rows with identical MR strings merge
/// into one instance with several references. Strata are slot counts.
Dataset import_e2e_csv(const std::string& path, Split split = Split::train);

/// Whitespace word-level vocabulary with reserved control and delimiter
/// tokens; tokens under min_count map to unknown.
class Vocab {
  public:
    Vocab();

    static Vocab build(const std::vector<std::string>& corpus, int min_count = 1);

    int32_t id_of(const std::string& token) const;
    const std::string& token_of(int32_t id) const;
    std::vector<int32_t> encode(const std::string& text) const;
    /// Joins tokens with single spaces; control ids (pad/bos/eos) are skipped.
    std::string decode(const std::vector<int32_t>& ids) const;

    Index size() const { return static_cast<Index>(id_to_token_.size()); }
    uint64_t fingerprint() const;

  private:
    std::unordered_map<std::string, int32_t> token_to_id_;
    std::vector<std::string> id_to_token_;
};

std::vector<std::string> whitespace_tokens(const std::string& text);

}  // namespace peftforge
