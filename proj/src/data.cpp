#include "peftforge/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "peftforge/rng.hpp"

namespace peftforge {

namespace {

const std::vector<std::string> kReserved = {"<pad>", "<bos>", "<eos>", "<unk>",
                                            "<S>",   "<P>",   "<O>",   "<V>"};
const std::vector<std::string> kDelimiters = {"<S>", "<P>", "<O>", "<V>"};

void validate_field(const std::string& field, const std::string& what, size_t record,
                    bool allow_empty = false) {
    if (field.empty()) {
        if (allow_empty) return;
        throw ParseError("record " + std::to_string(record) + ": empty " + what);
    }
    if (field.front() == ' ' || field.back() == ' ' || field.front() == '\t' ||
        field.back() == '\t')
        throw ParseError("record " + std::to_string(record) + ": " + what +
                         " has leading or trailing whitespace");
    for (const auto& delim : kDelimiters)
        if (field.find(delim) != std::string::npos)
            throw ParseError("record " + std::to_string(record) + ": " + what +
                             " contains the delimiter literal " + delim);
}

void validate_instance(const Instance& inst, size_t record) {
    if (inst.payload_kind == PayloadKind::triples) {
        if (inst.triples.empty())
            throw ParseError("record " + std::to_string(record) + ": empty triple payload");
        for (const auto& t : inst.triples) {
            validate_field(t.subject, "subject", record);
            validate_field(t.predicate, "predicate", record);
            validate_field(t.object, "object", record, /*allow_empty=*/true);
        }
    } else {
        if (inst.pairs.empty())
            throw ParseError("record " + std::to_string(record) + ": empty slot-value payload");
        for (const auto& p : inst.pairs) {
            validate_field(p.slot, "slot", record);
            validate_field(p.value, "value", record, /*allow_empty=*/true);
        }
    }
    if (inst.split != Split::test && inst.references.empty())
        throw ParseError("record " + std::to_string(record) +
                         ": train/dev instance without references");
}

}  // namespace

StratumScheme scheme_from_string(const std::string& name) {
    if (name == "category") return StratumScheme::category;
    if (name == "slot_count") return StratumScheme::slot_count;
    if (name == "source") return StratumScheme::source;
    throw ConfigError("unknown stratum scheme '" + name + "'");
}

std::string to_string(StratumScheme scheme) {
    switch (scheme) {
        case StratumScheme::category: return "category";
        case StratumScheme::slot_count: return "slot_count";
        case StratumScheme::source: return "source";
    }
    return "category";
}

Split split_from_string(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "dev") return Split::dev;
    if (name == "test") return Split::test;
    throw ConfigError("unknown split '" + name + "'");
}

std::string to_string(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "train";
}

std::string linearize_triples(const std::vector<Triple>& triples) {
    if (triples.empty()) throw ContractError("linearize_triples: empty payload");
    std::ostringstream os;
    for (size_t i = 0; i < triples.size(); ++i) {
        if (i) os << ' ';
        os << "<S> " << triples[i].subject << " <P> " << triples[i].predicate << " <O> "
           << triples[i].object;
    }
    return os.str();
}

std::string linearize_mr(const std::vector<SlotValue>& pairs) {
    if (pairs.empty()) throw ContractError("linearize_mr: empty payload");
    std::ostringstream os;
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (i) os << ' ';
        os << "<S> " << pairs[i].slot << " <V> " << pairs[i].value;
    }
    return os.str();
}

std::string linearize_instance(const Instance& instance) {
    return instance.payload_kind == PayloadKind::triples ? linearize_triples(instance.triples)
                                                         : linearize_mr(instance.pairs);
}

std::string derive_stratum(const Instance& instance, StratumScheme scheme) {
    if (scheme == StratumScheme::slot_count) {
        if (instance.payload_kind != PayloadKind::pairs)
            throw ContractError("derive_stratum: slot_count needs a slot-value payload");
        return std::to_string(instance.pairs.size());
    }
    return instance.stratum;
}

std::vector<Instance> sample_few_shot(const Dataset& dataset, int n, uint64_t rng_seed,
                                      StratumScheme scheme,
                                      std::vector<std::string>* shortfall_warnings) {
    if (dataset.instances.empty()) throw ContractError("sample_few_shot: empty dataset");
    if (n < 1) throw ContractError("sample_few_shot: shots must be >= 1");

    std::map<std::string, std::vector<const Instance*>> strata;
    for (const auto& inst : dataset.instances)
        if (inst.split == Split::train) strata[derive_stratum(inst, scheme)].push_back(&inst);

    Rng rng(rng_seed);
    std::vector<Instance> sampled;
    for (auto& [label, members] : strata) {
        std::sort(members.begin(), members.end(),
                  [](const Instance* a, const Instance* b) { return a->id < b->id; });
        const size_t take = std::min<size_t>(static_cast<size_t>(n), members.size());
        if (take < static_cast<size_t>(n) && shortfall_warnings)
            shortfall_warnings->push_back("stratum '" + label + "' has only " +
                                          std::to_string(members.size()) + " train instances for " +
                                          std::to_string(n) + " shots");
        // partial Fisher-Yates: the first `take` entries are a uniform subset
        for (size_t i = 0; i < take; ++i) {
            const size_t j = i + static_cast<size_t>(rng.next_below(members.size() - i));
            std::swap(members[i], members[j]);
        }
        for (size_t i = 0; i < take; ++i) {
            Instance copy = *members[i];
            copy.stratum = label;
            sampled.push_back(std::move(copy));
        }
    }
    std::sort(sampled.begin(), sampled.end(), [](const Instance& a, const Instance& b) {
        return std::tie(a.stratum, a.id) < std::tie(b.stratum, b.id);
    });
    return sampled;
}

Dataset import_canonical_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("malformed JSON in '" + path + "': " + e.what());
    }
    if (!j.contains("instances") || !j["instances"].is_array())
        throw ParseError("dataset '" + path + "' has no instances array");

    Dataset dataset;
    size_t record = 0;
    for (const auto& ji : j["instances"]) {
        ++record;
        try {
            Instance inst;
            inst.id = ji.at("id").get<std::string>();
            const std::string kind = ji.at("payload_kind").get<std::string>();
            if (kind == "triples") {
                inst.payload_kind = PayloadKind::triples;
                for (const auto& jt : ji.at("triples"))
                    inst.triples.push_back({jt.at("subject").get<std::string>(),
                                            jt.at("predicate").get<std::string>(),
                                            jt.at("object").get<std::string>()});
            } else if (kind == "pairs") {
                inst.payload_kind = PayloadKind::pairs;
                for (const auto& jp : ji.at("pairs"))
                    inst.pairs.push_back(
                        {jp.at("slot").get<std::string>(), jp.at("value").get<std::string>()});
            } else {
                throw ParseError("record " + std::to_string(record) + ": unknown payload_kind '" +
                                 kind + "'");
            }
            inst.stratum = ji.value("stratum", std::string());
            for (const auto& jr : ji.value("references", nlohmann::json::array()))
                inst.references.push_back(jr.get<std::string>());
            inst.split = split_from_string(ji.value("split", std::string("train")));
            validate_instance(inst, record);
            dataset.instances.push_back(std::move(inst));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("record " + std::to_string(record) + " in '" + path +
                             "': " + e.what());
        }
    }
    return dataset;
}

void export_canonical_json(const Dataset& dataset, const std::string& path) {
    nlohmann::json instances = nlohmann::json::array();
    for (const auto& inst : dataset.instances) {
        nlohmann::json ji{{"id", inst.id},
                          {"stratum", inst.stratum},
                          {"references", inst.references},
                          {"split", to_string(inst.split)}};
        if (inst.payload_kind == PayloadKind::triples) {
            ji["payload_kind"] = "triples";
            nlohmann::json triples = nlohmann::json::array();
            for (const auto& t : inst.triples)
                triples.push_back(
                    {{"subject", t.subject}, {"predicate", t.predicate}, {"object", t.object}});
            ji["triples"] = std::move(triples);
        } else {
            ji["payload_kind"] = "pairs";
            nlohmann::json pairs = nlohmann::json::array();
            for (const auto& p : inst.pairs)
                pairs.push_back({{"slot", p.slot}, {"value", p.value}});
            ji["pairs"] = std::move(pairs);
        }
        instances.push_back(std::move(ji));
    }
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write dataset file '" + path + "'");
    out << nlohmann::json{{"instances", instances}}.dump(1) << "\n";
}

namespace {

/// Splits CSV text into records of fields, honoring quoted fields with ""
/// escapes and newlines inside quotes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            any = true;
        } else if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !field.empty() || !fields.empty()) {
                fields.push_back(std::move(field));
                field.clear();
                records.push_back(std::move(fields));
                fields.clear();
                any = false;
            }
        } else {
            field += c;
            any = true;
        }
    }
    if (any || !field.empty() || !fields.empty()) {
        fields.push_back(std::move(field));
        records.push_back(std::move(fields));
    }
    return records;
}

std::vector<SlotValue> parse_mr(const std::string& mr, size_t record) {
    std::vector<SlotValue> pairs;
    size_t pos = 0;
    while (pos < mr.size()) {
        while (pos < mr.size() && (mr[pos] == ' ' || mr[pos] == ',')) ++pos;
        if (pos >= mr.size()) break;
        const size_t open = mr.find('[', pos);
        if (open == std::string::npos)
            throw ParseError("record " + std::to_string(record) + ": malformed MR near '" +
                             mr.substr(pos) + "'");
        const size_t close = mr.find(']', open);
        if (close == std::string::npos)
            throw ParseError("record " + std::to_string(record) + ": unclosed bracket in MR");
        std::string slot = mr.substr(pos, open - pos);
        while (!slot.empty() && slot.back() == ' ') slot.pop_back();
        if (slot.empty())
            throw ParseError("record " + std::to_string(record) + ": empty slot name in MR");
        pairs.push_back({slot, mr.substr(open + 1, close - open - 1)});
        pos = close + 1;
    }
    if (pairs.empty())
        throw ParseError("record " + std::to_string(record) + ": MR with no slot-value pairs");
    return pairs;
}

}  // namespace

Dataset import_e2e_csv(const std::string& path, Split split) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open CSV file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto records = parse_csv(buffer.str());
    if (records.empty()) throw ParseError("empty CSV file '" + path + "'");
    if (records[0].size() < 2 || records[0][0] != "mr" || records[0][1] != "ref")
        throw ParseError("CSV '" + path + "' must start with the header \"mr,ref\"");

    Dataset dataset;
    std::map<std::string, size_t> by_mr;  // exact MR string -> instance index
    for (size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != 2)
            throw ParseError("record " + std::to_string(r) + " in '" + path + "': expected 2 "
                             "fields, got " + std::to_string(rec.size()));
        const std::string& mr = rec[0];
        const std::string& ref = rec[1];
        auto it = by_mr.find(mr);
        if (it == by_mr.end()) {
            Instance inst;
            inst.id = "e2e-" + std::to_string(dataset.instances.size());
            inst.payload_kind = PayloadKind::pairs;
            inst.pairs = parse_mr(mr, r);
            inst.stratum = std::to_string(inst.pairs.size());
            inst.references.push_back(ref);
            inst.split = split;
            validate_instance(inst, r);
            by_mr.emplace(mr, dataset.instances.size());
            dataset.instances.push_back(std::move(inst));
        } else {
            dataset.instances[it->second].references.push_back(ref);
        }
    }
    return dataset;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::istringstream is(text);
    std::string token;
    while (is >> token) tokens.push_back(token);
    return tokens;
}

Vocab::Vocab() : id_to_token_(kReserved) {
    for (size_t i = 0; i < id_to_token_.size(); ++i)
        token_to_id_.emplace(id_to_token_[i], static_cast<int32_t>(i));
}

Vocab Vocab::build(const std::vector<std::string>& corpus, int min_count) {
    if (corpus.empty()) throw ContractError("build_vocab: empty corpus");
    Vocab vocab;
    std::unordered_map<std::string, int> counts;
    std::vector<std::string> order;  // first-occurrence order keeps ids deterministic
    for (const auto& text : corpus)
        for (const auto& token : whitespace_tokens(text)) {
            if (vocab.token_to_id_.count(token)) continue;
            if (++counts[token] == 1) order.push_back(token);
        }
    for (const auto& token : order)
        if (counts[token] >= min_count) {
            vocab.token_to_id_.emplace(token, static_cast<int32_t>(vocab.id_to_token_.size()));
            vocab.id_to_token_.push_back(token);
        }
    return vocab;
}

int32_t Vocab::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? tok::unk : it->second;
}

const std::string& Vocab::token_of(int32_t id) const {
    if (id < 0 || id >= size()) throw IndexError("token id " + std::to_string(id) + " out of range");
    return id_to_token_[static_cast<size_t>(id)];
}

std::vector<int32_t> Vocab::encode(const std::string& text) const {
    std::vector<int32_t> ids;
    for (const auto& token : whitespace_tokens(text)) ids.push_back(id_of(token));
    return ids;
}

std::string Vocab::decode(const std::vector<int32_t>& ids) const {
    std::string out;
    for (int32_t id : ids) {
        if (id == tok::pad || id == tok::bos || id == tok::eos) continue;
        if (!out.empty()) out += ' ';
        out += token_of(id);
    }
    return out;
}

uint64_t Vocab::fingerprint() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& token : id_to_token_) {
        for (char c : token) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        h ^= 0x1f;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace peftforge
