#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "peftforge/data.hpp"
#include "peftforge/rng.hpp"

using namespace peftforge;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("peftforge_test_" + name)).string();
}

Dataset stratified_fixture(int n_strata, int per_stratum) {
    Dataset d;
    for (int s = 0; s < n_strata; ++s)
        for (int i = 0; i < per_stratum; ++i) {
            Instance inst;
            inst.id = "s" + std::to_string(s) + "-i" + std::to_string(i);
            inst.payload_kind = PayloadKind::triples;
            inst.triples = {{"subj", "pred", "obj"}};
            inst.stratum = "cat" + std::to_string(s);
            inst.references = {"a reference text"};
            inst.split = Split::train;
            d.instances.push_back(std::move(inst));
        }
    return d;
}

}  // namespace

TEST_CASE("triple linearization reproduces the published transformed KG") {
    std::vector<Triple> triples = {
        {"David Davie Shelby", "born/died", "1847-1914"},
        {"David Davie Shelby", "active", "1899-1914"},
        {"David Davie Shelby", "state", "AL"},
    };
    CHECK(linearize_triples(triples) ==
          "<S> David Davie Shelby <P> born/died <O> 1847-1914 "
          "<S> David Davie Shelby <P> active <O> 1899-1914 "
          "<S> David Davie Shelby <P> state <O> AL");

    CHECK(linearize_triples({{"a", "b", "c"}}) == "<S> a <P> b <O> c");
    CHECK_THROWS_AS(linearize_triples({}), ContractError);

    // input order is preserved, permuting the input permutes the output
    std::vector<Triple> swapped = {triples[1], triples[0], triples[2]};
    CHECK(linearize_triples(swapped) ==
          "<S> David Davie Shelby <P> active <O> 1899-1914 "
          "<S> David Davie Shelby <P> born/died <O> 1847-1914 "
          "<S> David Davie Shelby <P> state <O> AL");
}

TEST_CASE("MR linearization reproduces the published transformed MR") {
    std::vector<SlotValue> pairs = {
        {"name", "Aromi"},          {"eatType", "coffee shop"}, {"food", "French"},
        {"customer rating", "low"}, {"area", "city centre"},    {"familyFridenly", "no"},
    };
    CHECK(linearize_mr(pairs) ==
          "<S> name <V> Aromi <S> eatType <V> coffee shop <S> food <V> French "
          "<S> customer rating <V> low <S> area <V> city centre <S> familyFridenly <V> no");

    CHECK(linearize_mr({{"area", "riverside"}}) == "<S> area <V> riverside");
    CHECK_THROWS_AS(linearize_mr({}), ContractError);
}

TEST_CASE("stratum derivation") {
    Instance e2e;
    e2e.payload_kind = PayloadKind::pairs;
    e2e.pairs = {{"name", "Aromi"},          {"eatType", "coffee shop"}, {"food", "French"},
                 {"customer rating", "low"}, {"area", "city centre"},    {"familyFridenly", "no"}};
    CHECK(derive_stratum(e2e, StratumScheme::slot_count) == "6");

    Instance webnlg;
    webnlg.payload_kind = PayloadKind::triples;
    webnlg.triples = {{"a", "b", "c"}};
    webnlg.stratum = "Airport";
    CHECK(derive_stratum(webnlg, StratumScheme::category) == "Airport");
    CHECK_THROWS_AS(derive_stratum(webnlg, StratumScheme::slot_count), ContractError);

    Instance dart = webnlg;
    dart.stratum = "WikiSQL";
    CHECK(derive_stratum(dart, StratumScheme::source) == "WikiSQL");
}

TEST_CASE("few-shot sampling: protocol arithmetic and determinism") {
    auto sixteen = stratified_fixture(16, 20);
    auto sampled = sample_few_shot(sixteen, 8, 42, StratumScheme::category);
    CHECK(sampled.size() == 128);
    std::map<std::string, int> per_stratum;
    for (const auto& inst : sampled) ++per_stratum[inst.stratum];
    for (const auto& [label, count] : per_stratum) CHECK(count == 8);

    auto six = stratified_fixture(6, 20);
    CHECK(sample_few_shot(six, 8, 42, StratumScheme::category).size() == 48);

    auto again = sample_few_shot(sixteen, 8, 42, StratumScheme::category);
    REQUIRE(again.size() == sampled.size());
    for (size_t i = 0; i < sampled.size(); ++i) CHECK(again[i].id == sampled[i].id);

    // output is sorted by (stratum, id)
    for (size_t i = 1; i < sampled.size(); ++i)
        CHECK(std::tie(sampled[i - 1].stratum, sampled[i - 1].id) <
              std::tie(sampled[i].stratum, sampled[i].id));
}

TEST_CASE("few-shot sampling: exact stratification over random fixtures") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int n_strata = 1 + static_cast<int>(rng.next_below(6));
        const int per = 1 + static_cast<int>(rng.next_below(12));
        const int shots = 1 + static_cast<int>(rng.next_below(10));
        auto data = stratified_fixture(n_strata, per);
        auto sampled = sample_few_shot(data, shots, rng.next_u64(), StratumScheme::category);
        std::map<std::string, std::set<std::string>> seen;
        for (const auto& inst : sampled) seen[inst.stratum].insert(inst.id);
        CHECK(seen.size() == static_cast<size_t>(n_strata));
        for (const auto& [label, ids] : seen)
            CHECK(ids.size() == static_cast<size_t>(std::min(shots, per)));
    }
}

TEST_CASE("few-shot sampling: shortfall warning and distinct seeds") {
    auto small = stratified_fixture(3, 4);
    std::vector<std::string> warnings;
    auto sampled = sample_few_shot(small, 8, 1, StratumScheme::category, &warnings);
    CHECK(sampled.size() == 12);  // takes all
    CHECK(warnings.size() == 3);

    auto wide = stratified_fixture(4, 30);
    std::set<std::string> signatures;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        std::string sig;
        for (const auto& inst : sample_few_shot(wide, 3, seed, StratumScheme::category))
            sig += inst.id + ";";
        signatures.insert(sig);
    }
    CHECK(signatures.size() >= 45);

    Dataset empty;
    CHECK_THROWS_AS(sample_few_shot(empty, 8, 1, StratumScheme::category), ContractError);
}

TEST_CASE("canonical JSON round-trip is the identity") {
    Dataset d;
    Instance kg;
    kg.id = "w1";
    kg.payload_kind = PayloadKind::triples;
    kg.triples = {{"Alan Bean", "occupation", "test pilot"}, {"Alan Bean", "status", "Retired"}};
    kg.stratum = "Astronaut";
    kg.references = {"Alan Bean is a retired test pilot.", "Alan Bean used to be a test pilot."};
    kg.split = Split::train;
    d.instances.push_back(kg);

    Instance mr;
    mr.id = "e1";
    mr.payload_kind = PayloadKind::pairs;
    mr.pairs = {{"name", "Aromi"}, {"area", "city centre"}};
    mr.stratum = "2";
    mr.references = {"Aromi is in the city centre."};
    mr.split = Split::dev;
    d.instances.push_back(mr);

    const std::string path = temp_path("roundtrip.json");
    export_canonical_json(d, path);
    Dataset back = import_canonical_json(path);
    REQUIRE(back.instances.size() == 2);
    CHECK(back.instances[0].id == "w1");
    CHECK(back.instances[0].triples[1].object == "Retired");
    CHECK(back.instances[0].references.size() == 2);
    CHECK(back.instances[1].pairs[1].value == "city centre");
    CHECK(back.instances[1].split == Split::dev);

    // a second round-trip writes byte-identical JSON
    const std::string path2 = temp_path("roundtrip2.json");
    export_canonical_json(back, path2);
    std::ifstream f1(path), f2(path2);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("canonical JSON import rejects malformed records with a position") {
    const std::string path = temp_path("bad.json");
    {
        std::ofstream out(path);
        out << R"({"instances":[
            {"id":"ok","payload_kind":"pairs","pairs":[{"slot":"a","value":"b"}],
             "stratum":"1","references":["r"],"split":"train"},
            {"id":"bad","payload_kind":"pairs","pairs":[],
             "stratum":"1","references":["r"],"split":"train"}]})";
    }
    try {
        import_canonical_json(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("record 2") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("delimiter literals inside fields are rejected at import") {
    const std::string path = temp_path("delim.json");
    {
        std::ofstream out(path);
        out << R"({"instances":[{"id":"x","payload_kind":"pairs",
            "pairs":[{"slot":"name","value":"evil <S> value"}],
            "stratum":"1","references":["r"],"split":"train"}]})";
    }
    CHECK_THROWS_AS(import_canonical_json(path), ParseError);
    std::remove(path.c_str());
}

TEST_CASE("E2E CSV importer") {
    const std::string path = temp_path("e2e.csv");
    {
        std::ofstream out(path);
        out << "mr,ref\n";
        out << "\"name[Aromi], area[city centre]\",\"Aromi is in the city centre.\"\n";
        out << "\"name[Aromi], area[city centre]\",\"You find Aromi in the city centre.\"\n";
        out << "\"name[Wildwood], eatType[pub], food[English]\",\"Wildwood is an English pub.\"\n";
    }
    Dataset d = import_e2e_csv(path);
    REQUIRE(d.instances.size() == 2);
    CHECK(d.instances[0].pairs.size() == 2);
    CHECK(d.instances[0].pairs[0].slot == "name");
    CHECK(d.instances[0].pairs[0].value == "Aromi");
    CHECK(d.instances[0].pairs[1].value == "city centre");
    CHECK(d.instances[0].references.size() == 2);  // duplicate MR rows merged
    CHECK(d.instances[0].stratum == "2");
    CHECK(d.instances[1].pairs.size() == 3);
    CHECK(d.instances[1].stratum == "3");
    std::remove(path.c_str());

    const std::string bad = temp_path("e2e_bad.csv");
    {
        std::ofstream out(bad);
        out << "mr,ref\n\"name[Aromi\",\"broken\"\n";
    }
    CHECK_THROWS_AS(import_e2e_csv(bad), ParseError);
    std::remove(bad.c_str());
}

TEST_CASE("vocabulary: reserved ids, OOV, round-trip") {
    Vocab vocab = Vocab::build({"alpha beta beta", "<S> gamma"});
    CHECK(vocab.id_of("<S>") == tok::subject);
    CHECK(vocab.id_of("<pad>") == tok::pad);

    auto ids = vocab.encode("<S> alpha <V> beta");
    REQUIRE(ids.size() == 4);
    CHECK(ids[0] == tok::subject);
    CHECK(ids[2] == tok::value);
    for (int32_t id : ids) CHECK(id != tok::unk);

    CHECK(vocab.encode("unseen")[0] == tok::unk);
    CHECK(vocab.decode(vocab.encode("alpha beta gamma")) == "alpha beta gamma");

    // min_count filters rare tokens to unknown
    Vocab filtered = Vocab::build({"alpha beta beta"}, 2);
    CHECK(filtered.id_of("alpha") == tok::unk);
    CHECK(filtered.id_of("beta") != tok::unk);

    CHECK(Vocab::build({"a"}).fingerprint() != Vocab::build({"b"}).fingerprint());
    CHECK_THROWS_AS(Vocab::build({}), ContractError);
}

TEST_CASE("linearization is injective over delimiter-free payloads") {
    Rng rng(13);
    const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta",
                                            "epsilon", "zeta", "eta bar", "theta"};
    auto word = [&]() { return words[rng.next_below(words.size())]; };

    std::map<std::string, std::vector<SlotValue>> seen;
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<SlotValue> pairs;
        const int n = 1 + static_cast<int>(rng.next_below(4));
        for (int i = 0; i < n; ++i) pairs.push_back({word(), word()});
        const std::string text = linearize_mr(pairs);
        auto [it, inserted] = seen.emplace(text, pairs);
        if (!inserted) {
            // identical strings must come from identical payloads
            REQUIRE(it->second.size() == pairs.size());
            for (size_t i = 0; i < pairs.size(); ++i) {
                CHECK(it->second[i].slot == pairs[i].slot);
                CHECK(it->second[i].value == pairs[i].value);
            }
        }
    }
}
