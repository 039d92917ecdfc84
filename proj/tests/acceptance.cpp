// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Long-running criteria print their runtime against the budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "peftforge/gradcheck.hpp"
#include "peftforge/harness.hpp"
#include "peftforge/metrics.hpp"
#include "peftforge/optimizer.hpp"
#include "peftforge/param_audit.hpp"
#include "testutil.hpp"

using namespace peftforge;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string workdir() {
    auto dir = std::filesystem::temp_directory_path() / "peftforge-acceptance";
    std::filesystem::create_directories(dir);
    return dir.string();
}

template <typename S>
Tensor<S> random_tensor(Rng& rng, Shape shape, double scale = 1.0, bool trainable = true) {
    Tensor<S> t = Tensor<S>::zeros(std::move(shape));
    for (Index i = 0; i < t.numel(); ++i) t.value()[i] = static_cast<S>(rng.next_normal() * scale);
    t.set_trainable(trainable);
    return t;
}

TokenBatch random_batch(Rng& rng, const ArchitectureDims& dims, size_t n, size_t enc_len,
                        size_t dec_len) {
    std::vector<std::vector<int32_t>> enc, dec;
    for (size_t i = 0; i < n; ++i) {
        std::vector<int32_t> e, d;
        for (size_t j = 0; j < enc_len; ++j)
            e.push_back(tok::first_regular +
                        static_cast<int32_t>(
                            rng.next_below(static_cast<uint64_t>(dims.vocab_size - tok::first_regular))));
        for (size_t j = 0; j < dec_len; ++j)
            d.push_back(tok::first_regular +
                        static_cast<int32_t>(
                            rng.next_below(static_cast<uint64_t>(dims.vocab_size - tok::first_regular))));
        enc.push_back(std::move(e));
        dec.push_back(std::move(d));
    }
    return TokenBatch::from_sequences(enc, dec);
}

// --------------------------------------------------------------------------
// 1. Published parameter percentages
// --------------------------------------------------------------------------
void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto dims = ArchitectureDims::t5_large();
    const long long base = 770000000;
    auto pct = [&](const PeftConfig& c) { return count_trainable(c, dims, base).percent_3dp(); };

    bool ok = true;
    ok = ok && pct(PromptTuning{50}) == 0.007;
    ok = ok && pct(ScaledPromptTuning{50, ScaleShape::vector}) == 0.007;
    ok = ok && pct(LoRA{8}) == 0.306;
    ok = ok && pct(PrefixTuning{5, PrefixPlacement::all_attention}) == 0.096;
    ok = ok && pct(PrefixTuning{10, PrefixPlacement::all_attention}) == 0.192;
    ok = ok && pct(IA3{}) == 0.045;
    ok = ok && pct(BottleneckAdapter{16}) == 0.824;
    ok = ok && pct(FineTune{}) == 100.0;

    // ambiguous rows: emitted with documented assumptions, not asserted
    const double compacter = count_trainable(Compacter{8, 16, 1, true}, dims, base).percent_3dp();
    const double unipelt5 = count_trainable(UniPELT{16, 8, 5}, dims, base).percent_3dp();
    const double unipelt10 = count_trainable(UniPELT{16, 8, 10}, dims, base).percent_3dp();

    const double secs = seconds_since(t0);
    ok = ok && secs < 1.0;
    std::ostringstream os;
    os << "published percentages exact to 3 decimals (PT/SPT 0.007, LoRA 0.306, Prefix "
          "0.096/0.192, IA3 0.045, Adapter 0.824, FT 100.0); computed-under-assumptions: "
          "Compacter "
       << compacter << " (published 0.053), UniPELT " << unipelt5 << "/" << unipelt10
       << " (published 1.194/1.258); " << secs << "s";
    report(1, ok, os.str());
}

// --------------------------------------------------------------------------
// 2. Formula-enumeration agreement on toy dims
// --------------------------------------------------------------------------
void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto dims = ArchitectureDims::toy();
    const long long toy_base = backbone_param_count(dims);
    const std::vector<PeftConfig> configs = {
        FineTune{},
        PromptTuning{5},
        ScaledPromptTuning{5, ScaleShape::vector},
        ScaledPromptTuning{5, ScaleShape::scalar},
        ScaledPromptTuning{5, ScaleShape::matrix},
        PrefixTuning{3, PrefixPlacement::all_attention},
        PrefixTuning{3, PrefixPlacement::encoder_only},
        PrefixTuning{3, PrefixPlacement::enc_and_dec_self},
        LoRA{2},
        BottleneckAdapter{4},
        Compacter{4, 4, 1, true},
        Compacter{2, 4, 2, false},
        IA3{},
        UniPELT{4, 2, 3},
    };
    bool ok = true;
    for (const auto& config : configs) {
        Seq2SeqModel<float> model(dims, 7);
        Rng rng(11);
        auto attached = attach(model, config, rng);
        long long enumerated = 0;
        for (const auto& name : trainable_parameter_ids(attached)) {
            auto it = attached.method_params.find(name);
            enumerated +=
                (it != attached.method_params.end() ? it->second : model.param(name)).numel();
        }
        ok = ok && enumerated == count_trainable(config, dims, toy_base).total;
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 10.0;
    std::ostringstream os;
    os << "closed-form count equals attached-model enumeration for " << configs.size()
       << " configs on toy dims; " << secs << "s";
    report(2, ok, os.str());
}

// --------------------------------------------------------------------------
// 3. Linearization bit-exactness
// --------------------------------------------------------------------------
void criterion_3() {
    const std::string dart = linearize_triples({{"David Davie Shelby", "born/died", "1847-1914"},
                                                {"David Davie Shelby", "active", "1899-1914"},
                                                {"David Davie Shelby", "state", "AL"}});
    const std::string e2e = linearize_mr({{"name", "Aromi"},
                                          {"eatType", "coffee shop"},
                                          {"food", "French"},
                                          {"customer rating", "low"},
                                          {"area", "city centre"},
                                          {"familyFridenly", "no"}});
    const bool ok =
        dart ==
            "<S> David Davie Shelby <P> born/died <O> 1847-1914 <S> David Davie Shelby <P> "
            "active <O> 1899-1914 <S> David Davie Shelby <P> state <O> AL" &&
        e2e ==
            "<S> name <V> Aromi <S> eatType <V> coffee shop <S> food <V> French <S> customer "
            "rating <V> low <S> area <V> city centre <S> familyFridenly <V> no";
    report(3, ok, "published transformed DART and E2E strings reproduced byte-for-byte");
}

// --------------------------------------------------------------------------
// 4. SPT identity at unit scaling
// --------------------------------------------------------------------------
void criterion_4() {
    Graph<double> g;
    Rng rng(3);
    auto x_p = random_tensor<double>(rng, {4, 8});
    auto x_e = random_tensor<double>(rng, {5, 8}, 1.0, false);
    auto ones = Tensor<double>::full({4, 1}, 1.0);
    auto a = compose_prompt(g, x_p, x_e);
    auto b = compose_scaled_prompt(g, x_p, ones, ScaleShape::vector, x_e);
    bool ok = true;
    for (Index i = 0; i < a.numel(); ++i) ok = ok && a.value()[i] == b.value()[i];

    const auto dims = ArchitectureDims::toy();
    Seq2SeqModel<double> m_pt(dims, 97);
    Seq2SeqModel<double> m_spt(dims, 97);
    Rng r1(101), r2(101);
    auto pt = attach(m_pt, PromptTuning{50}, r1);
    auto spt = attach(m_spt, ScaledPromptTuning{50, ScaleShape::vector}, r2);
    Rng brng(103);
    for (int inst = 0; inst < 20 && ok; ++inst) {
        auto batch = random_batch(brng, dims, 1, 5, 4);
        Graph<double> gg(false);
        auto lp = forward_logits(gg, m_pt, batch, pt.hooks);
        auto ls = forward_logits(gg, m_spt, batch, spt.hooks);
        for (Index i = 0; i < lp.numel(); ++i) ok = ok && lp.value()[i] == ls.value()[i];
    }
    report(4, ok,
           "compose_scaled_prompt(s=ones) bitwise-equals compose_prompt; SPT(s=1) forward equals "
           "PT forward within 0 ulps in 64-bit on 20 random toy instances");
}

// --------------------------------------------------------------------------
// 5. Neutral-element suite
// --------------------------------------------------------------------------
void criterion_5() {
    const auto dims = ArchitectureDims::toy();
    bool ok = true;
    Rng brng(79);
    const std::vector<std::pair<std::string, PeftConfig>> configs = {
        {"zero-init LoRA-B", LoRA{4}},
        {"zero-init adapter up-projection", BottleneckAdapter{4}},
        {"ones IA3", IA3{}},
    };
    for (const auto& [label, config] : configs) {
        Seq2SeqModel<float> model(dims, 83);
        Rng rng(89);
        auto attached = attach(model, config, rng);
        for (int inst = 0; inst < 20; ++inst) {
            auto batch = random_batch(brng, dims, 1, 4, 3);
            Graph<float> g(false);
            auto plain = forward_logits(g, model, batch);
            auto hooked = forward_logits(g, model, batch, attached.hooks);
            for (Index i = 0; i < plain.numel(); ++i)
                ok = ok && std::abs(plain.value()[i] - hooked.value()[i]) < 1e-6f;
        }
    }
    report(5, ok,
           "zero LoRA-B, zero adapter-up, ones IA3 reproduce the frozen backbone within 1e-6 "
           "(32-bit), 20 instances each");
}

// --------------------------------------------------------------------------
// 6. Equivalence oracles: LoRA merge and PHM materialization
// --------------------------------------------------------------------------
void criterion_6() {
    bool ok = true;
    Rng rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        const Index d_out = 2 + static_cast<Index>(rng.next_below(7));
        const Index d_in = 2 + static_cast<Index>(rng.next_below(7));
        const Index r = 1 + static_cast<Index>(rng.next_below(3));
        auto w = random_tensor<float>(rng, {d_out, d_in}, 1.0, false);
        auto a = random_tensor<float>(rng, {r, d_in}, 1.0, false);
        auto b = random_tensor<float>(rng, {d_out, r}, 1.0, false);
        auto x = random_tensor<float>(rng, {d_in, 4}, 1.0, false);
        Graph<float> g(false);
        auto applied = lora_apply(g, w, a, b, x);
        auto merged = matmul(g, lora_merge(w, a, b), x);
        for (Index i = 0; i < applied.numel(); ++i)
            ok = ok && std::abs(applied.value()[i] - merged.value()[i]) < 1e-5f;
    }
    Rng prng(43);
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 1 + static_cast<Index>(prng.next_below(3));
        const Index bo = 1 + static_cast<Index>(prng.next_below(3));
        const Index bi = 1 + static_cast<Index>(prng.next_below(3));
        std::vector<Tensor<float>> as, bs;
        for (Index i = 0; i < n; ++i) {
            as.push_back(random_tensor<float>(prng, {n, n}, 1.0, false));
            bs.push_back(random_tensor<float>(prng, {bo, bi}, 1.0, false));
        }
        auto bias = Tensor<float>::zeros({1, n * bo});
        auto x = random_tensor<float>(prng, {3, n * bi}, 1.0, false);
        Graph<float> g(false);
        auto y = phm_linear(g, x, as, bs, bias);
        MatrixR<float> w = MatrixR<float>::Zero(n * bo, n * bi);
        for (Index i = 0; i < n; ++i)
            for (Index r = 0; r < n; ++r)
                for (Index c = 0; c < n; ++c)
                    w.block(r * bo, c * bi, bo, bi) +=
                        as[static_cast<size_t>(i)].at(r, c) * bs[static_cast<size_t>(i)].mat();
        MatrixR<float> expect = x.mat() * w.transpose();
        for (Index i = 0; i < y.rows(); ++i)
            for (Index j = 0; j < y.cols(); ++j)
                ok = ok && std::abs(y.at(i, j) - expect(i, j)) < 1e-5f;
    }
    report(6, ok,
           "lora_merge forward equals lora_apply within 1e-5 (100 trials); PHM kron-sum forward "
           "equals materialized dense weight within 1e-5 (100 trials)");
}

// --------------------------------------------------------------------------
// 7. Gradient suite
// --------------------------------------------------------------------------
void criterion_7() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    double worst = 0.0;

    // every primitive, once, on conditioned random values
    {
        Rng rng(47);
        auto cond = [&](Shape shape) {
            Tensor<double> t = Tensor<double>::zeros(std::move(shape));
            for (Index i = 0; i < t.numel(); ++i) {
                const double mag = 0.3 + std::abs(rng.next_normal());
                t.value()[i] = rng.next_double() < 0.5 ? -mag : mag;
            }
            t.set_trainable(true);
            return t;
        };
        auto quad = [](Graph<double>& g, const Tensor<double>& t) {
            return sum_all(g, multiply(g, t, t));
        };
        auto a = cond({4, 5}), b = cond({5, 3}), c = cond({4, 5});
        auto s = cond({4, 1}), v = cond({5, 1}), gain = cond({1, 5});
        auto probe = cond({4, 5});
        probe.set_trainable(false);
        std::vector<std::pair<std::string, std::function<double()>>> checks = {
            {"matmul", [&] { return grad_check<double>({a, b}, [&](Graph<double>& g) { return quad(g, matmul(g, a, b)); }, 1e-5); }},
            {"kron", [&] { return grad_check<double>({a, b}, [&](Graph<double>& g) { return quad(g, kron(g, a, b)); }, 1e-5); }},
            {"row_scale", [&] { return grad_check<double>({a, s}, [&](Graph<double>& g) { return quad(g, row_scale(g, a, s)); }, 1e-5); }},
            {"col_scale", [&] { return grad_check<double>({a, v}, [&](Graph<double>& g) { return quad(g, col_scale(g, a, v)); }, 1e-5); }},
            {"softmax", [&] { return grad_check<double>({a}, [&](Graph<double>& g) { return sum_all(g, multiply(g, softmax_rows(g, a), probe)); }, 1e-5); }},
            {"add", [&] { return grad_check<double>({a, c}, [&](Graph<double>& g) { return quad(g, add(g, a, c)); }, 1e-5); }},
            {"subtract", [&] { return grad_check<double>({a, c}, [&](Graph<double>& g) { return quad(g, subtract(g, a, c)); }, 1e-5); }},
            {"multiply", [&] { return grad_check<double>({a, c}, [&](Graph<double>& g) { return quad(g, multiply(g, a, c)); }, 1e-5); }},
            {"relu", [&] { return grad_check<double>({a}, [&](Graph<double>& g) { return quad(g, relu(g, a)); }, 1e-6); }},
            {"sigmoid", [&] { return grad_check<double>({a}, [&](Graph<double>& g) { return quad(g, sigmoid(g, a)); }, 1e-5); }},
            {"rms_norm", [&] { return grad_check<double>({a, gain}, [&](Graph<double>& g) { return quad(g, rms_norm(g, a, gain)); }, 1e-5); }},
            {"concat_rows", [&] { return grad_check<double>({a, c}, [&](Graph<double>& g) { return quad(g, concat_rows(g, a, c)); }, 1e-5); }},
            {"transpose", [&] { return grad_check<double>({a}, [&](Graph<double>& g) { return quad(g, transpose(g, a)); }, 1e-5); }},
            {"reshape", [&] { return grad_check<double>({a}, [&](Graph<double>& g) { return quad(g, reshape(g, a, {5, 4})); }, 1e-5); }},
            {"add_rowvec", [&] { return grad_check<double>({a, gain}, [&](Graph<double>& g) { return quad(g, add_rowvec(g, a, gain)); }, 1e-5); }},
            {"mean_rows", [&] { return grad_check<double>({a}, [&](Graph<double>& g) { return quad(g, mean_rows(g, a)); }, 1e-5); }},
            {"embedding", [&] {
                 auto table = cond({6, 5});
                 return grad_check<double>({table}, [&](Graph<double>& g) {
                     auto e = embedding_lookup(g, table, {0, 5, 2, 5});
                     return sum_all(g, multiply(g, e, e));
                 }, 1e-5);
             }},
            {"cross_entropy", [&] {
                 auto logits = cond({4, 6});
                 return grad_check<double>({logits}, [&](Graph<double>& g) {
                     return cross_entropy_from_logits(g, logits, {1, 0, 5, 3});
                 }, 1e-5);
             }},
        };
        for (auto& [name, check] : checks) {
            const double err = check();
            worst = std::max(worst, err);
            ok = ok && err < 1e-5;
        }
    }

    // end-to-end toy models under every method, gradients into the method
    // tensors (s, X_p, prefixes, LoRA A/B, PHM factors, IA3 vectors, gates)
    {
        const auto dims = ArchitectureDims::tiny();
        // two items with 5/4-token sequences: every backbone parameter
        // receives a healthy gradient, keeping the rel-err metric conditioned
        Rng brng(127);
        auto batch = random_batch(brng, dims, 2, 5, 4);
        const std::vector<PeftConfig> configs = {
            FineTune{},
            PromptTuning{2},
            ScaledPromptTuning{2, ScaleShape::vector},
            ScaledPromptTuning{2, ScaleShape::scalar},
            ScaledPromptTuning{2, ScaleShape::matrix},
            PrefixTuning{2, PrefixPlacement::all_attention},
            LoRA{2},
            BottleneckAdapter{2},
            Compacter{2, 2, 1, true},
            IA3{},
            UniPELT{4, 2, 2},
        };
        for (const auto& config : configs) {
            Seq2SeqModel<double> model(dims, 131);
            Rng rng(137);
            auto attached = attach(model, config, rng);
            Rng prng(139);
            for (auto& [name, t] : attached.method_params)
                if (t.value().abs().maxCoeff() == 0)
                    for (Index i = 0; i < t.numel(); ++i)
                        t.value()[i] = (prng.next_double() < 0.5 ? -1 : 1) *
                                       (0.2 + 0.2 * std::abs(prng.next_normal()));
            std::vector<Tensor<double>> params;
            for (auto& [name, t] : attached.trainable_params()) params.push_back(t);
            const double err = grad_check<double>(
                params,
                [&](Graph<double>& g) { return teacher_forced_loss(g, model, batch, attached.hooks); },
                1e-5);
            worst = std::max(worst, err);
            ok = ok && err < 1e-5;
        }
    }

    const double secs = seconds_since(t0);
    ok = ok && secs < 300.0;
    std::ostringstream os;
    os << "finite-difference rel-err < 1e-5 (64-bit) for every primitive and for end-to-end "
          "models under each method (worst "
       << worst << "); " << secs << "s (budget 300s)";
    report(7, ok, os.str());
}

// --------------------------------------------------------------------------
// 8. Freezing invariance over 100 optimizer steps
// --------------------------------------------------------------------------
void criterion_8() {
    const auto dims = ArchitectureDims::tiny();
    bool ok = true;
    const std::vector<PeftConfig> configs = {
        PromptTuning{3},
        ScaledPromptTuning{3, ScaleShape::vector},
        PrefixTuning{2, PrefixPlacement::all_attention},
        LoRA{2},
        BottleneckAdapter{2},
        Compacter{2, 2, 1, true},
        IA3{},
        UniPELT{4, 2, 2},
    };
    for (const auto& config : configs) {
        Seq2SeqModel<float> model(dims, 107);
        std::map<std::string, ColArray<float>> snapshot;
        for (auto& [name, t] : model.parameters()) snapshot[name] = t.value();
        Rng rng(109);
        auto attached = attach(model, config, rng);
        auto params = attached.trainable_params();
        AdamOptimizer<float> opt(1e-2);
        Rng brng(113);
        for (int step = 0; step < 100; ++step) {
            auto batch = random_batch(brng, dims, 2, 4, 3);
            Graph<float> g;
            auto loss = teacher_forced_loss(g, model, batch, attached.hooks);
            g.backward(loss);
            opt.step(params);
            zero_grads(params);
        }
        for (auto& [name, t] : model.parameters()) {
            const auto& before = snapshot.at(name);
            for (Index i = 0; i < t.numel(); ++i) ok = ok && t.value()[i] == before[i];
        }
    }
    report(8, ok,
           "100 Adam steps under each non-fine-tuning method leave every backbone tensor bitwise "
           "unchanged");
}

// --------------------------------------------------------------------------
// 9. Protocol reproduction: 3x3 grid, exact rerun
// --------------------------------------------------------------------------
void criterion_9(const std::string& data_path) {
    ExperimentSpec spec;
    spec.dataset_paths = {data_path};
    spec.scheme = StratumScheme::slot_count;
    spec.shots = 4;
    spec.sampling_reps = 3;  // the protocol default
    spec.seeds = 3;
    spec.peft = ScaledPromptTuning{4, ScaleShape::vector};
    spec.learning_rate = 0.5;
    spec.max_steps = 20;
    spec.batch_size = 4;
    spec.eval_every = 10;
    spec.dev_cap = 8;
    spec.max_decode_len = 20;
    spec.output_dir = workdir() + "/grid9";

    GridReport first = run_grid(spec);
    GridReport second = run_grid(spec);
    bool ok = first.runs.size() == 9 && second.runs.size() == 9;
    ok = ok && first.aggregate.count("BLEU") == 1 && first.aggregate.count("dev_bleu") == 1;
    for (size_t i = 0; ok && i < first.runs.size(); ++i) {
        const auto& a = first.runs[i];
        const auto& b = second.runs[i];
        ok = ok && a.best_dev_bleu == b.best_dev_bleu && a.best_step == b.best_step &&
             a.loss_trajectory == b.loss_trajectory;
        for (const auto& [name, entry] : a.test_metrics.scores)
            ok = ok && b.test_metrics.scores.at(name).score == entry.score;
    }
    for (const auto& [name, stat] : first.aggregate)
        ok = ok && second.aggregate.at(name) == stat;
    report(9, ok,
           "run_grid executes exactly 9 runs (3 samplings x 3 seeds), reports mean and stderr, "
           "and an identical spec reproduces every number exactly");
}

// --------------------------------------------------------------------------
// 10. Stratified sampling fixtures
// --------------------------------------------------------------------------
void criterion_10() {
    auto fixture = [](int n_strata, int per) {
        Dataset d;
        for (int s = 0; s < n_strata; ++s)
            for (int i = 0; i < per; ++i) {
                Instance inst;
                inst.id = "s" + std::to_string(s) + "-i" + std::to_string(i);
                inst.payload_kind = PayloadKind::triples;
                inst.triples = {{"subj", "pred", "obj"}};
                inst.stratum = "cat" + std::to_string(s);
                inst.references = {"text"};
                d.instances.push_back(std::move(inst));
            }
        return d;
    };
    auto sixteen = fixture(16, 12);
    auto sampled = sample_few_shot(sixteen, 8, 5, StratumScheme::category);
    bool ok = sampled.size() == 128;
    std::map<std::string, int> per_stratum;
    for (const auto& inst : sampled) ++per_stratum[inst.stratum];
    ok = ok && per_stratum.size() == 16;
    for (const auto& [label, n] : per_stratum) ok = ok && n == 8;

    ok = ok && sample_few_shot(fixture(6, 12), 8, 5, StratumScheme::category).size() == 48;

    auto again = sample_few_shot(sixteen, 8, 5, StratumScheme::category);
    ok = ok && again.size() == sampled.size();
    for (size_t i = 0; ok && i < sampled.size(); ++i) ok = ok && again[i].id == sampled[i].id;
    report(10, ok,
           "16-stratum fixture at 8 shots yields 128 (8 per stratum), 6-stratum yields 48, "
           "deterministic per seed");
}

// --------------------------------------------------------------------------
// 11. Metric oracles
// --------------------------------------------------------------------------
void criterion_11() {
    const Candidates ident = {"the aromi coffee shop is in the city centre .",
                              "judge shelby was born in 1847 and died in 1914 .",
                              "wildwood is an english pub near the river ."};
    const ReferenceSets ident_refs = {{ident[0]}, {ident[1]}, {ident[2]}};
    bool ok = true;
    ok = ok && std::abs(corpus_bleu(ident, ident_refs) - 100.0) < 1e-6;
    ok = ok && std::abs(chrf_pp(ident, ident_refs) - 100.0) < 1e-6;
    ok = ok && std::abs(ter(ident, ident_refs) - 0.0) < 1e-6;
    ok = ok && std::abs(rouge_l(ident, ident_refs) - 1.0) < 1e-6;
    ok = ok && std::abs(cider(ident, ident_refs) - 10.0) < 1e-6;

    // hand-computed fixtures
    auto stats = bleu_stats({"the the the the"}, {{"the cat"}});
    ok = ok && std::abs(stats.precision(1, false) - 0.25) < 1e-6;
    ok = ok && std::abs(chrf_pp({"abcd"}, {{"abce"}}) -
                        100.0 * (0.75 + 2.0 / 3.0 + 0.5) / 5.0) < 1e-6;
    ok = ok && std::abs(ter({"alpha beta gamma error"}, {{"alpha beta gamma delta"}}) - 0.25) < 1e-6;
    ok = ok && std::abs(ter({""}, {{"alpha beta gamma delta"}}) - 1.0) < 1e-6;
    ok = ok && std::abs(rouge_l({"a b c d"}, {{"a c d e"}}) - 0.75) < 1e-6;
    ok = ok && std::abs(nist({"a b c"}, {{"a b c"}}) - std::log2(3.0)) < 1e-6;
    ok = ok && std::abs(nist({""}, {{"a b c"}}) - 0.0) < 1e-6;
    const Candidates pair = {"the red fox jumps high", "a quiet green boat floats slowly"};
    ok = ok && std::abs(cider(pair, {{pair[0]}, {pair[1]}}) - 10.0) < 1e-6;
    report(11, ok,
           "identity corpus scores BLEU 100 / chrF++ 100 / TER 0 / ROUGE-L 1 / CIDEr 10; every "
           "hand-computed fixture matches within 1e-6");
}

// --------------------------------------------------------------------------
// 12. Learnability floor on the synthetic template corpus
// --------------------------------------------------------------------------
void criterion_12(const std::string& data_path) {
    ExperimentSpec base;
    base.dataset_paths = {data_path};
    base.scheme = StratumScheme::slot_count;
    base.shots = -1;  // whole train split
    base.sampling_reps = 1;
    base.seeds = 1;
    base.max_steps = 2000;
    base.batch_size = 8;
    base.eval_every = 250;
    base.dev_cap = 200;
    base.max_decode_len = 24;

    TaskContext ctx = build_task_context(base);
    bool ok = true;
    std::ostringstream os;

    // fine-tuning from scratch; its best checkpoint then serves as the
    // pretrained backbone the prompt methods attach to
    ExperimentSpec ft = base;
    ft.peft = FineTune{};
    ft.learning_rate = 3e-3;
    ft.output_dir = workdir() + "/c12-ft";
    auto t0 = std::chrono::steady_clock::now();
    RunResult ft_run = train_run(ft, 0, 0, &ctx);
    const double ft_secs = seconds_since(t0);
    const double ft_bleu =
        ft_run.failed ? 0.0 : ft_run.test_metrics.scores.at("BLEU").score;
    ok = ok && !ft_run.failed && ft_bleu >= 90.0 && ft_secs < 900.0;
    os << "FT " << ft_bleu << " (" << ft_secs << "s)";

    ExperimentSpec pt = base;
    pt.peft = PromptTuning{50};
    pt.learning_rate = 0.5;
    pt.pretrained_checkpoint = ft_run.checkpoint_path;
    pt.output_dir = workdir() + "/c12-pt";
    t0 = std::chrono::steady_clock::now();
    RunResult pt_run = train_run(pt, 0, 0, &ctx);
    const double pt_secs = seconds_since(t0);
    const double pt_bleu =
        pt_run.failed ? 0.0 : pt_run.test_metrics.scores.at("BLEU").score;
    ok = ok && !pt_run.failed && pt_bleu >= 90.0 && pt_secs < 900.0;
    os << ", PT(k=50) " << pt_bleu << " (" << pt_secs << "s)";

    ExperimentSpec spt = pt;
    spt.peft = ScaledPromptTuning{50, ScaleShape::vector};
    spt.output_dir = workdir() + "/c12-spt";
    t0 = std::chrono::steady_clock::now();
    RunResult spt_run = train_run(spt, 0, 0, &ctx);
    const double spt_secs = seconds_since(t0);
    const double spt_bleu =
        spt_run.failed ? 0.0 : spt_run.test_metrics.scores.at("BLEU").score;
    ok = ok && !spt_run.failed && spt_bleu >= 90.0 && spt_secs < 900.0;
    os << ", SPT(k=50) " << spt_bleu << " (" << spt_secs << "s)";

    const bool step0_equal = !pt_run.failed && !spt_run.failed &&
                             !pt_run.loss_trajectory.empty() &&
                             pt_run.loss_trajectory[0] == spt_run.loss_trajectory[0];
    ok = ok && step0_equal;
    os << "; SPT step-0 loss " << (step0_equal ? "equals" : "DIFFERS FROM")
       << " PT step-0 loss exactly; held-out BLEU floor 90";
    report(12, ok, os.str());
}

// --------------------------------------------------------------------------
// 13. Intermediate protocol continuity and bitwise checkpoints
// --------------------------------------------------------------------------
void criterion_13(const std::string& data_a, const std::string& data_b) {
    ExperimentSpec first;
    first.dataset_paths = {data_a};
    first.scheme = StratumScheme::slot_count;
    first.shots = 4;
    first.sampling_reps = 1;
    first.seeds = 1;
    first.peft = ScaledPromptTuning{4, ScaleShape::vector};
    first.learning_rate = 0.5;
    first.max_steps = 15;
    first.batch_size = 4;
    first.eval_every = 5;
    first.dev_cap = 8;
    first.max_decode_len = 20;
    first.output_dir = workdir() + "/c13";

    ExperimentSpec second = first;
    second.dataset_paths = {data_b};

    IntermediateReport inter = intermediate_run(first, second);
    bool ok = inter.zero_shot.size() == 1 && inter.stage_two.runs.size() == 1;
    ok = ok && inter.stage_two.runs[0].initial_dev_bleu == inter.zero_shot[0].dev_bleu;

    // checkpoint round-trip: reloaded model forwards bitwise-equal
    const std::string ckpt = inter.stage_two.runs[0].checkpoint_path;
    LoadedCheckpoint once = load_checkpoint(ckpt);
    LoadedCheckpoint twice = load_checkpoint(ckpt);
    Rng brng(7);
    auto batch = random_batch(brng, once.manifest.dims, 1, 4, 3);
    Graph<float> g(false);
    auto a = forward_logits(g, *once.model, batch, once.attached.hooks);
    auto b = forward_logits(g, *twice.model, batch, twice.attached.hooks);
    for (Index i = 0; i < a.numel(); ++i) ok = ok && a.value()[i] == b.value()[i];
    report(13, ok,
           "stage-2 initial dev score equals the stage-1 checkpoint's zero-shot dev score on the "
           "second dataset exactly; checkpoint round-trip reproduces forwards bitwise");
}

}  // namespace

int main() {
    const std::string dir = workdir();
    const std::string synth = dir + "/synthetic.json";
    export_canonical_json(testutil::synthetic_template_corpus(200, 2024), synth);
    const std::string synth_b = dir + "/synthetic_b.json";
    export_canonical_json(testutil::synthetic_template_corpus(120, 4096), synth_b);

    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9(synth);
    criterion_10();
    criterion_11();
    criterion_12(synth);
    criterion_13(synth, synth_b);

    if (failures == 0) {
        std::printf("acceptance: all 13 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criterion(s) FAILED\n", failures);
    return 1;
}
