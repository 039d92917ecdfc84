#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "peftforge/gradcheck.hpp"
#include "peftforge/model.hpp"
#include "peftforge/optimizer.hpp"

using namespace peftforge;

namespace {

template <typename S>
void zero_all_but(Seq2SeqModel<S>& model, const std::set<std::string>& keep) {
    for (auto& [name, t] : model.parameters())
        if (!keep.count(name) && name.find("norm.gain") == std::string::npos)
            t.value().setZero();
}

TokenBatch tiny_batch() {
    return TokenBatch::from_sequences({{8, 9, 10}, {11, 12}}, {{13, 14}, {15, 16, 17}});
}

}  // namespace

TEST_CASE("parameter names are unique and stable") {
    Seq2SeqModel<double> model(ArchitectureDims::tiny(), 1);
    std::set<std::string> names;
    for (const auto& [name, t] : model.parameters()) names.insert(name);
    CHECK(names.size() == model.parameters().size());
    CHECK(names.count("embed.tok") == 1);
    CHECK(names.count("enc.0.self.wq") == 1);
    CHECK(names.count("dec.0.cross.wv") == 1);
    CHECK(names.count("dec.0.ffn.w2") == 1);
    CHECK(names.count("enc.relbias") == 1);
}

TEST_CASE("forward shape contract") {
    Seq2SeqModel<float> model(ArchitectureDims::tiny(), 2);
    auto batch = TokenBatch::from_sequences({{8, 9}, {10, 11, 12}},
                                            {{13, 14, 15, 16}, {17, 18, 19, 20}});
    Graph<float> g(false);
    auto logits = forward_logits(g, model, batch);
    CHECK(logits.shape() == Shape{2, 5, model.dims().vocab_size});
}

TEST_CASE("zero weights except embeddings: logits are tied-embedding similarity") {
    Seq2SeqModel<double> model(ArchitectureDims::tiny(), 3);
    zero_all_but(model, {"embed.tok"});
    const auto& emb = model.param("embed.tok");

    std::vector<int32_t> enc = {8, 9};
    std::vector<int32_t> dec_in = {tok::bos, 13};
    TokenBatch batch;
    batch.enc_ids = {enc};
    batch.enc_mask = {{1, 1}};
    batch.dec_in_ids = {dec_in};
    batch.dec_target_ids = {{13, tok::eos}};

    Graph<double> g(false);
    auto logits = forward_logits(g, model, batch);

    const Index d = model.dims().d_model;
    for (size_t t = 0; t < dec_in.size(); ++t) {
        Eigen::RowVectorXd row = emb.mat().row(dec_in[t]);
        const double rms = std::sqrt(row.squaredNorm() / static_cast<double>(d) + kRmsNormEps);
        Eigen::RowVectorXd normed = row / rms;
        Eigen::RowVectorXd expect = normed * emb.mat().transpose();
        for (Index v = 0; v < model.dims().vocab_size; ++v) {
            const double got = logits.value()[static_cast<Index>(t) * model.dims().vocab_size + v];
            CHECK(got == doctest::Approx(expect[v]).epsilon(1e-10));
        }
    }
}

TEST_CASE("uniform logits give exactly ln(vocab) loss") {
    Seq2SeqModel<double> model(ArchitectureDims::tiny(), 4);
    for (auto& [name, t] : model.parameters()) t.value().setZero();
    auto batch = tiny_batch();
    Graph<double> g(false);
    auto loss = teacher_forced_loss(g, model, batch);
    CHECK(loss.item() ==
          doctest::Approx(std::log(static_cast<double>(model.dims().vocab_size))).epsilon(1e-9));
}

TEST_CASE("forced-correct logit of 20 drives loss under 1e-3") {
    Seq2SeqModel<double> model(ArchitectureDims::tiny(), 5);
    const Index d = model.dims().d_model;
    zero_all_but(model, {});
    auto& emb = model.param("embed.tok");
    emb.value().setZero();
    // bos points along axis 0; the target token reads 20/sqrt(d) from it.
    emb.at(tok::bos, 0) = 1.0;
    const int32_t target = 13;
    emb.at(target, 0) = 20.0 / std::sqrt(static_cast<double>(d));

    TokenBatch batch;
    batch.enc_ids = {{8}};
    batch.enc_mask = {{1}};
    batch.dec_in_ids = {{tok::bos}};
    batch.dec_target_ids = {{target}};
    Graph<double> g(false);
    auto loss = teacher_forced_loss(g, model, batch);
    CHECK(loss.item() < 1e-3);
}

TEST_CASE("all-padding target is a contract violation") {
    Seq2SeqModel<double> model(ArchitectureDims::tiny(), 6);
    TokenBatch batch;
    batch.enc_ids = {{8}};
    batch.enc_mask = {{1}};
    batch.dec_in_ids = {{tok::bos}};
    batch.dec_target_ids = {{tok::pad}};
    Graph<double> g(false);
    CHECK_THROWS_AS(teacher_forced_loss(g, model, batch), ContractError);
}

TEST_CASE("hook for a nonexistent attachment point is a configuration error") {
    Seq2SeqModel<float> model(ArchitectureDims::tiny(), 7);
    PeftHooks<float> hooks;
    hooks.declared_sites = {"enc.5.self"};
    Graph<float> g(false);
    CHECK_THROWS_AS(forward_logits(g, model, tiny_batch(), hooks), ConfigError);
}

TEST_CASE("appending padding leaves the loss unchanged") {
    Seq2SeqModel<double> model(ArchitectureDims::tiny(), 8);
    auto batch = tiny_batch();
    Graph<double> g(false);
    const double base = teacher_forced_loss(g, model, batch).item();

    TokenBatch padded = batch;
    for (auto& row : padded.enc_ids) row.insert(row.end(), 3, tok::pad);
    for (auto& row : padded.enc_mask) row.insert(row.end(), 3, 0);
    for (auto& row : padded.dec_in_ids) row.insert(row.end(), 2, tok::pad);
    for (auto& row : padded.dec_target_ids) row.insert(row.end(), 2, tok::pad);
    const double with_pad = teacher_forced_loss(g, model, padded).item();
    CHECK(std::abs(base - with_pad) < 1e-6);
}

TEST_CASE("full-model gradient check on the smallest instantiation") {
    Seq2SeqModel<double> model(ArchitectureDims::tiny(), 9);
    auto batch = TokenBatch::from_sequences({{8, 9, 10}}, {{11, 12}});
    std::vector<Tensor<double>> params;
    for (auto& [name, t] : model.parameters()) params.push_back(t);
    double err = grad_check<double>(params,
                                    [&](Graph<double>& g) {
                                        return teacher_forced_loss(g, model, batch);
                                    },
                                    1e-5);
    CHECK(err < 1e-4);
}

TEST_CASE("forward is deterministic") {
    Seq2SeqModel<float> model(ArchitectureDims::tiny(), 10);
    auto batch = tiny_batch();
    Graph<float> g(false);
    auto a = forward_logits(g, model, batch);
    auto b = forward_logits(g, model, batch);
    for (Index i = 0; i < a.numel(); ++i) CHECK(a.value()[i] == b.value()[i]);
}

TEST_CASE("loss decreases over 50 steps on one memorizable pair") {
    Seq2SeqModel<float> model(ArchitectureDims::tiny(), 11);
    auto batch = TokenBatch::from_sequences({{8, 9, 10}}, {{11, 12, 13}});
    AdamOptimizer<float> opt(1e-2);
    double first = 0, last = 0;
    for (int step = 0; step < 50; ++step) {
        Graph<float> g;
        auto loss = teacher_forced_loss(g, model, batch);
        if (step == 0) first = loss.item();
        last = loss.item();
        g.backward(loss);
        opt.step(model.parameters());
        zero_grads(model.parameters());
    }
    CHECK(last < first);
}

TEST_CASE("greedy decode: memorized pair, bounds, determinism") {
    Seq2SeqModel<float> model(ArchitectureDims::tiny(), 12);
    std::vector<int32_t> enc = {8, 9, 10};
    std::vector<int32_t> ref = {11, 12, 13, 14};
    auto batch = TokenBatch::from_sequences({enc}, {ref});
    AdamOptimizer<float> opt(1e-2);
    for (int step = 0; step < 400; ++step) {
        Graph<float> g;
        auto loss = teacher_forced_loss(g, model, batch);
        g.backward(loss);
        opt.step(model.parameters());
        zero_grads(model.parameters());
    }
    auto out = greedy_decode(model, enc, {}, 16);
    CHECK(out == ref);

    auto short_out = greedy_decode(model, enc, {}, 1);
    CHECK(short_out.size() <= 1);

    auto again = greedy_decode(model, enc, {}, 16);
    CHECK(again == out);
}
