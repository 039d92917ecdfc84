#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "peftforge/dims.hpp"
#include "peftforge/ops.hpp"
#include "peftforge/rng.hpp"
#include "peftforge/tokens.hpp"

namespace peftforge {

/// Rectangular token batch. Rows are padded with tok::pad; masks mark real
/// positions and must align with the id matrices.
struct TokenBatch {
    std::vector<std::vector<int32_t>> enc_ids;
    std::vector<std::vector<int32_t>> dec_in_ids;
    std::vector<std::vector<int32_t>> dec_target_ids;
    std::vector<std::vector<uint8_t>> enc_mask;

    size_t batch_size() const { return enc_ids.size(); }

    /// Builds a batch from ragged sequences: appends eos to the encoder side,
    /// derives decoder inputs as bos-shifted targets, pads to rectangles.
    static TokenBatch from_sequences(const std::vector<std::vector<int32_t>>& enc,
                                     const std::vector<std::vector<int32_t>>& target) {
        if (enc.size() != target.size() || enc.empty())
            throw ContractError("TokenBatch: need equally many non-empty encoder/target rows");
        TokenBatch b;
        size_t enc_len = 0, dec_len = 0;
        for (const auto& row : enc) enc_len = std::max(enc_len, row.size() + 1);
        for (const auto& row : target) dec_len = std::max(dec_len, row.size() + 1);
        for (size_t i = 0; i < enc.size(); ++i) {
            std::vector<int32_t> e = enc[i];
            e.push_back(tok::eos);
            std::vector<uint8_t> mask(enc_len, 0);
            for (size_t j = 0; j < e.size(); ++j) mask[j] = 1;
            e.resize(enc_len, tok::pad);

            std::vector<int32_t> tgt = target[i];
            tgt.push_back(tok::eos);
            std::vector<int32_t> din;
            din.push_back(tok::bos);
            din.insert(din.end(), tgt.begin(), tgt.end() - 1);
            tgt.resize(dec_len, tok::pad);
            din.resize(dec_len, tok::pad);

            b.enc_ids.push_back(std::move(e));
            b.enc_mask.push_back(std::move(mask));
            b.dec_in_ids.push_back(std::move(din));
            b.dec_target_ids.push_back(std::move(tgt));
        }
        return b;
    }
};

enum class ProjRole { query, key, value, output };

/// The attachment interface tuning methods hook into. Every functional is
/// optional; an empty hook table is the plain backbone. `declared_sites`
/// is validated against the model's attachment points on every forward.
template <typename S>
struct PeftHooks {
    // Encoder embedding output -> (possibly row-extended matrix, prepended row count).
    std::function<std::pair<Tensor<S>, Index>(Graph<S>&, const Tensor<S>&)> embedding_output;
    // Wraps a projection x*W at an attention site (LoRA-style deltas).
    std::function<Tensor<S>(Graph<S>&, const std::string& site, ProjRole, const Tensor<S>& x,
                            const Tensor<S>& w, const Tensor<S>& layer_pool)>
        projection;
    // Transforms the post-projection key/value streams; returns the streams
    // (possibly with prefix rows prepended) and the prefix length.
    std::function<std::tuple<Tensor<S>, Tensor<S>, Index>(Graph<S>&, const std::string& site,
                                                          const Tensor<S>& k, const Tensor<S>& v,
                                                          const Tensor<S>& layer_pool)>
        attn_kv;
    // Rescales the FFN inner activation (site "enc.i" / "dec.i").
    std::function<Tensor<S>(Graph<S>&, const std::string& layer, const Tensor<S>& inner)> ffn_inner;
    // Transforms the residual stream after the FFN sublayer (adapters).
    std::function<Tensor<S>(Graph<S>&, const std::string& layer, const Tensor<S>& h,
                            const Tensor<S>& layer_pool)>
        post_ffn;

    bool needs_layer_pool = false;
    std::set<std::string> declared_sites;

    bool empty() const {
        return !embedding_output && !projection && !attn_kv && !ffn_inner && !post_ffn;
    }
};

/// T5-topology encoder-decoder: pre-RMS-norm sublayers with residuals, tied
/// input/output embeddings, relative-position bias owned by the first layer
/// of each stack and shared downward, no projection biases.
template <typename S>
class Seq2SeqModel {
  public:
    Seq2SeqModel(ArchitectureDims dims, uint64_t seed) : dims_(dims), seed_(seed) {
        dims_.validate();
        Rng rng(Rng::derive(seed, 0x5eed));
        auto normal = [&](Shape shape, double stddev) {
            Tensor<S> t = Tensor<S>::zeros(std::move(shape));
            for (Index i = 0; i < t.numel(); ++i)
                t.value()[i] = static_cast<S>(rng.next_normal() * stddev);
            return t;
        };
        const double d_in = 1.0 / std::sqrt(static_cast<double>(dims_.d_model));
        const double d_inner = 1.0 / std::sqrt(static_cast<double>(dims_.inner()));
        const double d_ff = 1.0 / std::sqrt(static_cast<double>(dims_.d_ff));

        add_param("embed.tok", normal({dims_.vocab_size, dims_.d_model}, 1.0));
        add_param("enc.relbias", Tensor<S>::zeros({dims_.rel_buckets, dims_.n_heads}));
        add_param("dec.relbias", Tensor<S>::zeros({dims_.rel_buckets, dims_.n_heads}));
        for (Index i = 0; i < dims_.n_enc_layers; ++i) {
            const std::string p = "enc." + std::to_string(i);
            add_attention(p + ".self", normal, d_in, d_inner);
            add_param(p + ".self_norm.gain", Tensor<S>::full({1, dims_.d_model}, S(1)));
            add_ffn(p, normal, d_in, d_ff);
        }
        add_param("enc.final_norm.gain", Tensor<S>::full({1, dims_.d_model}, S(1)));
        for (Index i = 0; i < dims_.n_dec_layers; ++i) {
            const std::string p = "dec." + std::to_string(i);
            add_attention(p + ".self", normal, d_in, d_inner);
            add_param(p + ".self_norm.gain", Tensor<S>::full({1, dims_.d_model}, S(1)));
            add_attention(p + ".cross", normal, d_in, d_inner);
            add_param(p + ".cross_norm.gain", Tensor<S>::full({1, dims_.d_model}, S(1)));
            add_ffn(p, normal, d_in, d_ff);
        }
        add_param("dec.final_norm.gain", Tensor<S>::full({1, dims_.d_model}, S(1)));

        for (auto& [name, t] : params_) t.set_trainable(true);
    }

    const ArchitectureDims& dims() const { return dims_; }
    uint64_t seed() const { return seed_; }

    std::map<std::string, Tensor<S>>& parameters() { return params_; }
    const std::map<std::string, Tensor<S>>& parameters() const { return params_; }

    Tensor<S>& param(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ConfigError("unknown model parameter '" + name + "'");
        return it->second;
    }
    const Tensor<S>& param(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ConfigError("unknown model parameter '" + name + "'");
        return it->second;
    }

    void set_backbone_trainable(bool on) {
        for (auto& [name, t] : params_) t.set_trainable(on);
    }

    /// Practical sequence-length cap; prompt and input rows together must fit.
    Index max_sequence() const { return max_sequence_; }
    void set_max_sequence(Index cap) { max_sequence_ = cap; }

    std::vector<std::string> attention_sites() const {
        std::vector<std::string> sites;
        for (Index i = 0; i < dims_.n_enc_layers; ++i)
            sites.push_back("enc." + std::to_string(i) + ".self");
        for (Index i = 0; i < dims_.n_dec_layers; ++i) {
            sites.push_back("dec." + std::to_string(i) + ".self");
            sites.push_back("dec." + std::to_string(i) + ".cross");
        }
        return sites;
    }

    std::vector<std::string> layer_sites() const {
        std::vector<std::string> sites;
        for (Index i = 0; i < dims_.n_enc_layers; ++i) sites.push_back("enc." + std::to_string(i));
        for (Index i = 0; i < dims_.n_dec_layers; ++i) sites.push_back("dec." + std::to_string(i));
        return sites;
    }

    /// Every point a hook may legally declare.
    std::set<std::string> attachment_points() const {
        std::set<std::string> pts = {"embedding_output"};
        for (const auto& s : attention_sites()) pts.insert(s);
        for (const auto& l : layer_sites()) {
            pts.insert(l + ".ffn_inner");
            pts.insert(l + ".post_ffn");
        }
        return pts;
    }

  private:
    template <typename F>
    void add_attention(const std::string& p, F& normal, double d_in, double d_inner) {
        add_param(p + ".wq", normal({dims_.d_model, dims_.inner()}, d_in));
        add_param(p + ".wk", normal({dims_.d_model, dims_.inner()}, d_in));
        add_param(p + ".wv", normal({dims_.d_model, dims_.inner()}, d_in));
        add_param(p + ".wo", normal({dims_.inner(), dims_.d_model}, d_inner));
    }
    template <typename F>
    void add_ffn(const std::string& p, F& normal, double d_in, double d_ff) {
        add_param(p + ".ffn.w1", normal({dims_.d_model, dims_.d_ff}, d_in));
        add_param(p + ".ffn.w2", normal({dims_.d_ff, dims_.d_model}, d_ff));
        add_param(p + ".ffn_norm.gain", Tensor<S>::full({1, dims_.d_model}, S(1)));
    }
    void add_param(const std::string& name, Tensor<S> t) {
        if (!params_.emplace(name, std::move(t)).second)
            throw ConfigError("duplicate parameter name '" + name + "'");
    }

    ArchitectureDims dims_;
    uint64_t seed_ = 0;
    Index max_sequence_ = 512;
    std::map<std::string, Tensor<S>> params_;
};

namespace detail {

/// T5 relative-position bucketing.
inline Index relative_bucket(Index relative, bool bidirectional, Index num_buckets,
                             Index max_distance) {
    Index bucket = 0;
    if (bidirectional) {
        num_buckets /= 2;
        if (relative > 0) bucket += num_buckets;
        relative = std::abs(relative);
    } else {
        relative = std::max<Index>(-relative, 0);
    }
    const Index max_exact = num_buckets / 2;
    if (relative < max_exact) return bucket + relative;
    const double log_ratio = std::log(static_cast<double>(relative) / static_cast<double>(max_exact)) /
                             std::log(static_cast<double>(max_distance) / static_cast<double>(max_exact));
    Index large = max_exact + static_cast<Index>(log_ratio * static_cast<double>(num_buckets - max_exact));
    large = std::min(large, num_buckets - 1);
    return bucket + large;
}

/// Per-head relative-position bias tensors for an (l_q x l_k) block.
template <typename S>
std::vector<Tensor<S>> position_bias(Graph<S>& g, const Tensor<S>& table,
                                     const ArchitectureDims& dims, Index l_q, Index l_k,
                                     bool bidirectional) {
    std::vector<int32_t> buckets;
    buckets.reserve(static_cast<size_t>(l_q * l_k));
    for (Index i = 0; i < l_q; ++i)
        for (Index j = 0; j < l_k; ++j)
            buckets.push_back(static_cast<int32_t>(
                relative_bucket(j - i, bidirectional, dims.rel_buckets, dims.max_rel_distance)));
    Tensor<S> rows = embedding_lookup(g, table, buckets);  // [l_q*l_k x heads]
    std::vector<Tensor<S>> per_head;
    for (Index h = 0; h < dims.n_heads; ++h)
        per_head.push_back(reshape(g, slice_cols(g, rows, h, 1), {l_q, l_k}));
    return per_head;
}

template <typename S>
Tensor<S> apply_projection(Graph<S>& g, const PeftHooks<S>& hooks, const std::string& site,
                           ProjRole role, const Tensor<S>& x, const Tensor<S>& w,
                           const Tensor<S>& layer_pool) {
    if (hooks.projection) return hooks.projection(g, site, role, x, w, layer_pool);
    return matmul(g, x, w);
}

/// One multi-head attention sublayer (input already normalized).
/// `key_mask[j]` marks attendable key positions; `causal` additionally
/// restricts queries to keys at or before their own position.
template <typename S>
Tensor<S> attention(Graph<S>& g, Seq2SeqModel<S>& model, const PeftHooks<S>& hooks,
                    const std::string& site, const Tensor<S>& x_q, const Tensor<S>& x_kv,
                    const std::vector<uint8_t>& key_mask, bool causal,
                    const std::vector<Tensor<S>>* bias, const Tensor<S>& layer_pool) {
    const auto& dims = model.dims();
    Tensor<S> q = apply_projection(g, hooks, site, ProjRole::query, x_q, model.param(site + ".wq"),
                                   layer_pool);
    Tensor<S> k = apply_projection(g, hooks, site, ProjRole::key, x_kv, model.param(site + ".wk"),
                                   layer_pool);
    Tensor<S> v = apply_projection(g, hooks, site, ProjRole::value, x_kv, model.param(site + ".wv"),
                                   layer_pool);

    Index prefix_len = 0;
    if (hooks.attn_kv) {
        auto [k2, v2, p] = hooks.attn_kv(g, site, k, v, layer_pool);
        k = k2;
        v = v2;
        prefix_len = p;
    }
    const Index l_q = q.rows();
    const Index l_k = static_cast<Index>(key_mask.size());
    if (k.rows() != prefix_len + l_k)
        throw ShapeError("attention: key rows " + std::to_string(k.rows()) +
                         " inconsistent with mask length " + std::to_string(l_k) +
                         " plus prefix " + std::to_string(prefix_len));

    // Additive mask: 0 where attendable, -1e9 elsewhere. Prefix positions are
    // visible to every query.
    MatrixR<S> mask = MatrixR<S>::Zero(l_q, prefix_len + l_k);
    for (Index i = 0; i < l_q; ++i)
        for (Index j = 0; j < l_k; ++j) {
            const bool blocked = key_mask[static_cast<size_t>(j)] == 0 || (causal && j > i);
            if (blocked) mask(i, prefix_len + j) = S(-1e9);
        }

    Tensor<S> zero_bias_cols;
    if (bias && prefix_len > 0) zero_bias_cols = Tensor<S>::matrix(l_q, prefix_len);

    std::vector<Tensor<S>> heads;
    for (Index h = 0; h < dims.n_heads; ++h) {
        Tensor<S> qh = slice_cols(g, q, h * dims.d_kv, dims.d_kv);
        Tensor<S> kh = slice_cols(g, k, h * dims.d_kv, dims.d_kv);
        Tensor<S> vh = slice_cols(g, v, h * dims.d_kv, dims.d_kv);
        Tensor<S> scores = matmul(g, qh, transpose(g, kh));
        if (bias) {
            Tensor<S> bh = (*bias)[static_cast<size_t>(h)];
            if (prefix_len > 0) bh = concat_cols(g, zero_bias_cols, bh);
            scores = add(g, scores, bh);
        }
        scores = add_constant(g, scores, mask);
        heads.push_back(matmul(g, softmax_rows(g, scores), vh));
    }
    Tensor<S> ctx = heads[0];
    for (size_t h = 1; h < heads.size(); ++h) ctx = concat_cols(g, ctx, heads[h]);
    return apply_projection(g, hooks, site, ProjRole::output, ctx, model.param(site + ".wo"),
                            layer_pool);
}

template <typename S>
Tensor<S> ffn_sublayer(Graph<S>& g, Seq2SeqModel<S>& model, const PeftHooks<S>& hooks,
                       const std::string& layer, const Tensor<S>& x, const Tensor<S>& layer_pool) {
    Tensor<S> normed = rms_norm(g, x, model.param(layer + ".ffn_norm.gain"));
    Tensor<S> inner = relu(g, matmul(g, normed, model.param(layer + ".ffn.w1")));
    if (hooks.ffn_inner) inner = hooks.ffn_inner(g, layer, inner);
    Tensor<S> out = add(g, x, matmul(g, inner, model.param(layer + ".ffn.w2")));
    if (hooks.post_ffn) out = hooks.post_ffn(g, layer, out, layer_pool);
    return out;
}

template <typename S>
Tensor<S> layer_pool_of(Graph<S>& g, const PeftHooks<S>& hooks, const Tensor<S>& x) {
    if (!hooks.needs_layer_pool) return Tensor<S>();
    return mean_rows(g, x);
}

/// Encoder pass for one sequence; returns final states and widens the mask
/// when a prompt hook prepends rows.
template <typename S>
Tensor<S> encode_sequence(Graph<S>& g, Seq2SeqModel<S>& model, const std::vector<int32_t>& ids,
                          const std::vector<uint8_t>& mask, const PeftHooks<S>& hooks,
                          std::vector<uint8_t>& mask_out) {
    const auto& dims = model.dims();
    Tensor<S> x = embedding_lookup(g, model.param("embed.tok"), ids);
    Index prompt_rows = 0;
    if (hooks.embedding_output) {
        auto [extended, k] = hooks.embedding_output(g, x);
        x = extended;
        prompt_rows = k;
        if (x.rows() > model.max_sequence())
            throw ConfigError("prompt rows plus input length " + std::to_string(x.rows()) +
                              " exceed the positional capacity of " +
                              std::to_string(model.max_sequence()));
    }
    mask_out.assign(static_cast<size_t>(prompt_rows), 1);
    mask_out.insert(mask_out.end(), mask.begin(), mask.end());

    auto bias = position_bias(g, model.param("enc.relbias"), dims, x.rows(), x.rows(),
                              /*bidirectional=*/true);
    for (Index i = 0; i < dims.n_enc_layers; ++i) {
        const std::string layer = "enc." + std::to_string(i);
        Tensor<S> pool = layer_pool_of(g, hooks, x);
        Tensor<S> normed = rms_norm(g, x, model.param(layer + ".self_norm.gain"));
        Tensor<S> att = attention(g, model, hooks, layer + ".self", normed, normed, mask_out,
                                  /*causal=*/false, &bias, pool);
        x = add(g, x, att);
        x = ffn_sublayer(g, model, hooks, layer, x, pool);
    }
    return rms_norm(g, x, model.param("enc.final_norm.gain"));
}

/// Decoder pass for one sequence over precomputed encoder states.
template <typename S>
Tensor<S> decode_logits(Graph<S>& g, Seq2SeqModel<S>& model, const Tensor<S>& enc_states,
                        const std::vector<uint8_t>& enc_mask, const std::vector<int32_t>& dec_in,
                        const PeftHooks<S>& hooks) {
    const auto& dims = model.dims();
    Tensor<S> x = embedding_lookup(g, model.param("embed.tok"), dec_in);
    const Index t = x.rows();
    std::vector<uint8_t> self_mask(static_cast<size_t>(t), 1);

    auto bias = position_bias(g, model.param("dec.relbias"), dims, t, t, /*bidirectional=*/false);
    for (Index i = 0; i < dims.n_dec_layers; ++i) {
        const std::string layer = "dec." + std::to_string(i);
        Tensor<S> pool = layer_pool_of(g, hooks, x);
        Tensor<S> normed = rms_norm(g, x, model.param(layer + ".self_norm.gain"));
        Tensor<S> att = attention(g, model, hooks, layer + ".self", normed, normed, self_mask,
                                  /*causal=*/true, &bias, pool);
        x = add(g, x, att);
        Tensor<S> cross_normed = rms_norm(g, x, model.param(layer + ".cross_norm.gain"));
        Tensor<S> cross =
            attention(g, model, hooks, layer + ".cross", cross_normed, enc_states, enc_mask,
                      /*causal=*/false, static_cast<const std::vector<Tensor<S>>*>(nullptr), pool);
        x = add(g, x, cross);
        x = ffn_sublayer(g, model, hooks, layer, x, pool);
    }
    Tensor<S> final = rms_norm(g, x, model.param("dec.final_norm.gain"));
    // Tied output projection: similarity against the embedding table.
    return matmul(g, final, transpose(g, model.param("embed.tok")));
}

template <typename S>
void validate_batch(const Seq2SeqModel<S>& model, const TokenBatch& batch) {
    if (batch.enc_ids.empty()) throw ContractError("empty batch");
    if (batch.enc_mask.size() != batch.enc_ids.size() ||
        batch.dec_in_ids.size() != batch.enc_ids.size() ||
        batch.dec_target_ids.size() != batch.enc_ids.size())
        throw ContractError("batch: row counts disagree");
    const Index vocab = model.dims().vocab_size;
    for (size_t i = 0; i < batch.enc_ids.size(); ++i) {
        if (batch.enc_mask[i].size() != batch.enc_ids[i].size())
            throw ContractError("batch: mask does not align with ids in row " + std::to_string(i));
        for (int32_t id : batch.enc_ids[i])
            if (id < 0 || id >= vocab) throw IndexError("batch: encoder id out of range");
        for (int32_t id : batch.dec_in_ids[i])
            if (id < 0 || id >= vocab) throw IndexError("batch: decoder id out of range");
    }
}

template <typename S>
void validate_hooks(const Seq2SeqModel<S>& model, const PeftHooks<S>& hooks) {
    if (hooks.declared_sites.empty()) return;
    const auto points = model.attachment_points();
    for (const auto& site : hooks.declared_sites)
        if (!points.count(site))
            throw ConfigError("hook declared for nonexistent attachment point '" + site + "'");
}

}  // namespace detail

/// Logits for every decoder position: [batch x l_dec x vocab].
template <typename S>
Tensor<S> forward_logits(Graph<S>& g, Seq2SeqModel<S>& model, const TokenBatch& batch,
                         const PeftHooks<S>& hooks = {}) {
    detail::validate_batch(model, batch);
    detail::validate_hooks(model, hooks);
    Tensor<S> stacked;
    for (size_t i = 0; i < batch.batch_size(); ++i) {
        std::vector<uint8_t> enc_mask;
        Tensor<S> enc = detail::encode_sequence(g, model, batch.enc_ids[i], batch.enc_mask[i],
                                                hooks, enc_mask);
        Tensor<S> logits = detail::decode_logits(g, model, enc, enc_mask, batch.dec_in_ids[i], hooks);
        stacked = i == 0 ? logits : concat_rows(g, stacked, logits);
    }
    return reshape(g, stacked,
                   {static_cast<Index>(batch.batch_size()),
                    static_cast<Index>(batch.dec_in_ids[0].size()), model.dims().vocab_size});
}

/// Mean cross-entropy over all non-padding target tokens in the batch.
template <typename S>
Tensor<S> teacher_forced_loss(Graph<S>& g, Seq2SeqModel<S>& model, const TokenBatch& batch,
                              const PeftHooks<S>& hooks = {}) {
    detail::validate_batch(model, batch);
    detail::validate_hooks(model, hooks);
    Tensor<S> total;
    Index total_kept = 0;
    for (size_t i = 0; i < batch.batch_size(); ++i) {
        bool any = false;
        for (int32_t t : batch.dec_target_ids[i]) any = any || t != tok::pad;
        if (!any) continue;
        std::vector<uint8_t> enc_mask;
        Tensor<S> enc = detail::encode_sequence(g, model, batch.enc_ids[i], batch.enc_mask[i],
                                                hooks, enc_mask);
        Tensor<S> logits = detail::decode_logits(g, model, enc, enc_mask, batch.dec_in_ids[i], hooks);
        Index kept = 0;
        Tensor<S> ce = cross_entropy_sum_from_logits(g, logits, batch.dec_target_ids[i], tok::pad,
                                                     &kept);
        total_kept += kept;
        total = total.valid() ? add(g, total, ce) : ce;
    }
    if (total_kept == 0) throw ContractError("teacher_forced_loss: every target is padding");
    return scale_const(g, total, S(1) / S(total_kept));
}

/// Greedy decode from bos; argmax per step with ties broken toward the lowest
/// token id; stops at eos or max_len generated tokens. Deterministic.
template <typename S>
std::vector<int32_t> greedy_decode(Seq2SeqModel<S>& model, const std::vector<int32_t>& enc_tokens,
                                   const PeftHooks<S>& hooks, int max_len) {
    if (max_len < 1) throw ContractError("greedy_decode: max_len must be >= 1");
    detail::validate_hooks(model, hooks);
    Graph<S> g(/*recording=*/false);
    std::vector<int32_t> enc_ids = enc_tokens;
    enc_ids.push_back(tok::eos);
    std::vector<uint8_t> mask(enc_ids.size(), 1);
    std::vector<uint8_t> enc_mask;
    Tensor<S> enc = detail::encode_sequence(g, model, enc_ids, mask, hooks, enc_mask);

    std::vector<int32_t> dec_in = {tok::bos};
    std::vector<int32_t> generated;
    for (int step = 0; step < max_len; ++step) {
        Tensor<S> logits = detail::decode_logits(g, model, enc, enc_mask, dec_in, hooks);
        const Index last = logits.rows() - 1;
        Index best = 0;
        for (Index v = 1; v < logits.cols(); ++v)
            if (logits.at(last, v) > logits.at(last, best)) best = v;
        if (static_cast<int32_t>(best) == tok::eos) break;
        generated.push_back(static_cast<int32_t>(best));
        dec_in.push_back(static_cast<int32_t>(best));
    }
    return generated;
}

}  // namespace peftforge
