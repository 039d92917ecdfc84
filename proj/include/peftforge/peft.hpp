#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "peftforge/model.hpp"
#include "peftforge/rng.hpp"

namespace peftforge {

// ---------------------------------------------------------------------------
// Method configurations
// ---------------------------------------------------------------------------

enum class ScaleShape { vector, scalar, matrix };
enum class PrefixPlacement { all_attention, encoder_only, enc_and_dec_self };

struct FineTune {};

struct PromptTuning {
    Index k = 50;
};

struct ScaledPromptTuning {
    Index k = 50;
    ScaleShape scale_shape = ScaleShape::vector;
};

struct PrefixTuning {
    Index len = 5;
    PrefixPlacement placement = PrefixPlacement::all_attention;
};

struct LoRA {
    Index rank = 8;
    double delta_scale = 1.0;  // no alpha/rank scaling by default
};

struct BottleneckAdapter {
    Index reduction = 16;
};

struct Compacter {
    Index phm_n = 8;
    Index reduction = 16;
    Index factor_rank = 1;
    bool share_slow = true;
};

struct IA3 {};

struct UniPELT {
    Index adapter_r = 16;
    Index lora_rank = 8;
    Index prefix_len = 5;
};

using PeftConfig = std::variant<FineTune, PromptTuning, ScaledPromptTuning, PrefixTuning, LoRA,
                                BottleneckAdapter, Compacter, IA3, UniPELT>;

inline std::string method_name(const PeftConfig& config) {
    struct Visitor {
        std::string operator()(const FineTune&) const { return "fine_tune"; }
        std::string operator()(const PromptTuning&) const { return "prompt_tuning"; }
        std::string operator()(const ScaledPromptTuning&) const { return "scaled_prompt_tuning"; }
        std::string operator()(const PrefixTuning&) const { return "prefix_tuning"; }
        std::string operator()(const LoRA&) const { return "lora"; }
        std::string operator()(const BottleneckAdapter&) const { return "bottleneck_adapter"; }
        std::string operator()(const Compacter&) const { return "compacter"; }
        std::string operator()(const IA3&) const { return "ia3"; }
        std::string operator()(const UniPELT&) const { return "unipelt"; }
    };
    return std::visit(Visitor{}, config);
}

/// Attention sites a prefix placement covers.
inline std::vector<std::string> prefix_sites(const ArchitectureDims& dims,
                                             PrefixPlacement placement) {
    std::vector<std::string> sites;
    for (Index i = 0; i < dims.n_enc_layers; ++i)
        sites.push_back("enc." + std::to_string(i) + ".self");
    if (placement == PrefixPlacement::encoder_only) return sites;
    for (Index i = 0; i < dims.n_dec_layers; ++i)
        sites.push_back("dec." + std::to_string(i) + ".self");
    if (placement == PrefixPlacement::enc_and_dec_self) return sites;
    for (Index i = 0; i < dims.n_dec_layers; ++i)
        sites.push_back("dec." + std::to_string(i) + ".cross");
    return sites;
}

inline void validate_config(const PeftConfig& config, const ArchitectureDims& dims) {
    auto require_divides = [&](Index reduction, const char* who) {
        if (reduction < 1) throw ConfigError(std::string(who) + ": reduction must be >= 1");
        if (dims.d_model % reduction != 0)
            throw ConfigError(std::string(who) + ": reduction " + std::to_string(reduction) +
                              " does not divide d_model " + std::to_string(dims.d_model));
    };
    if (const auto* c = std::get_if<PromptTuning>(&config)) {
        if (c->k < 1) throw ConfigError("prompt_tuning: k must be >= 1");
    } else if (const auto* c = std::get_if<ScaledPromptTuning>(&config)) {
        if (c->k < 1) throw ConfigError("scaled_prompt_tuning: k must be >= 1");
    } else if (const auto* c = std::get_if<PrefixTuning>(&config)) {
        if (c->len < 1) throw ConfigError("prefix_tuning: len must be >= 1");
    } else if (const auto* c = std::get_if<LoRA>(&config)) {
        if (c->rank < 1) throw ConfigError("lora: rank must be >= 1");
    } else if (const auto* c = std::get_if<BottleneckAdapter>(&config)) {
        require_divides(c->reduction, "bottleneck_adapter");
    } else if (const auto* c = std::get_if<Compacter>(&config)) {
        require_divides(c->reduction, "compacter");
        if (c->phm_n < 1 || c->factor_rank < 1)
            throw ConfigError("compacter: phm_n and factor_rank must be >= 1");
        const Index bottleneck = dims.d_model / c->reduction;
        if (dims.d_model % c->phm_n != 0 || bottleneck % c->phm_n != 0)
            throw ConfigError("compacter: phm_n " + std::to_string(c->phm_n) +
                              " must divide both d_model " + std::to_string(dims.d_model) +
                              " and the bottleneck width " + std::to_string(bottleneck));
    } else if (const auto* c = std::get_if<UniPELT>(&config)) {
        if (c->adapter_r < 1 || c->lora_rank < 1 || c->prefix_len < 1)
            throw ConfigError("unipelt: missing sub-method (adapter_r, lora_rank and prefix_len "
                              "must all be >= 1)");
        require_divides(c->adapter_r, "unipelt adapter");
    }
}

// ---------------------------------------------------------------------------
// Method primitives
// ---------------------------------------------------------------------------

/// X_h = [X_p; X_e].
template <typename S>
Tensor<S> compose_prompt(Graph<S>& g, const Tensor<S>& prompt, const Tensor<S>& input_emb) {
    if (prompt.rows() == 0) return input_emb;
    return concat_rows(g, prompt, input_emb);
}

/// X_h = [scale ⊙ X_p; X_e] with the shape-appropriate scaling.
template <typename S>
Tensor<S> compose_scaled_prompt(Graph<S>& g, const Tensor<S>& prompt, const Tensor<S>& scale,
                                ScaleShape shape, const Tensor<S>& input_emb) {
    Tensor<S> scaled;
    switch (shape) {
        case ScaleShape::vector: scaled = row_scale(g, prompt, scale); break;
        case ScaleShape::scalar: scaled = scalar_scale(g, prompt, scale); break;
        case ScaleShape::matrix: scaled = multiply(g, prompt, scale); break;
    }
    if (scaled.rows() == 0) return input_emb;
    return concat_rows(g, scaled, input_emb);
}

/// K' = [prefix_k; K], V' = [prefix_v; V].
template <typename S>
std::pair<Tensor<S>, Tensor<S>> prefix_kv_extend(Graph<S>& g, const Tensor<S>& keys,
                                                 const Tensor<S>& values,
                                                 const Tensor<S>& prefix_k,
                                                 const Tensor<S>& prefix_v) {
    if (prefix_k.rows() != prefix_v.rows())
        throw ShapeError("prefix_kv_extend: prefix key rows " + shape_str(prefix_k.shape()) +
                         " vs value rows " + shape_str(prefix_v.shape()));
    if (prefix_k.rows() == 0) return {keys, values};
    return {concat_rows(g, prefix_k, keys), concat_rows(g, prefix_v, values)};
}

/// Column-convention LoRA: out = W·x + B·(A·x), for W [d_out x d_in],
/// A [r x d_in], B [d_out x r], x [d_in x m].
template <typename S>
Tensor<S> lora_apply(Graph<S>& g, const Tensor<S>& w, const Tensor<S>& a, const Tensor<S>& b,
                     const Tensor<S>& x) {
    if (a.rows() != b.cols())
        throw ShapeError("lora_apply: rank mismatch, A " + shape_str(a.shape()) + " vs B " +
                         shape_str(b.shape()));
    return add(g, matmul(g, w, x), matmul(g, b, matmul(g, a, x)));
}

/// W_merged = W + B·A; removes the extra matmuls at inference time.
template <typename S>
Tensor<S> lora_merge(const Tensor<S>& w, const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rows() != b.cols())
        throw ShapeError("lora_merge: rank mismatch, A " + shape_str(a.shape()) + " vs B " +
                         shape_str(b.shape()));
    Tensor<S> merged = Tensor<S>::matrix(w.rows(), w.cols());
    merged.mat() = w.mat() + b.mat() * a.mat();
    return merged;
}

/// Residual bottleneck: h + relu(h·W_down + b_down)·W_up + b_up.
/// Zero-initialized up-projection makes this the identity.
template <typename S>
Tensor<S> bottleneck_forward(Graph<S>& g, const Tensor<S>& h, const Tensor<S>& w_down,
                             const Tensor<S>& b_down, const Tensor<S>& w_up,
                             const Tensor<S>& b_up) {
    Tensor<S> inner = relu(g, add_rowvec(g, matmul(g, h, w_down), b_down));
    Tensor<S> delta = add_rowvec(g, matmul(g, inner, w_up), b_up);
    return add(g, h, delta);
}

/// PHM linear layer: W = Σ_i kron(A_i, B_i), out = x·Wᵀ + bias.
/// A_i are [n x n]; B_i are [(d_out/n) x (d_in/n)].
template <typename S>
Tensor<S> phm_linear(Graph<S>& g, const Tensor<S>& x, const std::vector<Tensor<S>>& a,
                     const std::vector<Tensor<S>>& b, const Tensor<S>& bias) {
    if (a.empty() || a.size() != b.size())
        throw ConfigError("phm_linear: need equally many slow and fast factors");
    const Index n = a[0].rows();
    const Index d_out = n * b[0].rows();
    const Index d_in = n * b[0].cols();
    if (x.cols() != d_in)
        throw ShapeError("phm_linear: input " + shape_str(x.shape()) + " does not match d_in " +
                         std::to_string(d_in));
    Tensor<S> w = kron(g, a[0], b[0]);
    for (size_t i = 1; i < a.size(); ++i) w = add(g, w, kron(g, a[i], b[i]));
    Tensor<S> out = matmul(g, x, transpose(g, w));
    (void)d_out;
    return add_rowvec(g, out, bias);
}

/// Elementwise column-broadcast rescale (IA3's primitive).
template <typename S>
Tensor<S> ia3_rescale(Graph<S>& g, const Tensor<S>& stream, const Tensor<S>& l_vec) {
    return col_scale(g, stream, l_vec);
}

// ---------------------------------------------------------------------------
// Attachment
// ---------------------------------------------------------------------------

namespace detail {

/// "enc.2.self" -> "enc.2"; gates and pools are per layer.
inline std::string layer_of_site(const std::string& site) {
    const auto pos = site.rfind('.');
    return site.substr(0, pos);
}

template <typename S>
struct AdapterSite {
    Tensor<S> down_w, down_b, up_w, up_b;
};

template <typename S>
struct PhmLayer {
    std::vector<Tensor<S>> a;     // slow [n x n] factors (possibly shared)
    std::vector<Tensor<S>> s, t;  // fast factors; B_i = s_i · t_iᵀ
    Tensor<S> bias;
};

template <typename S>
struct PhmAdapterSite {
    PhmLayer<S> down, up;
};

template <typename S>
struct LoraTarget {
    Tensor<S> a, b;
};

/// Everything the hook closures consult at forward time.
template <typename S>
struct MethodState {
    // prompt composition
    bool has_prompt = false;
    bool scaled = false;
    Tensor<S> prompt, scale;
    ScaleShape scale_shape = ScaleShape::vector;

    // prefix
    std::map<std::string, std::pair<Tensor<S>, Tensor<S>>> prefix;  // site -> (k, v)

    // lora (query/value targets per attention site)
    std::map<std::string, LoraTarget<S>> lora_q, lora_v;
    S lora_scale = S(1);

    // adapters
    std::map<std::string, AdapterSite<S>> adapters;           // layer -> tensors
    std::map<std::string, PhmAdapterSite<S>> phm_adapters;    // layer -> tensors

    // ia3
    std::map<std::string, Tensor<S>> ia3_k, ia3_v, ia3_ff;

    // unipelt gates: layer -> w_g
    bool gated = false;
    std::map<std::string, Tensor<S>> gate_adapter, gate_lora, gate_prefix;
};

template <typename S>
Tensor<S> gate_value(Graph<S>& g, const Tensor<S>& layer_pool, const Tensor<S>& w_g) {
    return sigmoid(g, matmul(g, layer_pool, w_g));
}

template <typename S>
PeftHooks<S> build_hooks(std::shared_ptr<MethodState<S>> st) {
    PeftHooks<S> hooks;
    hooks.needs_layer_pool = st->gated;

    if (st->has_prompt) {
        hooks.embedding_output = [st](Graph<S>& g, const Tensor<S>& emb) {
            Tensor<S> composed =
                st->scaled
                    ? compose_scaled_prompt(g, st->prompt, st->scale, st->scale_shape, emb)
                    : compose_prompt(g, st->prompt, emb);
            return std::make_pair(composed, st->prompt.rows());
        };
    }

    if (!st->lora_q.empty()) {
        hooks.projection = [st](Graph<S>& g, const std::string& site, ProjRole role,
                                const Tensor<S>& x, const Tensor<S>& w,
                                const Tensor<S>& layer_pool) {
            Tensor<S> base = matmul(g, x, w);
            const auto* targets = role == ProjRole::query ? &st->lora_q
                                : role == ProjRole::value ? &st->lora_v
                                                          : nullptr;
            if (!targets) return base;
            auto it = targets->find(site);
            if (it == targets->end()) return base;
            Tensor<S> delta = matmul(g, matmul(g, x, it->second.a), it->second.b);
            if (st->lora_scale != S(1)) delta = scale_const(g, delta, st->lora_scale);
            if (st->gated)
                delta = scalar_scale(
                    g, delta, gate_value(g, layer_pool, st->gate_lora.at(layer_of_site(site))));
            return add(g, base, delta);
        };
    }

    if (!st->prefix.empty() || !st->ia3_k.empty()) {
        hooks.attn_kv = [st](Graph<S>& g, const std::string& site, const Tensor<S>& k,
                             const Tensor<S>& v, const Tensor<S>& layer_pool) {
            Tensor<S> keys = k, values = v;
            if (auto it = st->ia3_k.find(site); it != st->ia3_k.end())
                keys = ia3_rescale(g, keys, it->second);
            if (auto it = st->ia3_v.find(site); it != st->ia3_v.end())
                values = ia3_rescale(g, values, it->second);
            Index plen = 0;
            if (auto it = st->prefix.find(site); it != st->prefix.end()) {
                Tensor<S> pk = it->second.first;
                Tensor<S> pv = it->second.second;
                if (st->gated)
                    pv = scalar_scale(
                        g, pv, gate_value(g, layer_pool, st->gate_prefix.at(layer_of_site(site))));
                auto [ke, ve] = prefix_kv_extend(g, keys, values, pk, pv);
                keys = ke;
                values = ve;
                plen = pk.rows();
            }
            return std::make_tuple(keys, values, plen);
        };
    }

    if (!st->ia3_ff.empty()) {
        hooks.ffn_inner = [st](Graph<S>& g, const std::string& layer, const Tensor<S>& inner) {
            auto it = st->ia3_ff.find(layer);
            if (it == st->ia3_ff.end()) return inner;
            return ia3_rescale(g, inner, it->second);
        };
    }

    if (!st->adapters.empty() || !st->phm_adapters.empty()) {
        hooks.post_ffn = [st](Graph<S>& g, const std::string& layer, const Tensor<S>& h,
                              const Tensor<S>& layer_pool) {
            Tensor<S> delta;
            if (auto it = st->adapters.find(layer); it != st->adapters.end()) {
                const auto& ad = it->second;
                Tensor<S> inner = relu(g, add_rowvec(g, matmul(g, h, ad.down_w), ad.down_b));
                delta = add_rowvec(g, matmul(g, inner, ad.up_w), ad.up_b);
            } else if (auto pt = st->phm_adapters.find(layer); pt != st->phm_adapters.end()) {
                const auto& ad = pt->second;
                auto fast = [&](const PhmLayer<S>& l) {
                    std::vector<Tensor<S>> b;
                    for (size_t i = 0; i < l.s.size(); ++i)
                        b.push_back(matmul(g, l.s[i], transpose(g, l.t[i])));
                    return b;
                };
                Tensor<S> inner = relu(g, phm_linear(g, h, ad.down.a, fast(ad.down), ad.down.bias));
                delta = phm_linear(g, inner, ad.up.a, fast(ad.up), ad.up.bias);
            } else {
                return h;
            }
            if (st->gated)
                delta = scalar_scale(g, delta,
                                     gate_value(g, layer_pool, st->gate_adapter.at(layer)));
            return add(g, h, delta);
        };
    }

    return hooks;
}

}  // namespace detail

/// A backbone plus one attached tuning method: the method's parameter
/// tensors, the set of backbone names left trainable (empty except under
/// fine-tuning), and the hook table.
template <typename S>
struct AttachedModel {
    Seq2SeqModel<S>* model = nullptr;
    PeftConfig config;
    std::map<std::string, Tensor<S>> method_params;
    std::set<std::string> trainable_backbone;
    PeftHooks<S> hooks;

    /// Exactly the tensors the optimizer may update.
    std::map<std::string, Tensor<S>> trainable_params() const {
        std::map<std::string, Tensor<S>> out = method_params;
        for (const auto& name : trainable_backbone) out.emplace(name, model->param(name));
        return out;
    }
};

/// The names driving both the optimizer and the parameter audit.
template <typename S>
std::set<std::string> trainable_parameter_ids(const AttachedModel<S>& attached) {
    std::set<std::string> ids = attached.trainable_backbone;
    for (const auto& [name, t] : attached.method_params) ids.insert(name);
    return ids;
}

/// Allocates and initializes method tensors, freezes the backbone (except
/// under fine-tuning), and populates the hook table.
template <typename S>
AttachedModel<S> attach(Seq2SeqModel<S>& model, const PeftConfig& config, Rng& rng) {
    const auto& dims = model.dims();
    validate_config(config, dims);

    AttachedModel<S> attached;
    attached.model = &model;
    attached.config = config;

    if (std::holds_alternative<FineTune>(config)) {
        model.set_backbone_trainable(true);
        for (const auto& [name, t] : model.parameters()) attached.trainable_backbone.insert(name);
        return attached;
    }
    model.set_backbone_trainable(false);

    auto st = std::make_shared<detail::MethodState<S>>();
    auto add_param = [&](const std::string& name, Tensor<S> t) -> Tensor<S> {
        t.set_trainable(true);
        attached.method_params.emplace(name, t);
        return t;
    };
    auto normal_init = [&](Shape shape, double stddev) {
        Tensor<S> t = Tensor<S>::zeros(std::move(shape));
        for (Index i = 0; i < t.numel(); ++i)
            t.value()[i] = static_cast<S>(rng.next_normal() * stddev);
        return t;
    };
    // Soft prompts start as copies of randomly chosen vocabulary rows, which
    // keeps their scale aligned with real token embeddings.
    auto init_prompt = [&](Index k) {
        if (k >= model.max_sequence())
            throw ConfigError("prompt length " + std::to_string(k) +
                              " leaves no room for input under the positional capacity of " +
                              std::to_string(model.max_sequence()));
        Tensor<S> prompt = Tensor<S>::matrix(k, dims.d_model);
        const auto& emb = model.param("embed.tok");
        for (Index row = 0; row < k; ++row) {
            const Index src = static_cast<Index>(rng.next_below(static_cast<uint64_t>(dims.vocab_size)));
            prompt.mat().row(row) = emb.mat().row(src);
        }
        return prompt;
    };
    auto make_prefix = [&](Index len, PrefixPlacement placement) {
        const double stddev = 1.0 / std::sqrt(static_cast<double>(dims.d_kv));
        for (const auto& site : prefix_sites(dims, placement)) {
            Tensor<S> pk = add_param("peft.prefix." + site + ".k",
                                     normal_init({len, dims.inner()}, stddev));
            Tensor<S> pv = add_param("peft.prefix." + site + ".v",
                                     normal_init({len, dims.inner()}, stddev));
            st->prefix.emplace(site, std::make_pair(pk, pv));
        }
    };
    auto make_lora = [&](Index rank, double delta_scale) {
        const double stddev = 1.0 / std::sqrt(static_cast<double>(dims.d_model));
        st->lora_scale = static_cast<S>(delta_scale);
        for (const auto& site : model.attention_sites()) {
            detail::LoraTarget<S> q{
                add_param("peft.lora." + site + ".q.a", normal_init({dims.d_model, rank}, stddev)),
                add_param("peft.lora." + site + ".q.b", Tensor<S>::zeros({rank, dims.inner()}))};
            detail::LoraTarget<S> v{
                add_param("peft.lora." + site + ".v.a", normal_init({dims.d_model, rank}, stddev)),
                add_param("peft.lora." + site + ".v.b", Tensor<S>::zeros({rank, dims.inner()}))};
            st->lora_q.emplace(site, q);
            st->lora_v.emplace(site, v);
        }
    };
    auto make_adapters = [&](Index reduction) {
        const Index bottleneck = dims.d_model / reduction;
        const double stddev = 1.0 / std::sqrt(static_cast<double>(dims.d_model));
        for (const auto& layer : model.layer_sites()) {
            detail::AdapterSite<S> ad{
                add_param("peft.adapter." + layer + ".down_w",
                          normal_init({dims.d_model, bottleneck}, stddev)),
                add_param("peft.adapter." + layer + ".down_b", Tensor<S>::zeros({1, bottleneck})),
                add_param("peft.adapter." + layer + ".up_w",
                          Tensor<S>::zeros({bottleneck, dims.d_model})),
                add_param("peft.adapter." + layer + ".up_b", Tensor<S>::zeros({1, dims.d_model}))};
            st->adapters.emplace(layer, ad);
        }
    };

    if (const auto* c = std::get_if<PromptTuning>(&config)) {
        st->has_prompt = true;
        st->prompt = add_param("peft.prompt.embeddings", init_prompt(c->k));
    } else if (const auto* c = std::get_if<ScaledPromptTuning>(&config)) {
        st->has_prompt = true;
        st->scaled = true;
        st->scale_shape = c->scale_shape;
        st->prompt = add_param("peft.prompt.embeddings", init_prompt(c->k));
        Shape scale_shape = c->scale_shape == ScaleShape::vector ? Shape{c->k, 1}
                          : c->scale_shape == ScaleShape::scalar ? Shape{1, 1}
                                                                 : Shape{c->k, dims.d_model};
        st->scale = add_param("peft.prompt.scale", Tensor<S>::full(scale_shape, S(1)));
    } else if (const auto* c = std::get_if<PrefixTuning>(&config)) {
        make_prefix(c->len, c->placement);
    } else if (const auto* c = std::get_if<LoRA>(&config)) {
        make_lora(c->rank, c->delta_scale);
    } else if (const auto* c = std::get_if<BottleneckAdapter>(&config)) {
        make_adapters(c->reduction);
    } else if (const auto* c = std::get_if<Compacter>(&config)) {
        const Index n = c->phm_n;
        const Index bottleneck = dims.d_model / c->reduction;
        const double slow_std = 1.0 / std::sqrt(static_cast<double>(n));
        const double fast_std = 1.0 / std::sqrt(static_cast<double>(dims.d_model));
        std::vector<Tensor<S>> shared_a;
        if (c->share_slow)
            for (Index i = 0; i < n; ++i)
                shared_a.push_back(add_param("peft.compacter.shared.a" + std::to_string(i),
                                             normal_init({n, n}, slow_std)));
        for (const auto& layer : model.layer_sites()) {
            detail::PhmAdapterSite<S> site;
            auto build = [&](detail::PhmLayer<S>& phm, const std::string& tag, Index d_in,
                             Index d_out, bool zero_fast) {
                for (Index i = 0; i < n; ++i) {
                    if (c->share_slow)
                        phm.a.push_back(shared_a[static_cast<size_t>(i)]);
                    else
                        phm.a.push_back(add_param("peft.compacter." + layer + "." + tag + ".a" +
                                                      std::to_string(i),
                                                  normal_init({n, n}, slow_std)));
                    const std::string base = "peft.compacter." + layer + "." + tag;
                    phm.s.push_back(add_param(
                        base + ".s" + std::to_string(i),
                        zero_fast ? Tensor<S>::zeros({d_out / n, c->factor_rank})
                                  : normal_init({d_out / n, c->factor_rank}, fast_std)));
                    phm.t.push_back(add_param(base + ".t" + std::to_string(i),
                                              normal_init({d_in / n, c->factor_rank}, fast_std)));
                }
                phm.bias = add_param("peft.compacter." + layer + "." + tag + "_b",
                                     Tensor<S>::zeros({1, d_out}));
            };
            // zero fast factors on the up projection: the adapter starts as identity
            build(site.down, "down", dims.d_model, bottleneck, false);
            build(site.up, "up", bottleneck, dims.d_model, true);
            st->phm_adapters.emplace(layer, site);
        }
    } else if (std::holds_alternative<IA3>(config)) {
        for (const auto& site : model.attention_sites()) {
            st->ia3_k.emplace(site, add_param("peft.ia3." + site + ".k",
                                              Tensor<S>::full({dims.inner(), 1}, S(1))));
            st->ia3_v.emplace(site, add_param("peft.ia3." + site + ".v",
                                              Tensor<S>::full({dims.inner(), 1}, S(1))));
        }
        for (const auto& layer : model.layer_sites())
            st->ia3_ff.emplace(layer, add_param("peft.ia3." + layer + ".ffn",
                                                Tensor<S>::full({dims.d_ff, 1}, S(1))));
    } else if (const auto* c = std::get_if<UniPELT>(&config)) {
        st->gated = true;
        make_adapters(c->adapter_r);
        make_lora(c->lora_rank, 1.0);
        make_prefix(c->prefix_len, PrefixPlacement::all_attention);
        for (const auto& layer : model.layer_sites()) {
            st->gate_adapter.emplace(layer, add_param("peft.gate." + layer + ".adapter.w",
                                                      Tensor<S>::zeros({dims.d_model, 1})));
            st->gate_lora.emplace(layer, add_param("peft.gate." + layer + ".lora.w",
                                                   Tensor<S>::zeros({dims.d_model, 1})));
            st->gate_prefix.emplace(layer, add_param("peft.gate." + layer + ".prefix.w",
                                                     Tensor<S>::zeros({dims.d_model, 1})));
        }
    }

    attached.hooks = detail::build_hooks(st);
    return attached;
}

}  // namespace peftforge
