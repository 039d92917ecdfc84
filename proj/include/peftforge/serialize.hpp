#pragma once

#include <json.hpp>

#include "peftforge/dims.hpp"
#include "peftforge/peft.hpp"

namespace peftforge {

using Json = nlohmann::json;

inline Json dims_to_json(const ArchitectureDims& d) {
    return Json{{"d_model", d.d_model},
                {"d_ff", d.d_ff},
                {"n_heads", d.n_heads},
                {"d_kv", d.d_kv},
                {"n_enc_layers", d.n_enc_layers},
                {"n_dec_layers", d.n_dec_layers},
                {"vocab_size", d.vocab_size},
                {"rel_buckets", d.rel_buckets},
                {"max_rel_distance", d.max_rel_distance}};
}

inline ArchitectureDims dims_from_json(const Json& j) {
    ArchitectureDims d;
    d.d_model = j.at("d_model").get<Index>();
    d.d_ff = j.at("d_ff").get<Index>();
    d.n_heads = j.at("n_heads").get<Index>();
    d.d_kv = j.at("d_kv").get<Index>();
    d.n_enc_layers = j.at("n_enc_layers").get<Index>();
    d.n_dec_layers = j.at("n_dec_layers").get<Index>();
    d.vocab_size = j.at("vocab_size").get<Index>();
    d.rel_buckets = j.value("rel_buckets", Index(8));
    d.max_rel_distance = j.value("max_rel_distance", Index(16));
    d.validate();
    return d;
}

/// Accepts a preset name ("t5-large", "toy", "tiny") or a dims object.
inline ArchitectureDims dims_from_json_or_preset(const Json& j) {
    if (j.is_string()) return dims_preset(j.get<std::string>());
    return dims_from_json(j);
}

inline std::string to_string(ScaleShape s) {
    switch (s) {
        case ScaleShape::vector: return "vector";
        case ScaleShape::scalar: return "scalar";
        case ScaleShape::matrix: return "matrix";
    }
    return "vector";
}

inline std::string to_string(PrefixPlacement p) {
    switch (p) {
        case PrefixPlacement::all_attention: return "all_attention";
        case PrefixPlacement::encoder_only: return "encoder_only";
        case PrefixPlacement::enc_and_dec_self: return "enc_and_dec_self";
    }
    return "all_attention";
}

inline Json peft_config_to_json(const PeftConfig& config) {
    Json j;
    j["method"] = method_name(config);
    if (const auto* c = std::get_if<PromptTuning>(&config)) {
        j["k"] = c->k;
    } else if (const auto* c = std::get_if<ScaledPromptTuning>(&config)) {
        j["k"] = c->k;
        j["scale_shape"] = to_string(c->scale_shape);
    } else if (const auto* c = std::get_if<PrefixTuning>(&config)) {
        j["len"] = c->len;
        j["placement"] = to_string(c->placement);
    } else if (const auto* c = std::get_if<LoRA>(&config)) {
        j["rank"] = c->rank;
        j["delta_scale"] = c->delta_scale;
    } else if (const auto* c = std::get_if<BottleneckAdapter>(&config)) {
        j["reduction"] = c->reduction;
    } else if (const auto* c = std::get_if<Compacter>(&config)) {
        j["phm_n"] = c->phm_n;
        j["reduction"] = c->reduction;
        j["factor_rank"] = c->factor_rank;
        j["share_slow"] = c->share_slow;
    } else if (const auto* c = std::get_if<UniPELT>(&config)) {
        j["adapter_r"] = c->adapter_r;
        j["lora_rank"] = c->lora_rank;
        j["prefix_len"] = c->prefix_len;
    }
    return j;
}

inline PeftConfig peft_config_from_json(const Json& j) {
    const std::string method = j.at("method").get<std::string>();
    auto scale_shape = [&](const std::string& s) {
        if (s == "vector") return ScaleShape::vector;
        if (s == "scalar") return ScaleShape::scalar;
        if (s == "matrix") return ScaleShape::matrix;
        throw ConfigError("unknown scale_shape '" + s + "'");
    };
    auto placement = [&](const std::string& s) {
        if (s == "all_attention") return PrefixPlacement::all_attention;
        if (s == "encoder_only") return PrefixPlacement::encoder_only;
        if (s == "enc_and_dec_self") return PrefixPlacement::enc_and_dec_self;
        throw ConfigError("unknown prefix placement '" + s + "'");
    };
    if (method == "fine_tune") return FineTune{};
    if (method == "prompt_tuning") return PromptTuning{j.value("k", Index(50))};
    if (method == "scaled_prompt_tuning")
        return ScaledPromptTuning{j.value("k", Index(50)),
                                  scale_shape(j.value("scale_shape", std::string("vector")))};
    if (method == "prefix_tuning")
        return PrefixTuning{j.value("len", Index(5)),
                            placement(j.value("placement", std::string("all_attention")))};
    if (method == "lora") return LoRA{j.value("rank", Index(8)), j.value("delta_scale", 1.0)};
    if (method == "bottleneck_adapter") return BottleneckAdapter{j.value("reduction", Index(16))};
    if (method == "compacter")
        return Compacter{j.value("phm_n", Index(8)), j.value("reduction", Index(16)),
                         j.value("factor_rank", Index(1)), j.value("share_slow", true)};
    if (method == "ia3") return IA3{};
    if (method == "unipelt")
        return UniPELT{j.value("adapter_r", Index(16)), j.value("lora_rank", Index(8)),
                       j.value("prefix_len", Index(5))};
    throw ConfigError("unknown tuning method '" + method + "'");
}

}  // namespace peftforge
