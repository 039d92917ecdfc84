#pragma once

#include <string>

#include "peftforge/errors.hpp"
#include "peftforge/tensor.hpp"

namespace peftforge {

/// Encoder-decoder hyperparameters. The attention inner width is
/// n_heads * d_kv and is decoupled from d_model.
struct ArchitectureDims {
    Index d_model = 64;
    Index d_ff = 256;
    Index n_heads = 4;
    Index d_kv = 16;
    Index n_enc_layers = 2;
    Index n_dec_layers = 2;
    Index vocab_size = 512;
    Index rel_buckets = 8;
    Index max_rel_distance = 16;

    Index inner() const { return n_heads * d_kv; }
    Index n_layers() const { return n_enc_layers + n_dec_layers; }
    /// Attention modules: one self per encoder layer, self + cross per decoder layer.
    Index n_attention_modules() const { return n_enc_layers + 2 * n_dec_layers; }

    void validate() const {
        if (d_model < 1 || d_ff < 1 || n_heads < 1 || d_kv < 1 || n_enc_layers < 1 ||
            n_dec_layers < 1 || vocab_size < 1 || rel_buckets < 1 || max_rel_distance < 1)
            throw ConfigError("architecture dims: every field must be >= 1");
    }

    /// The audit preset; not meant to be instantiated as a runnable model.
    static ArchitectureDims t5_large() {
        return {1024, 4096, 16, 64, 24, 24, 32128, 32, 128};
    }

    /// CPU-trainable preset used by the experiment harness.
    static ArchitectureDims toy() { return {64, 256, 4, 16, 2, 2, 512, 8, 16}; }

    /// Smallest instantiation, for gradient checking.
    static ArchitectureDims tiny() { return {8, 16, 2, 4, 1, 1, 24, 4, 8}; }

    bool operator==(const ArchitectureDims&) const = default;
};

inline ArchitectureDims dims_preset(const std::string& name) {
    if (name == "t5-large") return ArchitectureDims::t5_large();
    if (name == "toy") return ArchitectureDims::toy();
    if (name == "tiny") return ArchitectureDims::tiny();
    throw ConfigError("unknown dims preset '" + name + "' (expected t5-large, toy, or tiny)");
}

}  // namespace peftforge
