#pragma once

#include <memory>
#include <optional>
#include <string>

#include "peftforge/model.hpp"
#include "peftforge/peft.hpp"

namespace peftforge {

/// What a checkpoint records besides the arrays. The backbone of a
/// non-fine-tuned checkpoint is not stored; it is reproduced from
/// backbone_seed (plus, when set, the fine-tuned base checkpoint at
/// pretrained_path).
struct CheckpointManifest {
    ArchitectureDims dims;
    PeftConfig config;
    uint64_t vocab_hash = 0;
    long step = 0;
    double dev_bleu = 0.0;
    uint64_t backbone_seed = 0;
    std::string pretrained_path;
};

/// Little-endian float32 arrays after a JSON manifest; method parameters
/// always, backbone parameters only under fine-tuning. A checksum over the
/// payload guards integrity.
void save_checkpoint(const Seq2SeqModel<float>& model, const AttachedModel<float>& attached,
                     const CheckpointManifest& manifest, const std::string& path);

struct LoadedCheckpoint {
    CheckpointManifest manifest;
    std::shared_ptr<Seq2SeqModel<float>> model;
    AttachedModel<float> attached;
};

/// Rebuilds the model bitwise: backbone from seed (or the base checkpoint),
/// method tensors from the stored arrays. Validates the payload checksum and
///, when given, the expected vocabulary fingerprint.
LoadedCheckpoint load_checkpoint(const std::string& path,
                                 std::optional<uint64_t> expect_vocab_hash = std::nullopt);

}  // namespace peftforge
