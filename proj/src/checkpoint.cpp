#include "peftforge/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "peftforge/serialize.hpp"

namespace peftforge {

namespace {

constexpr char kMagic[8] = {'P', 'F', 'O', 'R', 'G', 'E', '0', '1'};

uint64_t fnv1a(const std::vector<char>& bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

/// The arrays a checkpoint stores for this attachment.
std::map<std::string, Tensor<float>> stored_tensors(const Seq2SeqModel<float>& model,
                                                    const AttachedModel<float>& attached) {
    std::map<std::string, Tensor<float>> out = attached.method_params;
    if (std::holds_alternative<FineTune>(attached.config))
        for (const auto& [name, t] : model.parameters()) out.emplace(name, t);
    return out;
}

}  // namespace

void save_checkpoint(const Seq2SeqModel<float>& model, const AttachedModel<float>& attached,
                     const CheckpointManifest& manifest, const std::string& path) {
    auto tensors = stored_tensors(model, attached);

    std::vector<char> payload;
    Json tensor_index = Json::array();
    for (const auto& [name, t] : tensors) {
        const size_t offset = payload.size();
        const size_t bytes = static_cast<size_t>(t.numel()) * sizeof(float);
        payload.resize(offset + bytes);
        std::memcpy(payload.data() + offset, t.value().data(), bytes);
        tensor_index.push_back(Json{{"name", name},
                                    {"shape", t.shape()},
                                    {"offset", offset},
                                    {"count", t.numel()}});
    }

    Json j{{"dims", dims_to_json(manifest.dims)},
           {"peft", peft_config_to_json(manifest.config)},
           {"vocab_hash", manifest.vocab_hash},
           {"step", manifest.step},
           {"dev_bleu", manifest.dev_bleu},
           {"backbone_seed", manifest.backbone_seed},
           {"pretrained", manifest.pretrained_path},
           {"tensors", tensor_index},
           {"payload_checksum", fnv1a(payload)}};
    const std::string header = j.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    out.write(kMagic, sizeof(kMagic));
    const uint64_t header_len = header.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

LoadedCheckpoint load_checkpoint(const std::string& path,
                                 std::optional<uint64_t> expect_vocab_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CorruptionError("checkpoint '" + path + "': bad magic");
    uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw CorruptionError("checkpoint '" + path + "': truncated manifest");
    std::vector<char> payload((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());

    Json j;
    try {
        j = Json::parse(header);
    } catch (const Json::exception& e) {
        throw CorruptionError("checkpoint '" + path + "': manifest is not JSON: " + e.what());
    }
    if (fnv1a(payload) != j.at("payload_checksum").get<uint64_t>())
        throw CorruptionError("checkpoint '" + path + "': payload checksum mismatch");

    LoadedCheckpoint loaded;
    loaded.manifest.dims = dims_from_json(j.at("dims"));
    loaded.manifest.config = peft_config_from_json(j.at("peft"));
    loaded.manifest.vocab_hash = j.at("vocab_hash").get<uint64_t>();
    loaded.manifest.step = j.at("step").get<long>();
    loaded.manifest.dev_bleu = j.at("dev_bleu").get<double>();
    loaded.manifest.backbone_seed = j.at("backbone_seed").get<uint64_t>();
    loaded.manifest.pretrained_path = j.value("pretrained", std::string());

    if (expect_vocab_hash && *expect_vocab_hash != loaded.manifest.vocab_hash)
        throw CorruptionError("checkpoint '" + path + "': vocabulary fingerprint mismatch");

    // Rebuild the backbone, then attach and overwrite the stored arrays.
    if (!loaded.manifest.pretrained_path.empty()) {
        LoadedCheckpoint base = load_checkpoint(loaded.manifest.pretrained_path);
        if (!(base.manifest.dims == loaded.manifest.dims))
            throw CorruptionError("checkpoint '" + path + "': base checkpoint dims disagree");
        loaded.model = base.model;
    } else {
        loaded.model = std::make_shared<Seq2SeqModel<float>>(loaded.manifest.dims,
                                                             loaded.manifest.backbone_seed);
    }
    Rng attach_rng(loaded.manifest.backbone_seed);
    loaded.attached = attach(*loaded.model, loaded.manifest.config, attach_rng);

    auto tensors = stored_tensors(*loaded.model, loaded.attached);
    for (const auto& jt : j.at("tensors")) {
        const std::string name = jt.at("name").get<std::string>();
        const size_t offset = jt.at("offset").get<size_t>();
        const Index count = jt.at("count").get<Index>();
        auto it = tensors.find(name);
        if (it == tensors.end())
            throw CorruptionError("checkpoint '" + path + "': unexpected tensor '" + name + "'");
        Tensor<float>& t = it->second;
        if (t.numel() != count || offset + static_cast<size_t>(count) * sizeof(float) > payload.size())
            throw CorruptionError("checkpoint '" + path + "': tensor '" + name +
                                  "' does not match the manifest");
        std::memcpy(t.value().data(), payload.data() + offset,
                    static_cast<size_t>(count) * sizeof(float));
    }
    return loaded;
}

}  // namespace peftforge
