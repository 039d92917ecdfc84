#include "peftforge/param_audit.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace peftforge {

namespace {

long long prefix_site_count(const ArchitectureDims& dims, PrefixPlacement placement) {
    switch (placement) {
        case PrefixPlacement::all_attention: return dims.n_attention_modules();
        case PrefixPlacement::encoder_only: return dims.n_enc_layers;
        case PrefixPlacement::enc_and_dec_self: return dims.n_enc_layers + dims.n_dec_layers;
    }
    return 0;
}

void add_adapter_counts(CountBreakdown& out, const ArchitectureDims& dims, long long reduction) {
    const long long d = dims.d_model;
    const long long b = d / reduction;
    const long long layers = dims.n_layers();
    out.per_point["adapter.down"] += layers * (d * b + b);
    out.per_point["adapter.up"] += layers * (b * d + d);
}

void add_lora_counts(CountBreakdown& out, const ArchitectureDims& dims, long long rank) {
    const long long modules = dims.n_attention_modules();
    const long long per_target = rank * (dims.d_model + dims.inner());
    out.per_point["lora.q"] += modules * per_target;
    out.per_point["lora.v"] += modules * per_target;
}

void add_prefix_counts(CountBreakdown& out, const ArchitectureDims& dims, long long len,
                       PrefixPlacement placement) {
    const long long sites = prefix_site_count(dims, placement);
    out.per_point["prefix.k"] += sites * len * dims.inner();
    out.per_point["prefix.v"] += sites * len * dims.inner();
}

}  // namespace

double CountBreakdown::percent_3dp() const { return std::round(percent * 1000.0) / 1000.0; }

long long backbone_param_count(const ArchitectureDims& dims) {
    const long long d = dims.d_model, ff = dims.d_ff, inner = dims.inner();
    const long long attention = 3 * d * inner + inner * d;
    const long long ffn = d * ff + ff * d;
    long long total = dims.vocab_size * d;                       // tied embedding table
    total += 2 * dims.rel_buckets * dims.n_heads;                // enc + dec bias tables
    total += dims.n_enc_layers * (attention + ffn + 2 * d);      // norms: self + ffn
    total += dims.n_dec_layers * (2 * attention + ffn + 3 * d);  // norms: self + cross + ffn
    total += 2 * d;                                              // final norms
    return total;
}

CountBreakdown count_trainable(const PeftConfig& config, const ArchitectureDims& dims,
                               long long base_total) {
    if (base_total <= 0) throw ConfigError("count_trainable: base_total must be positive");
    dims.validate();
    validate_config(config, dims);

    CountBreakdown out;
    if (std::holds_alternative<FineTune>(config)) {
        out.per_point["backbone"] = base_total;
    } else if (const auto* c = std::get_if<PromptTuning>(&config)) {
        out.per_point["soft_prompt"] = c->k * dims.d_model;
    } else if (const auto* c = std::get_if<ScaledPromptTuning>(&config)) {
        out.per_point["soft_prompt"] = c->k * dims.d_model;
        out.per_point["scaling"] = c->scale_shape == ScaleShape::vector   ? c->k
                                   : c->scale_shape == ScaleShape::scalar ? 1
                                                                          : c->k * dims.d_model;
    } else if (const auto* c = std::get_if<PrefixTuning>(&config)) {
        add_prefix_counts(out, dims, c->len, c->placement);
    } else if (const auto* c = std::get_if<LoRA>(&config)) {
        add_lora_counts(out, dims, c->rank);
    } else if (const auto* c = std::get_if<BottleneckAdapter>(&config)) {
        add_adapter_counts(out, dims, c->reduction);
    } else if (const auto* c = std::get_if<Compacter>(&config)) {
        const long long n = c->phm_n, f = c->factor_rank;
        const long long d = dims.d_model, b = d / c->reduction;
        const long long layers = dims.n_layers();
        const long long phm_layers = 2 * layers;  // down and up per adapter
        out.per_point["phm.slow"] = (c->share_slow ? 1 : phm_layers) * n * n * n;
        // per adapter: down factors f*(b + d) rows plus up factors f*(d + b)
        out.per_point["phm.fast"] = layers * (f * (d + b) + f * (b + d));
        out.per_point["phm.bias"] = layers * (b + d);
    } else if (std::holds_alternative<IA3>(config)) {
        out.per_point["ia3.attn_k"] = (dims.n_enc_layers + 2 * dims.n_dec_layers) * dims.inner();
        out.per_point["ia3.attn_v"] = out.per_point["ia3.attn_k"];
        out.per_point["ia3.ffn"] = dims.n_layers() * dims.d_ff;
    } else if (const auto* c = std::get_if<UniPELT>(&config)) {
        add_adapter_counts(out, dims, c->adapter_r);
        add_lora_counts(out, dims, c->lora_rank);
        add_prefix_counts(out, dims, c->prefix_len, PrefixPlacement::all_attention);
        out.per_point["gates"] = 3 * dims.n_layers() * dims.d_model;
    }

    for (const auto& [point, count] : out.per_point) out.total += count;
    out.percent = 100.0 * static_cast<double>(out.total) / static_cast<double>(base_total);
    return out;
}

namespace {

std::string config_desc(const PeftConfig& config) {
    std::ostringstream os;
    if (std::holds_alternative<FineTune>(config) || std::holds_alternative<IA3>(config)) {
        os << "-";
    } else if (const auto* c = std::get_if<PromptTuning>(&config)) {
        os << "Prompt length: " << c->k;
    } else if (const auto* c = std::get_if<ScaledPromptTuning>(&config)) {
        os << "Prompt length: " << c->k << ", scaling: "
           << (c->scale_shape == ScaleShape::vector   ? "vector"
               : c->scale_shape == ScaleShape::scalar ? "scalar"
                                                      : "matrix");
    } else if (const auto* c = std::get_if<PrefixTuning>(&config)) {
        os << "Prefix length: " << c->len;
    } else if (const auto* c = std::get_if<LoRA>(&config)) {
        os << "Rank: " << c->rank;
    } else if (const auto* c = std::get_if<BottleneckAdapter>(&config)) {
        os << "r: " << c->reduction;
    } else if (const auto* c = std::get_if<Compacter>(&config)) {
        os << "PHM dim: " << c->phm_n << ", r: " << c->reduction;
    } else if (const auto* c = std::get_if<UniPELT>(&config)) {
        os << "Rank: " << c->lora_rank << ", r: " << c->adapter_r
           << ", Prefix length: " << c->prefix_len;
    }
    return os.str();
}

std::string method_label(const PeftConfig& config) {
    const std::string name = method_name(config);
    if (name == "fine_tune") return "Fine-Tuning";
    if (name == "prompt_tuning") return "Prompt-Tuning";
    if (name == "scaled_prompt_tuning") return "SPT";
    if (name == "prefix_tuning") return "Prefix-Tuning";
    if (name == "lora") return "LoRA";
    if (name == "bottleneck_adapter") return "Adapter";
    if (name == "compacter") return "Compacter";
    if (name == "ia3") return "IA3";
    return "UniPELT";
}

std::string join_percents(const std::vector<double>& ps) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    for (size_t i = 0; i < ps.size(); ++i) os << (i ? ", " : "") << ps[i];
    return os.str();
}

}  // namespace

AuditReport audit_report(const std::vector<AuditEntry>& entries, const ArchitectureDims& dims,
                         long long base_total, const std::string& dims_label) {
    if (entries.empty()) throw ContractError("audit_report: empty method list");
    AuditReport report;
    report.dims_label = dims_label;
    report.base_total = base_total;
    for (const auto& entry : entries) {
        AuditRow row;
        row.method = entry.label;
        row.published_percents = entry.published_percents;
        row.assumption_flagged = entry.assumption_flagged;
        std::vector<std::string> descs;
        for (const auto& config : entry.configs) {
            CountBreakdown counts = count_trainable(config, dims, base_total);
            row.totals.push_back(counts.total);
            row.percents.push_back(counts.percent_3dp());
            descs.push_back(config_desc(config));
        }
        row.config_desc = descs.empty() ? "" : descs[0];
        for (size_t i = 1; i < descs.size(); ++i)
            if (descs[i] != row.config_desc) row.config_desc += " | " + descs[i];
        report.rows.push_back(std::move(row));
    }
    return report;
}

AuditReport audit_report(const std::vector<PeftConfig>& configs, const ArchitectureDims& dims,
                         long long base_total, const std::string& dims_label) {
    std::vector<AuditEntry> entries;
    for (const auto& config : configs)
        entries.push_back(AuditEntry{method_label(config), {config}, {}, false});
    return audit_report(entries, dims, base_total, dims_label);
}

std::vector<AuditEntry> published_roster() {
    std::vector<AuditEntry> entries;
    entries.push_back({"Fine-Tuning", {FineTune{}}, {100.0}, false});
    entries.push_back({"Prompt-Tuning", {PromptTuning{50}}, {0.007}, false});
    entries.push_back({"SPT", {ScaledPromptTuning{50, ScaleShape::vector}}, {0.007}, false});
    entries.push_back({"Adapter", {BottleneckAdapter{16}}, {0.824}, false});
    entries.push_back({"LoRA", {LoRA{8}}, {0.306}, false});
    entries.push_back({"Compacter", {Compacter{8, 16, 1, true}}, {0.053}, true});
    entries.push_back({"Prefix-Tuning",
                       {PrefixTuning{5, PrefixPlacement::all_attention},
                        PrefixTuning{10, PrefixPlacement::all_attention}},
                       {0.096, 0.192},
                       false});
    entries.push_back({"IA3", {IA3{}}, {0.045}, false});
    entries.push_back({"UniPELT", {UniPELT{16, 8, 5}, UniPELT{16, 8, 10}}, {1.194, 1.258}, true});
    return entries;
}

std::string AuditReport::to_text() const {
    std::ostringstream os;
    os << "Trainable-parameter audit";
    if (!dims_label.empty()) os << " (" << dims_label << ")";
    os << ", base total " << base_total << "\n";
    os << std::left << std::setw(16) << "Method" << std::setw(42) << "Config" << std::setw(22)
       << "% trainable" << std::setw(16) << "published %" << "\n";
    for (const auto& row : rows) {
        os << std::left << std::setw(16) << row.method << std::setw(42) << row.config_desc
           << std::setw(22) << join_percents(row.percents) << std::setw(16)
           << (row.published_percents.empty() ? "-" : join_percents(row.published_percents));
        if (row.assumption_flagged) os << "  [computed under documented assumptions]";
        os << "\n";
    }
    return os.str();
}

nlohmann::json AuditReport::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json r{{"method", row.method},
                         {"config", row.config_desc},
                         {"totals", row.totals},
                         {"percents", row.percents}};
        if (!row.published_percents.empty()) r["published_percents"] = row.published_percents;
        r["assumption_flagged"] = row.assumption_flagged;
        rows_json.push_back(std::move(r));
    }
    return nlohmann::json{{"dims", dims_label}, {"base_total", base_total}, {"rows", rows_json}};
}

}  // namespace peftforge
