#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "peftforge/harness.hpp"
#include "peftforge/param_audit.hpp"
#include "peftforge/serialize.hpp"

using namespace peftforge;

namespace {

/// Accepts inline JSON (starts with '{', '"' or '[') or a path to a JSON file.
Json json_arg(const std::string& arg) {
    if (!arg.empty() && (arg[0] == '{' || arg[0] == '"' || arg[0] == '[')) {
        try {
            return Json::parse(arg);
        } catch (const Json::exception& e) {
            throw ParseError(std::string("inline JSON: ") + e.what());
        }
    }
    std::ifstream in(arg);
    if (!in) throw ParseError("cannot open '" + arg + "'");
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw ParseError("'" + arg + "': " + e.what());
    }
    return j;
}

ArchitectureDims dims_arg(const std::string& arg) {
    if (arg == "t5-large" || arg == "toy" || arg == "tiny") return dims_preset(arg);
    return dims_from_json_or_preset(json_arg(arg));
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

/// One reference set per line; multiple references separated by " ||| ".
ReferenceSets read_reference_sets(const std::string& path) {
    ReferenceSets sets;
    for (const auto& line : read_lines(path)) {
        std::vector<std::string> refs;
        size_t pos = 0;
        while (true) {
            const size_t sep = line.find(" ||| ", pos);
            if (sep == std::string::npos) {
                refs.push_back(line.substr(pos));
                break;
            }
            refs.push_back(line.substr(pos, sep - pos));
            pos = sep + 5;
        }
        sets.push_back(std::move(refs));
    }
    return sets;
}

void emit(const Json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"peft-forge: parameter-efficient tuning methods, a data-to-text pipeline, "
                 "and few-shot experiment protocols on a desk-scale encoder-decoder"};
    app.require_subcommand(1);

    // ---- count-params ------------------------------------------------------
    std::string cp_config, cp_dims = "t5-large";
    long long cp_base = 770000000;
    auto* count_cmd =
        app.add_subcommand("count-params", "Closed-form trainable-parameter count for one method");
    count_cmd->add_option("--config", cp_config, "Method config (JSON file or inline)")->required();
    count_cmd->add_option("--dims", cp_dims, "Dims preset (t5-large|toy|tiny) or JSON");
    count_cmd->add_option("--base", cp_base, "Base parameter total for the percentage");
    count_cmd->callback([&]() {
        const PeftConfig config = peft_config_from_json(json_arg(cp_config));
        const CountBreakdown counts = count_trainable(config, dims_arg(cp_dims), cp_base);
        Json per_point = Json::object();
        for (const auto& [point, n] : counts.per_point) per_point[point] = n;
        emit(Json{{"method", method_name(config)},
                  {"per_point", per_point},
                  {"total", counts.total},
                  {"percent", counts.percent},
                  {"percent_3dp", counts.percent_3dp()},
                  {"base_total", cp_base}});
    });

    // ---- audit ---------------------------------------------------------------
    std::string audit_dims = "t5-large";
    long long audit_base = 770000000;
    bool audit_json = false;
    auto* audit_cmd = app.add_subcommand("audit", "Audit table over the full method roster");
    audit_cmd->add_option("--dims", audit_dims, "Dims preset or JSON");
    audit_cmd->add_option("--base", audit_base, "Base parameter total");
    audit_cmd->add_flag("--json", audit_json, "Emit JSON instead of text");
    audit_cmd->callback([&]() {
        const auto report =
            audit_report(published_roster(), dims_arg(audit_dims), audit_base, audit_dims);
        if (audit_json)
            emit(report.to_json());
        else
            std::cout << report.to_text();
    });

    // ---- linearize -------------------------------------------------------------
    std::string lin_data, lin_split;
    auto* lin_cmd =
        app.add_subcommand("linearize", "Print id and linearized input for every instance");
    lin_cmd->add_option("--data", lin_data, "Canonical dataset JSON")->required();
    lin_cmd->add_option("--split", lin_split, "Restrict to a split (train|dev|test)");
    lin_cmd->callback([&]() {
        const Dataset dataset = import_canonical_json(lin_data);
        for (const auto& inst : dataset.instances) {
            if (!lin_split.empty() && to_string(inst.split) != lin_split) continue;
            std::cout << inst.id << "\t" << linearize_instance(inst) << "\n";
        }
    });

    // ---- sample ------------------------------------------------------------------
    std::string sm_data, sm_scheme = "category";
    int sm_shots = 8;
    uint64_t sm_seed = 0;
    bool sm_json = false;
    auto* sample_cmd =
        app.add_subcommand("sample", "Stratified few-shot sample of the train split");
    sample_cmd->add_option("--data", sm_data, "Canonical dataset JSON")->required();
    sample_cmd->add_option("--shots", sm_shots, "Instances per stratum")->required();
    sample_cmd->add_option("--seed", sm_seed, "Sampling seed")->required();
    sample_cmd->add_option("--scheme", sm_scheme, "category|slot_count|source");
    sample_cmd->add_flag("--json", sm_json, "Emit sampled ids as JSON");
    sample_cmd->callback([&]() {
        const Dataset dataset = import_canonical_json(sm_data);
        std::vector<std::string> warnings;
        auto sampled =
            sample_few_shot(dataset, sm_shots, sm_seed, scheme_from_string(sm_scheme), &warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
        if (sm_json) {
            Json ids = Json::array();
            for (const auto& inst : sampled) ids.push_back(inst.id);
            emit(Json{{"count", sampled.size()}, {"ids", ids}});
        } else {
            for (const auto& inst : sampled) std::cout << inst.stratum << "\t" << inst.id << "\n";
        }
    });

    // ---- import-e2e -----------------------------------------------------------------
    std::string ie_csv, ie_out, ie_split = "train";
    auto* import_cmd = app.add_subcommand(
        "import-e2e", "Convert an E2E-format CSV (header \"mr,ref\") to canonical dataset JSON");
    import_cmd->add_option("--csv", ie_csv, "Input CSV")->required();
    import_cmd->add_option("--out", ie_out, "Output canonical JSON")->required();
    import_cmd->add_option("--split", ie_split, "Split label for the rows (train|dev|test)");
    import_cmd->callback([&]() {
        export_canonical_json(import_e2e_csv(ie_csv, split_from_string(ie_split)), ie_out);
    });

    // ---- eval ------------------------------------------------------------------------
    std::string ev_cands, ev_refs, ev_external;
    auto* eval_cmd = app.add_subcommand("eval", "Score candidates against references");
    eval_cmd->add_option("--cands", ev_cands, "Candidates, one per line")->required();
    eval_cmd
        ->add_option("--refs", ev_refs,
                     "References, one line per candidate, multiple separated by ' ||| '")
        ->required();
    eval_cmd->add_option("--external", ev_external, "External scorer JSON to merge");
    eval_cmd->callback([&]() {
        MetricReport report = evaluate_all(read_lines(ev_cands), read_reference_sets(ev_refs));
        if (!ev_external.empty()) merge_external(report, ev_external);
        emit(report.to_json());
    });

    // ---- train / grid ------------------------------------------------------------------
    std::string tr_spec;
    int tr_rep = 0, tr_seed = 0;
    auto* train_cmd = app.add_subcommand("train", "One training run of a spec");
    train_cmd->add_option("--spec", tr_spec, "Experiment spec JSON")->required();
    train_cmd->add_option("--rep", tr_rep, "Sampling repetition index");
    train_cmd->add_option("--seed", tr_seed, "Training seed index");
    train_cmd->callback([&]() {
        const ExperimentSpec spec = spec_from_file(tr_spec);
        emit(train_run(spec, tr_rep, tr_seed).to_json());
    });

    std::string gr_spec;
    auto* grid_cmd = app.add_subcommand("grid", "sampling_reps x seeds runs with aggregation");
    grid_cmd->add_option("--spec", gr_spec, "Experiment spec JSON")->required();
    grid_cmd->callback([&]() {
        const ExperimentSpec spec = spec_from_file(gr_spec);
        GridReport report = run_grid(spec);
        if (!spec.output_dir.empty()) {
            write_results_jsonl(report.runs, spec.output_dir + "/results.jsonl");
            std::ofstream out(spec.output_dir + "/grid.json");
            out << report.to_json().dump(2) << "\n";
        }
        emit(report.to_json());
    });

    // ---- multitask ------------------------------------------------------------------
    std::string mt_a, mt_b;
    auto* multi_cmd = app.add_subcommand("multitask", "Mixed-sample training on two datasets");
    multi_cmd->add_option("--spec-a", mt_a, "First experiment spec")->required();
    multi_cmd->add_option("--spec-b", mt_b, "Second experiment spec")->required();
    multi_cmd->callback([&]() {
        auto [report_a, report_b] = multi_task_run(spec_from_file(mt_a), spec_from_file(mt_b));
        emit(Json{{"task_a", report_a.to_json()}, {"task_b", report_b.to_json()}});
    });

    // ---- intermediate -----------------------------------------------------------------
    std::string in_first, in_second;
    auto* inter_cmd =
        app.add_subcommand("intermediate", "Sequential tuning with a zero-shot readout");
    inter_cmd->add_option("--first", in_first, "Stage-1 experiment spec")->required();
    inter_cmd->add_option("--second", in_second, "Stage-2 experiment spec")->required();
    inter_cmd->callback([&]() {
        emit(intermediate_run(spec_from_file(in_first), spec_from_file(in_second)).to_json());
    });

    // ---- sweep -------------------------------------------------------------------------
    std::string sw_spec, sw_lengths = "10,30,50,60";
    auto* sweep_cmd = app.add_subcommand("sweep", "Prompt-length sweep");
    sweep_cmd->add_option("--spec", sw_spec, "Experiment spec JSON")->required();
    sweep_cmd->add_option("--lengths", sw_lengths, "Comma-separated prompt lengths");
    sweep_cmd->callback([&]() {
        std::vector<Index> lengths;
        std::stringstream ss(sw_lengths);
        std::string item;
        while (std::getline(ss, item, ',')) lengths.push_back(std::stol(item));
        emit(prompt_length_sweep(spec_from_file(sw_spec), lengths).to_json());
    });

    // ---- report -------------------------------------------------------------------------
    std::string rp_in;
    auto* report_cmd = app.add_subcommand("report", "Aggregate persisted run results");
    report_cmd->add_option("--in", rp_in, "results.jsonl from earlier runs")->required();
    report_cmd->callback([&]() { emit(aggregate_runs(read_results_jsonl(rp_in)).to_json()); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
