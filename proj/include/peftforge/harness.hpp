#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "peftforge/checkpoint.hpp"
#include "peftforge/data.hpp"
#include "peftforge/metrics.hpp"
#include "peftforge/model.hpp"
#include "peftforge/peft.hpp"

namespace peftforge {

/// One experiment: dataset(s), few-shot protocol, method, and optimization
/// settings. `shots` of -1 means the whole train split.
struct ExperimentSpec {
    std::vector<std::string> dataset_paths;
    StratumScheme scheme = StratumScheme::category;
    int shots = 8;
    int sampling_reps = 3;
    int seeds = 3;
    PeftConfig peft = FineTune{};
    double learning_rate = 1e-4;
    int max_steps = 2000;
    int batch_size = 8;
    int eval_every = 50;
    int dev_cap = 200;
    std::string output_dir;

    ArchitectureDims dims = ArchitectureDims::toy();
    uint64_t backbone_seed = 1;
    std::string pretrained_checkpoint;
    int max_decode_len = 48;
    int min_count = 1;
    uint64_t base_seed = 0;

    void validate() const;
};

ExperimentSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_file(const std::string& path);

struct RunResult {
    int sampling_rep = 0;
    int seed = 0;
    bool failed = false;
    long fail_step = -1;
    double initial_dev_bleu = 0.0;
    double best_dev_bleu = 0.0;
    long best_step = -1;
    MetricReport test_metrics;
    std::vector<std::pair<long, double>> loss_trajectory;  // (step, loss)
    double wall_time_s = 0.0;
    std::string checkpoint_path;

    nlohmann::json to_json() const;
    static RunResult from_json(const nlohmann::json& j);
};

struct GridReport {
    std::vector<RunResult> runs;
    // metric name -> (mean, standard error) over successful runs
    std::map<std::string, std::pair<double, double>> aggregate;
    int n_failed = 0;

    nlohmann::json to_json() const;
};

/// Shared, immutable evaluation material for one experiment; built once and
/// reused by every run of a grid.
struct TaskContext {
    std::vector<Dataset> datasets;
    Vocab vocab;
    ArchitectureDims dims;  // vocab_size already patched in
};

TaskContext build_task_context(const ExperimentSpec& spec,
                               const std::vector<std::string>& extra_corpus_paths = {});

/// One (sampling_rep, seed) training run: Adam over exactly the attached
/// trainable set, periodic dev decoding with smoothed BLEU, best-checkpoint
/// retention, final test evaluation at the best step. Deterministic given
/// (spec, rep, seed). A divergent run is returned failed, not thrown.
RunResult train_run(const ExperimentSpec& spec, int sampling_rep, int seed,
                    const TaskContext* context = nullptr);

/// sampling_reps x seeds independent runs, aggregated to mean and standard
/// error per metric. PEFTFORGE_WORKERS bounds parallel run execution.
GridReport run_grid(const ExperimentSpec& spec);

/// Aggregation alone (for persisted JSONL results).
GridReport aggregate_runs(std::vector<RunResult> runs);

void write_results_jsonl(const std::vector<RunResult>& runs, const std::string& path);
std::vector<RunResult> read_results_jsonl(const std::string& path);

/// Few-shot multi-task mixing: one model per run trained on the shuffled
/// union of both samples, evaluated separately on each dataset's test split.
std::pair<GridReport, GridReport> multi_task_run(const ExperimentSpec& spec_a,
                                                 const ExperimentSpec& spec_b);

struct ZeroShotReadout {
    int sampling_rep = 0;
    int seed = 0;
    double dev_bleu = 0.0;
    MetricReport test_metrics;
};

struct IntermediateReport {
    GridReport stage_two;                     // final results on the second dataset
    std::vector<ZeroShotReadout> zero_shot;   // stage-1 checkpoints evaluated on it
    nlohmann::json to_json() const;
};

/// Sequential transfer: stage 1 trains on the first spec's data, stage 2
/// resumes from the stage-1 best checkpoint on the second. Also reports the
/// stage-1 checkpoint's zero-shot scores on the second dataset; by
/// construction stage 2's initial dev score equals that zero-shot dev score.
IntermediateReport intermediate_run(const ExperimentSpec& spec_first,
                                    const ExperimentSpec& spec_second);

struct SweepReport {
    std::vector<Index> lengths;
    std::map<Index, GridReport> grids;
    /// length -> (BLEU mean, TER mean)
    std::map<Index, std::pair<double, double>> summary;
    nlohmann::json to_json() const;
};

/// Prompt-length sweep for the prompt-based methods.
SweepReport prompt_length_sweep(const ExperimentSpec& spec,
                                const std::vector<Index>& lengths = {10, 30, 50, 60});

}  // namespace peftforge
