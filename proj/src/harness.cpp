#include "peftforge/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include "peftforge/optimizer.hpp"
#include "peftforge/serialize.hpp"

namespace peftforge {

namespace {

// Stream tags for deriving independent rng streams from one base seed.
constexpr uint64_t kSampleStream = 0x5a3b1e;
constexpr uint64_t kAttachStream = 0xa77ac4;
constexpr uint64_t kShuffleStream = 0x54ff1e;

uint64_t sample_seed(const ExperimentSpec& spec, int rep) {
    return Rng::derive(spec.base_seed ^ kSampleStream, static_cast<uint64_t>(rep) + 1);
}
uint64_t attach_seed(const ExperimentSpec& spec, int rep, int seed) {
    return Rng::derive(spec.base_seed ^ kAttachStream, static_cast<uint64_t>(rep) + 1,
                       static_cast<uint64_t>(seed) + 1);
}
uint64_t shuffle_seed(const ExperimentSpec& spec, int rep, int seed) {
    return Rng::derive(spec.base_seed ^ kShuffleStream, static_cast<uint64_t>(rep) + 1,
                       static_cast<uint64_t>(seed) + 1);
}

int worker_count() {
    const char* env = std::getenv("PEFTFORGE_WORKERS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n < 1 ? 1 : n;
}

using TrainPair = std::pair<std::vector<int32_t>, std::vector<int32_t>>;

/// (encoder ids, target ids) for teacher forcing; the first reference is the
/// training target, all references stay available for evaluation.
std::vector<TrainPair> encode_pairs(const std::vector<Instance>& instances, const Vocab& vocab) {
    std::vector<TrainPair> pairs;
    for (const auto& inst : instances) {
        if (inst.references.empty()) continue;
        pairs.emplace_back(vocab.encode(linearize_instance(inst)),
                           vocab.encode(inst.references[0]));
    }
    return pairs;
}

std::vector<Instance> capped(std::vector<Instance> instances, int cap) {
    if (cap > 0 && static_cast<int>(instances.size()) > cap)
        instances.resize(static_cast<size_t>(cap));
    return instances;
}

std::pair<Candidates, ReferenceSets> decode_corpus(Seq2SeqModel<float>& model,
                                                   const PeftHooks<float>& hooks,
                                                   const std::vector<Instance>& instances,
                                                   const Vocab& vocab, int max_decode_len) {
    Candidates cands;
    ReferenceSets refs;
    for (const auto& inst : instances) {
        const auto ids = greedy_decode(model, vocab.encode(linearize_instance(inst)), hooks,
                                       max_decode_len);
        cands.push_back(vocab.decode(ids));
        refs.push_back(inst.references);
    }
    return {std::move(cands), std::move(refs)};
}

double dev_bleu_score(Seq2SeqModel<float>& model, const PeftHooks<float>& hooks,
                      const std::vector<Instance>& dev, const Vocab& vocab, int max_decode_len) {
    if (dev.empty()) return 0.0;
    auto [cands, refs] = decode_corpus(model, hooks, dev, vocab, max_decode_len);
    // add-one smoothing: tiny dev sets would otherwise zero out on one bad order
    return corpus_bleu(cands, refs, 4, /*smooth=*/true);
}

/// The array set a best-checkpoint snapshot must cover.
std::map<std::string, Tensor<float>> snapshot_targets(Seq2SeqModel<float>& model,
                                                      const AttachedModel<float>& attached) {
    std::map<std::string, Tensor<float>> out = attached.method_params;
    if (std::holds_alternative<FineTune>(attached.config))
        for (auto& [name, t] : model.parameters()) out.emplace(name, t);
    return out;
}

struct RunInternals {
    RunResult result;
    std::map<std::string, MetricReport> per_test;
};

struct RunRequest {
    const ExperimentSpec* spec = nullptr;
    int rep = 0;
    int seed = 0;
    const TaskContext* context = nullptr;
    // training pool and dev/test material
    std::vector<TrainPair> pool;
    std::vector<Instance> dev;
    std::vector<std::pair<std::string, std::vector<Instance>>> tests;
    std::string resume_path;  // continue this checkpoint's method parameters
};

std::string default_checkpoint_path(const ExperimentSpec& spec, int rep, int seed) {
    std::filesystem::path dir = spec.output_dir.empty()
                                    ? std::filesystem::temp_directory_path() / "peftforge-ckpt"
                                    : std::filesystem::path(spec.output_dir);
    std::filesystem::create_directories(dir);
    return (dir / ("run_rep" + std::to_string(rep) + "_seed" + std::to_string(seed) + "_" +
                   method_name(spec.peft) + ".ckpt"))
        .string();
}

RunInternals execute_run(const RunRequest& req) {
    const ExperimentSpec& spec = *req.spec;
    const TaskContext& ctx = *req.context;
    const auto t_start = std::chrono::steady_clock::now();

    RunInternals out;
    RunResult& result = out.result;
    result.sampling_rep = req.rep;
    result.seed = req.seed;

    // Model and attachment. A resume path continues its method parameters;
    // a pretrained checkpoint only provides the frozen backbone.
    std::shared_ptr<Seq2SeqModel<float>> model;
    AttachedModel<float> attached;
    CheckpointManifest manifest;
    manifest.dims = ctx.dims;
    manifest.vocab_hash = ctx.vocab.fingerprint();
    manifest.backbone_seed = spec.backbone_seed;
    if (!req.resume_path.empty()) {
        LoadedCheckpoint loaded = load_checkpoint(req.resume_path, ctx.vocab.fingerprint());
        model = loaded.model;
        attached = loaded.attached;
        manifest.backbone_seed = loaded.manifest.backbone_seed;
        manifest.pretrained_path = loaded.manifest.pretrained_path;
        if (std::holds_alternative<FineTune>(loaded.manifest.config))
            manifest.pretrained_path = req.resume_path;
    } else {
        if (!spec.pretrained_checkpoint.empty()) {
            LoadedCheckpoint base = load_checkpoint(spec.pretrained_checkpoint,
                                                    ctx.vocab.fingerprint());
            if (!(base.manifest.dims == ctx.dims))
                throw ConfigError("pretrained checkpoint dims do not match the experiment dims");
            model = base.model;
            manifest.pretrained_path = spec.pretrained_checkpoint;
            manifest.backbone_seed = base.manifest.backbone_seed;
        } else {
            model = std::make_shared<Seq2SeqModel<float>>(ctx.dims, spec.backbone_seed);
        }
        Rng arng(attach_seed(spec, req.rep, req.seed));
        attached = attach(*model, spec.peft, arng);
    }
    manifest.config = attached.config;

    auto params = attached.trainable_params();
    AdamOptimizer<float> opt(spec.learning_rate);
    Rng order_rng(shuffle_seed(spec, req.rep, req.seed));

    std::vector<size_t> order(req.pool.size());
    std::iota(order.begin(), order.end(), 0);
    size_t cursor = order.size();  // trigger shuffle on first use

    auto next_batch = [&]() {
        std::vector<std::vector<int32_t>> enc, tgt;
        for (int i = 0; i < spec.batch_size; ++i) {
            if (cursor >= order.size()) {
                order_rng.shuffle(order);
                cursor = 0;
            }
            const auto& pair = req.pool[order[cursor++]];
            enc.push_back(pair.first);
            tgt.push_back(pair.second);
        }
        return TokenBatch::from_sequences(enc, tgt);
    };

    // Best-checkpoint retention in memory.
    auto targets = snapshot_targets(*model, attached);
    std::map<std::string, ColArray<float>> best_snapshot;
    result.best_dev_bleu = -1.0;
    auto consider = [&](long step) {
        const double score = dev_bleu_score(*model, attached.hooks, req.dev, ctx.vocab,
                                            spec.max_decode_len);
        if (step == 0) result.initial_dev_bleu = score;
        if (score > result.best_dev_bleu) {
            result.best_dev_bleu = score;
            result.best_step = step;
            best_snapshot.clear();
            for (auto& [name, t] : targets) best_snapshot[name] = t.value();
        }
    };

    // a divergent run (non-finite loss or activations, in training or in a
    // dev decode) is recorded as failed, never thrown
    try {
        for (long step = 0; step < spec.max_steps && !result.failed; ++step) {
            result.fail_step = step;
            if (step % spec.eval_every == 0) consider(step);
            TokenBatch batch = next_batch();
            Graph<float> g;
            Tensor<float> loss = teacher_forced_loss(g, *model, batch, attached.hooks);
            const double value = static_cast<double>(loss.item());
            if (!std::isfinite(value)) throw NumericError("non-finite loss");
            result.loss_trajectory.emplace_back(step, value);
            g.backward(loss);
            opt.step(params);
            zero_grads(params);
        }
        if (!result.failed) {
            result.fail_step = spec.max_steps;
            consider(spec.max_steps);
            result.fail_step = -1;
        }
    } catch (const NumericError&) {
        result.failed = true;
    }

    if (!best_snapshot.empty())
        for (auto& [name, t] : targets) t.value() = best_snapshot.at(name);

    if (!result.failed) {
        for (const auto& [label, instances] : req.tests) {
            if (instances.empty()) continue;
            auto [cands, refs] = decode_corpus(*model, attached.hooks, instances, ctx.vocab,
                                               spec.max_decode_len);
            out.per_test.emplace(label, evaluate_all(cands, refs));
        }
        if (!out.per_test.empty()) result.test_metrics = out.per_test.begin()->second;

        manifest.step = result.best_step;
        manifest.dev_bleu = result.best_dev_bleu;
        result.checkpoint_path = default_checkpoint_path(spec, req.rep, req.seed);
        save_checkpoint(*model, attached, manifest, result.checkpoint_path);
    }

    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

RunRequest build_request(const ExperimentSpec& spec, int rep, int seed, const TaskContext& ctx,
                         std::string resume_path = {}) {
    RunRequest req;
    req.spec = &spec;
    req.rep = rep;
    req.seed = seed;
    req.context = &ctx;
    req.resume_path = std::move(resume_path);

    const Dataset& data = ctx.datasets.at(0);
    std::vector<Instance> train;
    if (spec.shots < 0) {
        train = data.of_split(Split::train);
    } else {
        train = sample_few_shot(data, spec.shots, sample_seed(spec, rep), spec.scheme);
    }
    req.pool = encode_pairs(train, ctx.vocab);
    if (req.pool.empty()) throw ContractError("train_run: no usable training instances");
    req.dev = capped(data.of_split(Split::dev), spec.dev_cap);
    req.tests.emplace_back("test", data.of_split(Split::test));
    return req;
}

std::vector<RunInternals> execute_many(std::vector<RunRequest> requests) {
    std::vector<RunInternals> results(requests.size());
    const int workers = std::min<int>(worker_count(), static_cast<int>(requests.size()));
    if (workers <= 1) {
        for (size_t i = 0; i < requests.size(); ++i) results[i] = execute_run(requests[i]);
        return results;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w)
        threads.emplace_back([&]() {
            for (size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1))
                results[i] = execute_run(requests[i]);
        });
    for (auto& t : threads) t.join();
    return results;
}

}  // namespace

void ExperimentSpec::validate() const {
    if (dataset_paths.empty()) throw ConfigError("experiment: no dataset paths");
    if (sampling_reps < 1 || seeds < 1)
        throw ConfigError("experiment: sampling_reps and seeds must be >= 1");
    if (learning_rate <= 0) throw ConfigError("experiment: learning rate must be positive");
    if (batch_size < 1 || max_steps < 0 || eval_every < 1)
        throw ConfigError("experiment: invalid optimization settings");
}

ExperimentSpec spec_from_json(const nlohmann::json& j) {
    ExperimentSpec spec;
    if (j.contains("dataset")) {
        if (j["dataset"].is_array())
            spec.dataset_paths = j["dataset"].get<std::vector<std::string>>();
        else
            spec.dataset_paths = {j["dataset"].get<std::string>()};
    }
    spec.scheme = scheme_from_string(j.value("scheme", std::string("category")));
    if (j.contains("shots") && j["shots"].is_string()) {
        if (j["shots"].get<std::string>() != "all")
            throw ConfigError("experiment: shots must be a number or \"all\"");
        spec.shots = -1;
    } else {
        spec.shots = j.value("shots", 8);
    }
    spec.sampling_reps = j.value("sampling_reps", 3);
    spec.seeds = j.value("seeds", 3);
    if (j.contains("peft")) spec.peft = peft_config_from_json(j["peft"]);
    spec.learning_rate = j.value("learning_rate", 1e-4);
    spec.max_steps = j.value("max_steps", 2000);
    spec.batch_size = j.value("batch_size", 8);
    spec.eval_every = j.value("eval_every", 50);
    spec.dev_cap = j.value("dev_cap", 200);
    spec.output_dir = j.value("output_dir", std::string());
    spec.dims = j.contains("dims") ? dims_from_json_or_preset(j["dims"])
                                   : ArchitectureDims::toy();
    spec.backbone_seed = j.value("backbone_seed", uint64_t(1));
    spec.pretrained_checkpoint = j.value("pretrained_checkpoint", std::string());
    spec.max_decode_len = j.value("max_decode_len", 48);
    spec.min_count = j.value("min_count", 1);
    spec.base_seed = j.value("base_seed", uint64_t(0));
    spec.validate();
    return spec;
}

nlohmann::json spec_to_json(const ExperimentSpec& spec) {
    return nlohmann::json{{"dataset", spec.dataset_paths},
                          {"scheme", to_string(spec.scheme)},
                          {"shots", spec.shots < 0 ? nlohmann::json("all") : nlohmann::json(spec.shots)},
                          {"sampling_reps", spec.sampling_reps},
                          {"seeds", spec.seeds},
                          {"peft", peft_config_to_json(spec.peft)},
                          {"learning_rate", spec.learning_rate},
                          {"max_steps", spec.max_steps},
                          {"batch_size", spec.batch_size},
                          {"eval_every", spec.eval_every},
                          {"dev_cap", spec.dev_cap},
                          {"output_dir", spec.output_dir},
                          {"dims", dims_to_json(spec.dims)},
                          {"backbone_seed", spec.backbone_seed},
                          {"pretrained_checkpoint", spec.pretrained_checkpoint},
                          {"max_decode_len", spec.max_decode_len},
                          {"min_count", spec.min_count},
                          {"base_seed", spec.base_seed}};
}

ExperimentSpec spec_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open experiment spec '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("experiment spec '" + path + "': " + e.what());
    }
    return spec_from_json(j);
}

TaskContext build_task_context(const ExperimentSpec& spec,
                               const std::vector<std::string>& extra_corpus_paths) {
    TaskContext ctx;
    std::vector<std::string> corpus;
    auto ingest = [&](const Dataset& data) {
        for (const auto& inst : data.instances) {
            if (inst.split != Split::train) continue;
            corpus.push_back(linearize_instance(inst));
            for (const auto& ref : inst.references) corpus.push_back(ref);
        }
    };
    for (const auto& path : spec.dataset_paths) {
        ctx.datasets.push_back(import_canonical_json(path));
        ingest(ctx.datasets.back());
    }
    for (const auto& path : extra_corpus_paths) ingest(import_canonical_json(path));
    ctx.vocab = Vocab::build(corpus, spec.min_count);
    ctx.dims = spec.dims;
    ctx.dims.vocab_size = ctx.vocab.size();
    return ctx;
}

RunResult train_run(const ExperimentSpec& spec, int sampling_rep, int seed,
                    const TaskContext* context) {
    spec.validate();
    TaskContext local;
    if (!context) {
        local = build_task_context(spec);
        context = &local;
    }
    return execute_run(build_request(spec, sampling_rep, seed, *context)).result;
}

GridReport aggregate_runs(std::vector<RunResult> runs) {
    GridReport report;
    std::map<std::string, std::vector<double>> samples;
    for (const auto& run : runs) {
        if (run.failed) {
            ++report.n_failed;
            continue;
        }
        samples["dev_bleu"].push_back(run.best_dev_bleu);
        for (const auto& [name, entry] : run.test_metrics.scores)
            samples[name].push_back(entry.score);
    }
    for (const auto& [name, values] : samples) {
        const double n = static_cast<double>(values.size());
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
        double stderr_ = 0.0;
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        }
        report.aggregate[name] = {mean, stderr_};
    }
    report.runs = std::move(runs);
    return report;
}

GridReport run_grid(const ExperimentSpec& spec) {
    spec.validate();
    TaskContext ctx = build_task_context(spec);
    std::vector<RunRequest> requests;
    for (int rep = 0; rep < spec.sampling_reps; ++rep)
        for (int seed = 0; seed < spec.seeds; ++seed)
            requests.push_back(build_request(spec, rep, seed, ctx));
    auto internals = execute_many(std::move(requests));
    std::vector<RunResult> runs;
    for (auto& r : internals) runs.push_back(std::move(r.result));
    GridReport report = aggregate_runs(std::move(runs));
    if (report.n_failed == static_cast<int>(report.runs.size()))
        throw Error("run_grid: every run diverged");
    return report;
}

std::pair<GridReport, GridReport> multi_task_run(const ExperimentSpec& spec_a,
                                                 const ExperimentSpec& spec_b) {
    spec_a.validate();
    spec_b.validate();
    if (spec_a.shots != spec_b.shots)
        throw ConfigError("multi_task_run: both tasks must use the same shot count");

    // one vocabulary over both corpora
    ExperimentSpec joint = spec_a;
    TaskContext ctx = build_task_context(joint, spec_b.dataset_paths);
    Dataset data_b = import_canonical_json(spec_b.dataset_paths.at(0));
    const Dataset& data_a = ctx.datasets.at(0);

    std::vector<RunRequest> requests;
    for (int rep = 0; rep < spec_a.sampling_reps; ++rep)
        for (int seed = 0; seed < spec_a.seeds; ++seed) {
            RunRequest req;
            req.spec = &spec_a;
            req.rep = rep;
            req.seed = seed;
            req.context = &ctx;
            std::vector<Instance> train_a, train_b;
            if (spec_a.shots < 0) {
                train_a = data_a.of_split(Split::train);
                train_b = data_b.of_split(Split::train);
            } else {
                train_a = sample_few_shot(data_a, spec_a.shots, sample_seed(spec_a, rep),
                                          spec_a.scheme);
                train_b = sample_few_shot(data_b, spec_b.shots, sample_seed(spec_b, rep),
                                          spec_b.scheme);
            }
            req.pool = encode_pairs(train_a, ctx.vocab);
            auto pool_b = encode_pairs(train_b, ctx.vocab);
            req.pool.insert(req.pool.end(), pool_b.begin(), pool_b.end());
            // checkpoint selection on the union of both dev splits
            req.dev = capped(data_a.of_split(Split::dev), spec_a.dev_cap);
            auto dev_b = capped(data_b.of_split(Split::dev), spec_b.dev_cap);
            req.dev.insert(req.dev.end(), dev_b.begin(), dev_b.end());
            req.tests.emplace_back("a", data_a.of_split(Split::test));
            req.tests.emplace_back("b", data_b.of_split(Split::test));
            requests.push_back(std::move(req));
        }

    auto internals = execute_many(std::move(requests));
    std::vector<RunResult> runs_a, runs_b;
    for (auto& r : internals) {
        RunResult for_a = r.result;
        if (!for_a.failed && r.per_test.count("a")) for_a.test_metrics = r.per_test.at("a");
        RunResult for_b = r.result;
        if (!for_b.failed && r.per_test.count("b")) for_b.test_metrics = r.per_test.at("b");
        runs_a.push_back(std::move(for_a));
        runs_b.push_back(std::move(for_b));
    }
    return {aggregate_runs(std::move(runs_a)), aggregate_runs(std::move(runs_b))};
}

IntermediateReport intermediate_run(const ExperimentSpec& spec_first,
                                    const ExperimentSpec& spec_second) {
    spec_first.validate();
    spec_second.validate();
    if (!(spec_first.dims == spec_second.dims))
        throw ConfigError("intermediate_run: both stages must share architecture dims");
    // one vocabulary over both corpora, built up front and shared
    TaskContext ctx_first = build_task_context(spec_first, spec_second.dataset_paths);
    TaskContext ctx_second;
    for (const auto& path : spec_second.dataset_paths)
        ctx_second.datasets.push_back(import_canonical_json(path));
    ctx_second.vocab = ctx_first.vocab;
    ctx_second.dims = ctx_first.dims;

    IntermediateReport report;
    std::vector<RunResult> stage2_runs;
    for (int rep = 0; rep < spec_second.sampling_reps; ++rep)
        for (int seed = 0; seed < spec_second.seeds; ++seed) {
            RunInternals stage1 =
                execute_run(build_request(spec_first, rep, seed, ctx_first));
            if (stage1.result.failed) {
                stage2_runs.push_back(stage1.result);
                continue;
            }
            // zero-shot readout of the stage-1 checkpoint on the second task
            LoadedCheckpoint loaded =
                load_checkpoint(stage1.result.checkpoint_path, ctx_second.vocab.fingerprint());
            const Dataset& data_b = ctx_second.datasets.at(0);
            ZeroShotReadout zs;
            zs.sampling_rep = rep;
            zs.seed = seed;
            zs.dev_bleu = dev_bleu_score(*loaded.model, loaded.attached.hooks,
                                         capped(data_b.of_split(Split::dev), spec_second.dev_cap),
                                         ctx_second.vocab, spec_second.max_decode_len);
            auto test_b = data_b.of_split(Split::test);
            if (!test_b.empty()) {
                auto [cands, refs] = decode_corpus(*loaded.model, loaded.attached.hooks, test_b,
                                                   ctx_second.vocab, spec_second.max_decode_len);
                zs.test_metrics = evaluate_all(cands, refs);
            }
            report.zero_shot.push_back(std::move(zs));

            RunInternals stage2 = execute_run(build_request(
                spec_second, rep, seed, ctx_second, stage1.result.checkpoint_path));
            stage2_runs.push_back(std::move(stage2.result));
        }
    report.stage_two = aggregate_runs(std::move(stage2_runs));
    return report;
}

SweepReport prompt_length_sweep(const ExperimentSpec& spec, const std::vector<Index>& lengths) {
    if (!std::holds_alternative<PromptTuning>(spec.peft) &&
        !std::holds_alternative<ScaledPromptTuning>(spec.peft))
        throw ConfigError("prompt_length_sweep: spec must use prompt_tuning or "
                          "scaled_prompt_tuning");
    SweepReport report;
    report.lengths = lengths;
    for (Index len : lengths) {
        ExperimentSpec varied = spec;
        if (auto* pt = std::get_if<PromptTuning>(&varied.peft)) pt->k = len;
        if (auto* spt = std::get_if<ScaledPromptTuning>(&varied.peft)) spt->k = len;
        GridReport grid = run_grid(varied);
        double bleu = grid.aggregate.count("BLEU") ? grid.aggregate.at("BLEU").first : 0.0;
        double ter_score = grid.aggregate.count("TER") ? grid.aggregate.at("TER").first : 0.0;
        report.summary[len] = {bleu, ter_score};
        report.grids.emplace(len, std::move(grid));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

nlohmann::json RunResult::to_json() const {
    nlohmann::json traj = nlohmann::json::array();
    for (const auto& [step, loss] : loss_trajectory) traj.push_back({{"step", step}, {"loss", loss}});
    return nlohmann::json{{"sampling_rep", sampling_rep},
                          {"seed", seed},
                          {"failed", failed},
                          {"fail_step", fail_step},
                          {"initial_dev_bleu", initial_dev_bleu},
                          {"best_dev_bleu", best_dev_bleu},
                          {"best_step", best_step},
                          {"test_metrics", test_metrics.to_json()},
                          {"loss_trajectory", traj},
                          {"wall_time_s", wall_time_s},
                          {"checkpoint", checkpoint_path}};
}

RunResult RunResult::from_json(const nlohmann::json& j) {
    RunResult r;
    r.sampling_rep = j.at("sampling_rep").get<int>();
    r.seed = j.at("seed").get<int>();
    r.failed = j.at("failed").get<bool>();
    r.fail_step = j.value("fail_step", -1L);
    r.initial_dev_bleu = j.value("initial_dev_bleu", 0.0);
    r.best_dev_bleu = j.value("best_dev_bleu", 0.0);
    r.best_step = j.value("best_step", -1L);
    if (j.contains("test_metrics")) {
        const auto& jm = j["test_metrics"];
        r.test_metrics.candidate_count = jm.value("candidate_count", size_t(0));
        const nlohmann::json scores = jm.value("scores", nlohmann::json::object());
        for (const auto& [name, je] : scores.items())
            r.test_metrics.scores[name] = {je.at("score").get<double>(),
                                           je.value("higher_better", true),
                                           je.value("external", false)};
    }
    const nlohmann::json traj = j.value("loss_trajectory", nlohmann::json::array());
    for (const auto& jt : traj)
        r.loss_trajectory.emplace_back(jt.at("step").get<long>(), jt.at("loss").get<double>());
    r.wall_time_s = j.value("wall_time_s", 0.0);
    r.checkpoint_path = j.value("checkpoint", std::string());
    return r;
}

nlohmann::json GridReport::to_json() const {
    nlohmann::json agg = nlohmann::json::object();
    for (const auto& [name, stat] : aggregate)
        agg[name] = {{"mean", stat.first}, {"stderr", stat.second}};
    nlohmann::json runs_json = nlohmann::json::array();
    for (const auto& run : runs) runs_json.push_back(run.to_json());
    return nlohmann::json{{"n_runs", runs.size()},
                          {"n_failed", n_failed},
                          {"aggregate", agg},
                          {"runs", runs_json}};
}

nlohmann::json IntermediateReport::to_json() const {
    nlohmann::json zs = nlohmann::json::array();
    for (const auto& z : zero_shot)
        zs.push_back({{"sampling_rep", z.sampling_rep},
                      {"seed", z.seed},
                      {"dev_bleu", z.dev_bleu},
                      {"test_metrics", z.test_metrics.to_json()}});
    return nlohmann::json{{"stage_two", stage_two.to_json()}, {"zero_shot", zs}};
}

nlohmann::json SweepReport::to_json() const {
    nlohmann::json summary_json = nlohmann::json::array();
    for (const auto& [len, scores] : summary)
        summary_json.push_back(
            {{"length", len}, {"BLEU", scores.first}, {"TER", scores.second}});
    nlohmann::json grids_json = nlohmann::json::object();
    for (const auto& [len, grid] : grids) grids_json[std::to_string(len)] = grid.to_json();
    return nlohmann::json{{"summary", summary_json}, {"grids", grids_json}};
}

void write_results_jsonl(const std::vector<RunResult>& runs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write results file '" + path + "'");
    for (const auto& run : runs) out << run.to_json().dump() << "\n";
}

std::vector<RunResult> read_results_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open results file '" + path + "'");
    std::vector<RunResult> runs;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            runs.push_back(RunResult::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("results file '" + path + "' line " + std::to_string(lineno) + ": " +
                             e.what());
        }
    }
    return runs;
}

}  // namespace peftforge
