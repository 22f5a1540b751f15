#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bevdg/domains.hpp"
#include "bevdg/meta_train.hpp"
#include "bevdg/metrics.hpp"

namespace bevdg {

struct DatasetSpec {
    int scene_count = 200;
    int height = 32;
    int width = 32;
    int n_cavs = 3;
    std::uint64_t seed = 7;
    double eval_fraction = 0.2; // tail of the scene list held out for evaluation
    int bank_size = 16;         // style images behind the amplitude bank
};

struct Toggles {
    bool ampaug = true;
    bool meta_consistency = true;
    bool alignment = true;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    MetaConfig meta;     // meta.epochs is the meta-consistency phase length
    int erm_epochs = 30; // warmup phase length
    CorruptionParams corruption;
    Toggles toggles;
    std::string output_dir = "runs/exp";
};

// JSON round-trip. Parsing fills omitted fields with defaults and rejects
// unknown keys; serialization is canonical (sorted keys), so the config hash
// is stable under field reordering in the input file.
ExperimentConfig parse_config(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg); // output_dir excluded

struct ResultsRecord {
    std::string run_id;
    std::uint64_t config_hash = 0;
    DomainTag domain = DomainTag::kClean;
    IoUReport iou;
    double wall_time_sec = 0.0;
};

struct EvalRecord {
    DomainTag domain = DomainTag::kClean;
    int scene_index = 0;
    IoUReport iou;
};

struct EvalResult {
    std::vector<EvalRecord> records;            // one per scene per domain
    std::map<DomainTag, IoUReport> per_domain;  // mean over scenes
};

// Forward every scene and score it. With use_alignment, CAV 0 acts as ego
// and the remaining images are translated to its LAB statistics first.
EvalResult evaluate(const ModelParams& params,
                    const std::map<DomainTag, std::vector<Scene>>& suite,
                    bool use_alignment);

// Deterministic dataset pieces derived from the dataset spec.
std::vector<Scene> generate_dataset(const DatasetSpec& spec, const JitterParams& jitter);
AmplitudeBank build_style_bank(const DatasetSpec& spec, const CorruptionParams& corruption);

// The tail eval_fraction of the scene list is held out for evaluation, so a
// later `eval` run sees the same split as the `train` run that produced the
// checkpoint.
struct DatasetBundle {
    std::vector<Scene> train;
    std::vector<Scene> eval;
};
DatasetBundle generate_split_dataset(const DatasetSpec& spec, const JitterParams& jitter);

struct ExperimentOutput {
    std::vector<ResultsRecord> records;
    ModelParams params;
    TrainLog log;
};

// Generate data and train per toggles: warmup ERM on source scenes, then the
// meta-consistency phase (ampaug off makes the target branch the source;
// meta off falls back to plain ERM for the whole epoch budget). records stays
// empty; no evaluation happens here.
ExperimentOutput run_training(const ExperimentConfig& cfg, const TrainSink& sink = {});

// run_training plus evaluation on the four shifted domains.
ExperimentOutput run_experiment(const ExperimentConfig& cfg, const TrainSink& sink = {});

// run_experiment plus artifacts on disk: config.json, results.jsonl,
// trainlog.jsonl, checkpoint.bin under out_dir.
std::vector<ResultsRecord> run_and_write(const ExperimentConfig& cfg,
                                         const std::string& out_dir);

// All 2^3 toggle combinations, one run directory each (toggle bits in the
// directory name). Returns the records of every run.
std::vector<ResultsRecord> run_ablation_grid(const ExperimentConfig& base,
                                             const std::string& out_dir);

std::string results_record_to_json(const ResultsRecord& rec);
std::string train_record_to_json(const TrainRecord& rec);

} // namespace bevdg
