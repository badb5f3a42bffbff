#pragma once

#include "dsal/core.hpp"
#include "dsal/crf.hpp"
#include "dsal/segmenter.hpp"
#include "dsal/selection.hpp"
#include "dsal/weaklabeler.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dsal {

enum class QueryMode { dsal, random };

std::string_view to_string(QueryMode m) noexcept;
QueryMode parse_query_mode(std::string_view s);

/// Ablation switches. With ensemble_crf off, pseudo labels are the
/// binarized final-head prediction.
struct Strategy {
    bool pseudo_labels = true;
    bool confidence_filter = true;
    bool ensemble_crf = true;
};

struct EnsembleConfig {
    CrfParams center = CrfParams::desk_center();
    PerturbSpec perturb;
    int members = 5;
    int finetune_rounds = 3;
    std::size_t validation_limit = 32;
    MeanFieldOptions meanfield;
};

inline TrainConfig make_train(int epochs, double learning_rate) {
    TrainConfig t;
    t.epochs = epochs;
    t.learning_rate = learning_rate;
    return t;
}

struct ALConfig {
    int iterations = 8;
    std::size_t k_strong = 20;
    std::size_t k_weak = 10;
    int bins = 10;
    int pseudo_start_iter = 3;
    TrainConfig base_train = make_train(20, 1e-2);
    TrainConfig finetune = make_train(3, 5e-4);
    EnsembleConfig ensemble;
    Strategy strategy;
    QueryMode mode = QueryMode::dsal;
    std::optional<double> target_dsc;  // stop once the test Dice reaches this
    std::uint64_t seed = 0;

    void validate() const;
};

struct HeldOutScore {
    std::string sample_id;
    double mean_dsc = 0.0;
    double r_dsc = 0.0;
};

struct IterationRecord {
    int iteration = 0;
    std::vector<std::string> strong_ids;
    std::vector<std::string> weak_ids;
    double t_conf = 0.0;
    double test_dsc = 0.0;
    std::size_t pool_remaining = 0;
    std::size_t labeled_total = 0;
    std::array<double, 3> phase_ms{};         // selection, annotation, update
    std::vector<SampleScores> scores;          // unlabeled pool at selection time
    std::vector<HeldOutScore> held_out;        // test set under the updated model
};

/// F_strong: the stored ground truth, unmodified.
BinaryMask oracle_label(const Sample& sample);

struct DataSplit {
    std::vector<Sample> initial;
    std::vector<Sample> pool;
    std::vector<Sample> test;
};

struct SplitSizes {
    std::size_t initial = 40;
    std::size_t pool = 200;
    std::size_t test = 100;
};

/// Seeded shuffle, then the first `initial`, next `pool` and next `test`
/// samples. Every sample must carry ground truth.
DataSplit split_dataset(const std::vector<Sample>& samples, const SplitSizes& sizes, std::uint64_t seed);

/// Mutable loop state between iterations.
struct LoopState {
    PoolState pool;
    std::unique_ptr<MultiHeadSegmenter> model;
    std::optional<CrfEnsemble> ensemble;  // built and frozen at the first pseudo-labeling iteration
    std::optional<FinetuneResult> ensemble_tuning;
};

struct IterationOutcome {
    bool exhausted = false;  // the unlabeled pool was empty; nothing happened
    IterationRecord record;
};

/// One pass of query selection, annotation and model update. Advances
/// `state.pool` to iteration t + 1 and fine-tunes `state.model` in place.
/// The test Dice is left for the caller.
IterationOutcome run_iteration(LoopState& state, const ALConfig& cfg);

struct RunResult {
    std::vector<IterationRecord> records;  // records[0] is the base model
    PoolState final_pool;
    std::unique_ptr<MultiHeadSegmenter> model;
    std::optional<CrfEnsemble> ensemble;
    std::optional<FinetuneResult> ensemble_tuning;
};

/// Mean final-head Dice over the test set, plus per-sample (Mean-DSC, R-DSC).
double evaluate_test(const MultiHeadSegmenter& model, const std::vector<Sample>& test,
                     std::vector<HeldOutScore>* held_out = nullptr);

/// Trains M_0 on the initial set, then runs the loop for cfg.iterations or
/// until the pool is exhausted (or the target Dice is reached).
RunResult run(const DataSplit& split, const ALConfig& cfg, std::unique_ptr<MultiHeadSegmenter> model = nullptr);

/// Reference with every initial and pool sample oracle-labeled, trained on
/// the same schedule (base training, then one fine-tune per iteration).
RunResult run_full_supervision(const DataSplit& split, const ALConfig& cfg,
                               std::unique_ptr<MultiHeadSegmenter> model = nullptr);

/// Oracle labels consumed (initial + strong) as a fraction of |L_0| + |U_0|,
/// after each record.
std::vector<double> oracle_fraction(const std::vector<IterationRecord>& records, std::size_t initial,
                                    std::size_t pool);

void write_run_log_csv_header(std::ostream& os);
void write_run_log_csv_row(std::ostream& os, const IterationRecord& r, bool timings);

}  // namespace dsal
