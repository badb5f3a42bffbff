#include "dsal/alloop.hpp"

#include "dsal/csv.hpp"
#include "dsal/rng.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <ostream>

namespace dsal {

namespace {

// Substream tags for mix_seed.
enum : std::uint64_t {
    kSplitStream = 1,
    kInitStream = 2,
    kBaseTrainStream = 3,
    kEnsembleStream = 4,
    kFinetuneStream = 1000,
    kRandomQueryStream = 2000,
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::unique_ptr<MultiHeadSegmenter> default_model(const ALConfig& cfg) {
    return std::make_unique<DeepSupervisedNet>(init_params(mix_seed(cfg.seed, kInitStream)));
}

TrainConfig seeded(TrainConfig tc, std::uint64_t seed) {
    tc.seed = seed;
    return tc;
}

std::vector<ValidationItem> validation_items(const PoolState& pool, const MultiHeadSegmenter& model,
                                             std::size_t limit) {
    std::vector<ValidationItem> items;
    for (const auto& e : pool.labeled()) {
        if (items.size() >= limit) break;
        items.push_back({e.sample.image(), model.predict(e.sample.image()).final, e.mask});
    }
    return items;
}

}  // namespace

std::string_view to_string(QueryMode m) noexcept { return m == QueryMode::dsal ? "dsal" : "random"; }

QueryMode parse_query_mode(std::string_view s) {
    if (s == "dsal") return QueryMode::dsal;
    if (s == "random") return QueryMode::random;
    throw Error("unknown query mode '" + std::string(s) + "' (expected dsal or random)");
}

void ALConfig::validate() const {
    if (iterations < 1) throw Error("al.iterations must be at least 1");
    if (pseudo_start_iter < 1) throw Error("al.pseudo_start must be at least 1");
    if (bins < 2) throw Error("al.bins must be at least 2");
    base_train.validate();
    finetune.validate();
    ensemble.center.validate();
    ensemble.perturb.validate();
    if (ensemble.members < 1 || ensemble.members % 2 == 0) throw Error("ensemble.members must be odd");
    if (ensemble.finetune_rounds < 0) throw Error("ensemble.rounds must be nonnegative");
    if (ensemble.validation_limit < 1) throw Error("ensemble.validation_limit must be positive");
    if (target_dsc && !(*target_dsc > 0.0 && *target_dsc <= 1.0)) throw Error("al.target_dsc must lie in (0,1]");
}

BinaryMask oracle_label(const Sample& sample) {
    if (!sample.has_ground_truth())
        throw Error("oracle: sample '" + sample.id() + "' has no ground truth; the simulation cannot proceed");
    return sample.ground_truth();
}

DataSplit split_dataset(const std::vector<Sample>& samples, const SplitSizes& sizes, std::uint64_t seed) {
    const std::size_t need = sizes.initial + sizes.pool + sizes.test;
    if (need > samples.size())
        throw Error("split sizes " + std::to_string(sizes.initial) + "/" + std::to_string(sizes.pool) + "/" +
                    std::to_string(sizes.test) + " exceed the dataset size " + std::to_string(samples.size()));
    if (sizes.initial == 0) throw Error("split: the initial labeled set must be nonempty");
    if (sizes.test == 0) throw Error("split: the test set must be nonempty");
    for (const auto& s : samples)
        if (!s.has_ground_truth()) throw Error("split: sample '" + s.id() + "' has no ground truth");

    std::vector<std::size_t> order(samples.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    Rng rng(mix_seed(seed, kSplitStream));
    rng.shuffle(order.begin(), order.end());

    DataSplit split;
    for (std::size_t k = 0; k < need; ++k) {
        const Sample& s = samples[order[k]];
        if (k < sizes.initial)
            split.initial.push_back(s);
        else if (k < sizes.initial + sizes.pool)
            split.pool.push_back(s);
        else
            split.test.push_back(s);
    }
    return split;
}

IterationOutcome run_iteration(LoopState& state, const ALConfig& cfg) {
    IterationOutcome out;
    if (state.pool.unlabeled().empty()) {
        out.exhausted = true;
        return out;
    }
    if (!state.model) throw Error("run_iteration: no model");
    const int t = state.pool.iteration() + 1;
    IterationRecord& rec = out.record;
    rec.iteration = t;

    const bool pseudo_enabled =
        cfg.mode == QueryMode::dsal && cfg.strategy.pseudo_labels && t >= cfg.pseudo_start_iter && cfg.k_weak > 0;

    // phase 1: query selection
    auto t0 = Clock::now();
    std::map<std::string, ProbMap> final_maps;
    QuerySplit split;
    if (cfg.mode == QueryMode::random) {
        std::vector<std::string> ids;
        for (const auto& s : state.pool.unlabeled()) ids.push_back(s.id());
        Rng rng(mix_seed(cfg.seed, kRandomQueryStream + static_cast<std::uint64_t>(t)));
        rng.shuffle(ids.begin(), ids.end());
        ids.resize(std::min(ids.size(), cfg.k_strong));
        split.strong_ids = std::move(ids);
    } else {
        rec.scores.reserve(state.pool.unlabeled().size());
        for (const auto& s : state.pool.unlabeled()) {
            auto pred = state.model->predict(s.image());
            rec.scores.push_back(score_sample(pred, s.id()));
            final_maps.emplace(s.id(), std::move(pred.final));
        }
        SelectionConfig sc;
        sc.k_strong = cfg.k_strong;
        sc.k_weak = cfg.k_weak;
        sc.bins = cfg.bins;
        sc.pseudo_enabled = pseudo_enabled;
        sc.confidence_filter = cfg.strategy.confidence_filter;
        split = select_queries(rec.scores, sc);
    }
    rec.strong_ids = split.strong_ids;
    rec.weak_ids = split.weak_ids;
    rec.t_conf = split.t_conf;
    rec.phase_ms[0] = ms_since(t0);

    // phase 2: sample annotation
    t0 = Clock::now();
    std::vector<BinaryMask> strong_masks;
    for (const auto& id : split.strong_ids) strong_masks.push_back(oracle_label(*state.pool.find_unlabeled(id)));

    std::vector<BinaryMask> weak_masks;
    if (!split.weak_ids.empty()) {
        if (cfg.strategy.ensemble_crf && !state.ensemble) {
            const auto base = build_ensemble(cfg.ensemble.center, cfg.ensemble.members, cfg.ensemble.perturb,
                                             mix_seed(cfg.seed, kEnsembleStream));
            const auto validation = validation_items(state.pool, *state.model, cfg.ensemble.validation_limit);
            auto tuned = greedy_finetune(base, validation, cfg.ensemble.finetune_rounds, cfg.ensemble.perturb,
                                         mix_seed(cfg.seed, kEnsembleStream + 1), cfg.ensemble.meanfield);
            state.ensemble = tuned.ensemble;
            state.ensemble_tuning = std::move(tuned);
        }
        // Pseudo labels are produced from the image and the model output only.
        const GroundTruthFence fence;
        for (const auto& id : split.weak_ids) {
            const Sample& s = *state.pool.find_unlabeled(id);
            const ProbMap& p = final_maps.at(id);
            weak_masks.push_back(cfg.strategy.ensemble_crf ? refine(*state.ensemble, s.image(), p, cfg.ensemble.meanfield)
                                                          : binarize(p));
        }
    }
    rec.phase_ms[1] = ms_since(t0);

    // phase 3: update model
    t0 = Clock::now();
    PoolState next = move_to_labeled(state.pool, split.strong_ids, strong_masks, Provenance::oracle);
    next = move_to_labeled(next, split.weak_ids, weak_masks, Provenance::pseudo);
    state.pool = next.advanced();
    state.model->fit(state.pool.labeled(),
                     seeded(cfg.finetune, mix_seed(cfg.seed, kFinetuneStream + static_cast<std::uint64_t>(t))));
    rec.phase_ms[2] = ms_since(t0);

    rec.pool_remaining = state.pool.unlabeled().size();
    rec.labeled_total = state.pool.labeled().size();
    return out;
}

double evaluate_test(const MultiHeadSegmenter& model, const std::vector<Sample>& test,
                     std::vector<HeldOutScore>* held_out) {
    if (test.empty()) throw Error("evaluate_test: empty test set");
    double sum = 0.0;
    if (held_out) held_out->clear();
    for (const auto& s : test) {
        const auto pred = model.predict(s.image());
        const double r = dice(binarize(pred.final), s.ground_truth());
        sum += r;
        if (held_out) held_out->push_back({s.id(), score_sample(pred).mean_dsc, r});
    }
    return sum / static_cast<double>(test.size());
}

namespace {

std::vector<LabeledEntry> label_all(const std::vector<Sample>& samples, Provenance p) {
    std::vector<LabeledEntry> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({s, oracle_label(s), p});
    return out;
}

RunResult run_loop(PoolState pool, const std::vector<Sample>& test, const ALConfig& cfg,
                   std::unique_ptr<MultiHeadSegmenter> model) {
    cfg.validate();
    if (!model) model = default_model(cfg);

    LoopState state{std::move(pool), std::move(model), std::nullopt, std::nullopt};
    RunResult result;

    IterationRecord base;
    auto t0 = Clock::now();
    state.model->fit(state.pool.labeled(), seeded(cfg.base_train, mix_seed(cfg.seed, kBaseTrainStream)));
    base.phase_ms[2] = ms_since(t0);
    base.test_dsc = evaluate_test(*state.model, test, &base.held_out);
    base.pool_remaining = state.pool.unlabeled().size();
    base.labeled_total = state.pool.labeled().size();
    result.records.push_back(std::move(base));

    for (int t = 1; t <= cfg.iterations; ++t) {
        if (cfg.target_dsc && result.records.back().test_dsc >= *cfg.target_dsc) break;
        auto outcome = run_iteration(state, cfg);
        if (outcome.exhausted) break;
        outcome.record.test_dsc = evaluate_test(*state.model, test, &outcome.record.held_out);
        result.records.push_back(std::move(outcome.record));
    }
    result.final_pool = std::move(state.pool);
    result.model = std::move(state.model);
    result.ensemble = std::move(state.ensemble);
    result.ensemble_tuning = std::move(state.ensemble_tuning);
    return result;
}

}  // namespace

RunResult run(const DataSplit& split, const ALConfig& cfg, std::unique_ptr<MultiHeadSegmenter> model) {
    if (split.initial.empty()) throw Error("run: the initial labeled set is empty");
    if (split.test.empty()) throw Error("run: the test set is empty");
    PoolState pool(label_all(split.initial, Provenance::initial), split.pool, 0);
    return run_loop(std::move(pool), split.test, cfg, std::move(model));
}

RunResult run_full_supervision(const DataSplit& split, const ALConfig& cfg, std::unique_ptr<MultiHeadSegmenter> model) {
    cfg.validate();
    if (split.test.empty()) throw Error("run_full_supervision: the test set is empty");
    auto labeled = label_all(split.initial, Provenance::initial);
    for (auto& e : label_all(split.pool, Provenance::oracle)) labeled.push_back(std::move(e));
    if (!model) model = default_model(cfg);

    RunResult result;
    PoolState pool(std::move(labeled), {}, 0);
    auto t0 = Clock::now();
    model->fit(pool.labeled(), seeded(cfg.base_train, mix_seed(cfg.seed, kBaseTrainStream)));
    IterationRecord base;
    base.phase_ms[2] = ms_since(t0);
    base.test_dsc = evaluate_test(*model, split.test, &base.held_out);
    base.labeled_total = pool.labeled().size();
    result.records.push_back(std::move(base));
    for (int t = 1; t <= cfg.iterations; ++t) {
        IterationRecord rec;
        rec.iteration = t;
        t0 = Clock::now();
        model->fit(pool.labeled(), seeded(cfg.finetune, mix_seed(cfg.seed, kFinetuneStream + static_cast<std::uint64_t>(t))));
        rec.phase_ms[2] = ms_since(t0);
        rec.test_dsc = evaluate_test(*model, split.test, &rec.held_out);
        rec.labeled_total = pool.labeled().size();
        result.records.push_back(std::move(rec));
        pool = pool.advanced();
    }
    result.final_pool = std::move(pool);
    result.model = std::move(model);
    return result;
}

std::vector<double> oracle_fraction(const std::vector<IterationRecord>& records, std::size_t initial,
                                    std::size_t pool) {
    std::vector<double> out;
    std::size_t used = initial;
    const double total = static_cast<double>(initial + pool);
    for (const auto& r : records) {
        used += r.strong_ids.size();
        out.push_back(static_cast<double>(used) / total);
    }
    return out;
}

void write_run_log_csv_header(std::ostream& os) {
    os << "t,n_strong,n_weak,pool_remaining,labeled_total,test_dsc,phase1_ms,phase2_ms,phase3_ms\n";
}

void write_run_log_csv_row(std::ostream& os, const IterationRecord& r, bool timings) {
    os << r.iteration << ',' << r.strong_ids.size() << ',' << r.weak_ids.size() << ',' << r.pool_remaining << ','
       << r.labeled_total << ',' << fmt_real(r.test_dsc);
    for (double ms : r.phase_ms) os << ',' << (timings ? fmt_real(ms) : std::string("0"));
    os << '\n';
}

}  // namespace dsal
