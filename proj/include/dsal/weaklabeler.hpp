#pragma once

#include "dsal/crf.hpp"
#include "dsal/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dsal {

struct PerturbSpec {
    double relative_sigma = 0.05;  // stddev as a fraction of each center value
    double floor = 1e-3;           // perturbed values never drop below this
    bool perturb_steps = false;

    void validate() const;
};

struct CrfEnsemble {
    std::vector<CrfParams> members;  // odd count
    CrfParams center;
    PerturbSpec spec;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Each continuous hyperparameter becomes max(floor, N(c, (sigma * c)^2)).
/// Steps are copied unless the spec asks for them to be perturbed too.
CrfParams perturb(const CrfParams& center, const PerturbSpec& spec, Rng& rng);

/// Member k draws from its own stream, derived from (seed, k).
CrfEnsemble build_ensemble(const CrfParams& center, int members, const PerturbSpec& spec, std::uint64_t seed);

/// Per-pixel label held by more than half of the masks (count must be odd).
BinaryMask majority_vote(std::span<const BinaryMask> masks);

BinaryMask refine(const CrfEnsemble& ensemble, const ImageGrid& image, const ProbMap& p,
                  const MeanFieldOptions& opts = {});

struct ValidationItem {
    ImageGrid image;
    ProbMap prob;
    BinaryMask truth;
};

struct FinetuneRound {
    int round = 0;
    double ensemble_dice = 0.0;
    double mean_member_dice = 0.0;
    double best_member_dice = 0.0;
    bool regenerated = false;
};

struct FinetuneResult {
    CrfEnsemble ensemble;
    double initial_ensemble_dice = 0.0;  // NaN when no round ran
    double final_ensemble_dice = 0.0;    // NaN when no round ran
    std::vector<FinetuneRound> rounds;
};

/// Greedy re-centering: while the vote scores below the average member,
/// re-center on the best member and redraw the others. The better of the old
/// and new ensembles is kept each round, so validation Dice never drops.
FinetuneResult greedy_finetune(const CrfEnsemble& ensemble, std::span<const ValidationItem> validation, int rounds,
                               const PerturbSpec& spec, std::uint64_t seed, const MeanFieldOptions& opts = {});

// Snapshot: `center.*` keys, `spec.*` keys, `seed`, `members`, and one
// `member.<k>.*` block per member. Reloading reproduces refine() exactly.
void save_ensemble(const std::filesystem::path& path, const CrfEnsemble& ensemble);
CrfEnsemble load_ensemble(const std::filesystem::path& path);
std::string ensemble_to_text(const CrfEnsemble& ensemble);
CrfEnsemble ensemble_from_text(std::string_view text);

}  // namespace dsal
