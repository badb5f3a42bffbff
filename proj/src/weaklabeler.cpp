#include "dsal/weaklabeler.hpp"

#include "dsal/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace dsal {

void PerturbSpec::validate() const {
    if (!(relative_sigma >= 0.0 && relative_sigma < 0.5))
        throw Error("perturb: relative_sigma must lie in [0, 0.5), got " + std::to_string(relative_sigma));
    if (!(floor > 0.0)) throw Error("perturb: floor must be positive");
}

void CrfEnsemble::validate() const {
    if (members.empty() || members.size() % 2 == 0)
        throw Error("ensemble size must be odd, got " + std::to_string(members.size()));
    center.validate();
    spec.validate();
    for (const auto& m : members) m.validate();
}

CrfParams perturb(const CrfParams& center, const PerturbSpec& spec, Rng& rng) {
    center.validate();
    spec.validate();
    auto draw = [&](double c) { return std::max(spec.floor, rng.normal(c, spec.relative_sigma * c)); };
    CrfParams out = center;
    out.gaussian_sdims = draw(center.gaussian_sdims);
    out.gaussian_compat = draw(center.gaussian_compat);
    out.bilateral_sdims = draw(center.bilateral_sdims);
    out.bilateral_schan = draw(center.bilateral_schan);
    out.bilateral_compat = draw(center.bilateral_compat);
    if (spec.perturb_steps)
        out.steps = std::max(1, static_cast<int>(std::lround(rng.normal(center.steps, spec.relative_sigma * center.steps))));
    // A zero-weight kernel stays disabled.
    if (center.gaussian_compat == 0.0) out.gaussian_compat = 0.0;
    if (center.bilateral_compat == 0.0) out.bilateral_compat = 0.0;
    return out;
}

CrfEnsemble build_ensemble(const CrfParams& center, int members, const PerturbSpec& spec, std::uint64_t seed) {
    if (members < 1 || members % 2 == 0)
        throw Error("build_ensemble: member count must be odd and positive, got " + std::to_string(members));
    CrfEnsemble e{{}, center, spec, seed};
    for (int k = 0; k < members; ++k) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
        e.members.push_back(perturb(center, spec, rng));
    }
    return e;
}

BinaryMask majority_vote(std::span<const BinaryMask> masks) {
    if (masks.empty() || masks.size() % 2 == 0)
        throw Error("majority_vote: need an odd number of masks, got " + std::to_string(masks.size()));
    for (const auto& m : masks)
        if (!m.same_shape(masks.front())) throw Error("majority_vote: dimension mismatch");
    std::vector<std::uint8_t> out(masks.front().size());
    const std::size_t half = masks.size() / 2;
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::size_t votes = 0;
        for (const auto& m : masks) votes += m[i];
        out[i] = votes > half ? 1 : 0;
    }
    return BinaryMask(masks.front().height(), masks.front().width(), std::move(out));
}

BinaryMask refine(const CrfEnsemble& ensemble, const ImageGrid& image, const ProbMap& p, const MeanFieldOptions& opts) {
    ensemble.validate();
    std::vector<BinaryMask> masks;
    masks.reserve(ensemble.members.size());
    for (const auto& m : ensemble.members) masks.push_back(infer(image, p, m, opts));
    return majority_vote(masks);
}

namespace {

struct EnsembleScore {
    double ensemble_dice = 0.0;
    std::vector<double> member_dice;
};

EnsembleScore evaluate(const CrfEnsemble& e, std::span<const ValidationItem> validation, const MeanFieldOptions& opts) {
    EnsembleScore s;
    s.member_dice.assign(e.members.size(), 0.0);
    for (const auto& v : validation) {
        std::vector<BinaryMask> masks;
        masks.reserve(e.members.size());
        for (std::size_t k = 0; k < e.members.size(); ++k) {
            masks.push_back(infer(v.image, v.prob, e.members[k], opts));
            s.member_dice[k] += dice(masks.back(), v.truth);
        }
        s.ensemble_dice += dice(majority_vote(masks), v.truth);
    }
    const double n = static_cast<double>(validation.size());
    s.ensemble_dice /= n;
    for (double& d : s.member_dice) d /= n;
    return s;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

FinetuneResult greedy_finetune(const CrfEnsemble& ensemble, std::span<const ValidationItem> validation, int rounds,
                               const PerturbSpec& spec, std::uint64_t seed, const MeanFieldOptions& opts) {
    ensemble.validate();
    if (validation.empty()) throw Error("greedy_finetune: validation set is empty");
    if (rounds < 0) throw Error("greedy_finetune: rounds must be nonnegative");

    FinetuneResult result{ensemble, std::numeric_limits<double>::quiet_NaN(),
                          std::numeric_limits<double>::quiet_NaN(), {}};
    if (rounds == 0) return result;

    CrfEnsemble current = ensemble;
    EnsembleScore score = evaluate(current, validation, opts);
    result.initial_ensemble_dice = score.ensemble_dice;

    for (int r = 1; r <= rounds; ++r) {
        FinetuneRound rec;
        rec.round = r;
        rec.ensemble_dice = score.ensemble_dice;
        rec.mean_member_dice = mean_of(score.member_dice);
        const auto best = std::max_element(score.member_dice.begin(), score.member_dice.end());
        rec.best_member_dice = *best;
        if (score.ensemble_dice >= rec.mean_member_dice) {
            result.rounds.push_back(rec);
            break;
        }
        const CrfParams new_center = current.members[static_cast<std::size_t>(best - score.member_dice.begin())];
        CrfEnsemble candidate =
            build_ensemble(new_center, static_cast<int>(current.members.size()), spec, mix_seed(seed, static_cast<std::uint64_t>(r)));
        EnsembleScore cand_score = evaluate(candidate, validation, opts);
        rec.regenerated = true;
        result.rounds.push_back(rec);
        if (cand_score.ensemble_dice >= score.ensemble_dice) {
            current = std::move(candidate);
            score = std::move(cand_score);
        } else {
            // old members stay; only the reference moves
            current.center = new_center;
        }
    }
    result.ensemble = std::move(current);
    result.final_ensemble_dice = score.ensemble_dice;
    return result;
}

std::string ensemble_to_text(const CrfEnsemble& e) {
    std::ostringstream os;
    os << "# dsal crf ensemble\n";
    os << to_key_values(e.center, "center.");
    os << "spec.relative_sigma=" << fmt_exact(e.spec.relative_sigma) << '\n';
    os << "spec.floor=" << fmt_exact(e.spec.floor) << '\n';
    os << "spec.perturb_steps=" << (e.spec.perturb_steps ? "true" : "false") << '\n';
    os << "seed=" << e.seed << '\n';
    os << "members=" << e.members.size() << '\n';
    for (std::size_t k = 0; k < e.members.size(); ++k)
        os << to_key_values(e.members[k], "member." + std::to_string(k) + ".");
    return os.str();
}

CrfEnsemble ensemble_from_text(std::string_view text) {
    const auto kv = KeyValues::parse(text, "ensemble");
    CrfEnsemble e;
    e.center = crf_params_from(kv, "center.");
    e.spec.relative_sigma = kv.get_real("spec.relative_sigma");
    e.spec.floor = kv.get_real("spec.floor");
    e.spec.perturb_steps = kv.get_bool("spec.perturb_steps", false);
    e.seed = std::stoull(kv.get_string("seed"));
    const auto n = kv.get_int("members");
    if (n < 1) throw Error("ensemble snapshot: members must be positive");
    for (long long k = 0; k < n; ++k) e.members.push_back(crf_params_from(kv, "member." + std::to_string(k) + "."));
    e.validate();
    return e;
}

void save_ensemble(const std::filesystem::path& path, const CrfEnsemble& ensemble) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write ensemble snapshot " + path.string());
    os << ensemble_to_text(ensemble);
}

CrfEnsemble load_ensemble(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open ensemble snapshot " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ensemble_from_text(ss.str());
}

}  // namespace dsal
