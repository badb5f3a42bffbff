// Acceptance suite: one PASS/FAIL line per criterion.

#include "dsal/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace dsal;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int id;
    bool pass;
    std::string detail;
};

std::vector<Outcome> outcomes;

void report(int id, bool pass, const std::string& detail) { outcomes.push_back({id, pass, detail}); }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ImageGrid random_image(int h, int w, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(h) * w);
    for (double& x : v) x = rng.uniform();
    return {h, w, std::move(v)};
}

ProbMap random_prob(int h, int w, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(h) * w);
    for (double& x : v) x = rng.uniform();
    return {h, w, std::move(v)};
}

BinaryMask random_mask(int h, int w, Rng& rng, double p_fg) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(h) * w);
    for (auto& x : v) x = rng.uniform() < p_fg ? 1 : 0;
    return {h, w, std::move(v)};
}

CrfParams random_crf(Rng& rng) {
    return {rng.uniform(0.5, 5.0), rng.uniform(0.0, 5.0), rng.uniform(0.5, 5.0), rng.uniform(0.05, 1.0),
            rng.uniform(0.0, 5.0), 1 + static_cast<int>(rng.below(3))};
}

// ---------------------------------------------------------------------------

void gradient_check() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(101);
    const auto params = init_params(7);
    const auto img = random_image(16, 16, rng);
    const auto target = random_mask(16, 16, rng, 0.35);
    const LossWeights w;
    const double h = 1e-4;
    double worst = 0.0;
    int probes = 0;
    for (LossKind kind : {LossKind::cross_entropy, LossKind::soft_dice}) {
        const auto g = backward(params, img, target, w, kind);
        for (const auto& spec : SegmenterParams::layout())
            for (int k = 0; k < 8; ++k) {
                const std::size_t idx = spec.offset + rng.below(spec.count);
                auto plus = params, minus = params;
                plus.values()[idx] += h;
                minus.values()[idx] -= h;
                const double fd =
                    (total_loss(forward(plus, img), target, w, kind) - total_loss(forward(minus, img), target, w, kind)) /
                    (2 * h);
                const double a = g.gradient.values()[idx];
                worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
                ++probes;
            }
    }
    const double secs = seconds_since(t0);
    report(1, worst < 1e-3 && probes >= 100 && secs < 60,
           fmt("max relative error %.2e over %.0f probes (16x16), %.1f s", worst, probes, secs));
}

// Independent transcription of the mean-field update over all pixel pairs.
std::vector<double> reference_step(const std::vector<double>& qfg, const ImageGrid& img, const ProbMap& p,
                                   const CrfParams& c) {
    const int n = static_cast<int>(img.size()), W = img.width();
    std::vector<double> out(n);
    const auto clamp = [](double x) { return std::min(std::max(x, 1e-8), 1.0 - 1e-8); };
    for (int a = 0; a < n; ++a) {
        double efg = -std::log(clamp(p[a])), ebg = -std::log(clamp(1.0 - p[a]));
        for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            const double dy = a / W - b / W, dx = a % W - b % W, di = img[a] - img[b];
            const double d2 = dy * dy + dx * dx;
            const double k = c.gaussian_compat * std::exp(-d2 / (2 * c.gaussian_sdims * c.gaussian_sdims)) +
                             c.bilateral_compat * std::exp(-d2 / (2 * c.bilateral_sdims * c.bilateral_sdims) -
                                                           di * di / (2 * c.bilateral_schan * c.bilateral_schan));
            efg += k * (1.0 - qfg[b]);
            ebg += k * qfg[b];
        }
        out[a] = 1.0 / (1.0 + std::exp(efg - ebg));
    }
    return out;
}

void crf_equivalence() {
    Rng rng(202);
    double accel = 0.0, exact = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto img = random_image(6, 6, rng);
        const auto p = random_prob(6, 6, rng);
        const auto c = random_crf(rng);
        const auto u = unary_from_prob(p);
        auto q = initial_field(u);
        std::vector<double> ref(q.foreground);
        for (int s = 0; s < c.steps; ++s) {
            const auto qe = meanfield_step(q, img, u, c, {MessagePassing::exact, 3.0});
            const auto qt = meanfield_step(q, img, u, c, {MessagePassing::truncated, 3.0});
            ref = reference_step(ref, img, p, c);
            for (std::size_t i = 0; i < ref.size(); ++i) {
                accel = std::max({accel, std::abs(qt.foreground[i] - qe.foreground[i]),
                                  std::abs(qt.background[i] - qe.background[i])});
                exact = std::max(exact, std::abs(qe.foreground[i] - ref[i]));
            }
            q = qe;
        }
    }
    report(2, accel < 1e-3 && exact < 1e-9,
           fmt("accelerated vs exact %.2e (< 1e-3), exact vs reference %.2e (< 1e-9), 20 instances", accel, exact));
}

void degenerate_crf() {
    Rng rng(303);
    int equal = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 4 + static_cast<int>(rng.below(9)), w = 4 + static_cast<int>(rng.below(9));
        const auto img = random_image(h, w, rng);
        const auto p = random_prob(h, w, rng);
        CrfParams c = random_crf(rng);
        c.gaussian_compat = 0.0;
        c.bilateral_compat = 0.0;
        const auto mode = trial % 2 ? MessagePassing::exact : MessagePassing::truncated;
        if (infer(img, p, c, {mode, 3.0}) == binarize(p, 0.5)) ++equal;
    }
    report(3, equal == 100, fmt("%.0f / 100 maps identical to binarize", equal));
}

void confidence_bounds() {
    Rng rng(404);
    double lo = 1.0, hi = -1.0;
    for (int k = 0; k < 1000; ++k) {
        const double c = confidence(random_prob(8, 8, rng));
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    const double flat = confidence(ProbMap::filled(8, 8, 0.5));
    bool binary_ok = true;
    for (int k = 0; k < 50; ++k)
        binary_ok = binary_ok && confidence(ProbMap::from_mask(random_mask(8, 8, rng, rng.uniform()))) == 0.5;
    report(4, lo >= 0.0 && hi <= 0.5 && flat == 0.0 && binary_ok,
           fmt("range [%.4f, %.4f] over 1000 maps, all-0.5 map %.1f, binary maps 0.5", lo, hi, flat));
}

void histogram_threshold() {
    Rng rng(505);
    int exact_trials = 0;
    const int trials = 200;
    for (int trial = 0; trial < trials; ++trial) {
        const double a = rng.uniform(0.0, 0.25), b = rng.uniform(a + 0.01, 0.5);
        const std::size_t n = 20 + rng.below(200);
        std::vector<SampleScores> scores(n);
        for (std::size_t k = 0; k < n; ++k) {
            scores[k].sample_id = "s" + std::to_string(k);
            scores[k].confidence = k == 0 ? a : k == 1 ? b : rng.uniform(a, b);
            scores[k].uncertainty = rng.uniform();
        }
        const double t = a + 0.9 * (b - a);
        std::set<std::string> expect;
        for (const auto& s : scores)
            if (s.confidence > t) expect.insert(s.sample_id);
        const auto q = select_queries(scores, {0, n, 10, true, true});
        const std::set<std::string> got(q.weak_ids.begin(), q.weak_ids.end());
        if (got == expect) ++exact_trials;
    }
    report(5, exact_trials == trials, fmt("%.0f / %.0f score sets pass exactly conf > a + 0.9(b - a)", exact_trials, trials));
}

void selection_properties() {
    Rng rng(606);
    int ok = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng.below(60);
        std::vector<SampleScores> scores(n);
        for (std::size_t k = 0; k < n; ++k) {
            scores[k].sample_id = "id" + std::to_string(k);
            scores[k].uncertainty = std::round(rng.uniform() * 10) / 10;
            scores[k].confidence = 0.5 * std::round(rng.uniform() * 8) / 8;
        }
        const SelectionConfig cfg{rng.below(15), rng.below(15), 2 + static_cast<int>(rng.below(9)), rng.uniform() < 0.8,
                                  rng.uniform() < 0.8};
        const auto q1 = select_queries(scores, cfg);
        auto shuffled = scores;
        rng.shuffle(shuffled.begin(), shuffled.end());
        const auto q2 = select_queries(shuffled, cfg);
        std::set<std::string> strong(q1.strong_ids.begin(), q1.strong_ids.end());
        bool good = q1.strong_ids.size() <= cfg.k_strong && q1.weak_ids.size() <= cfg.k_weak &&
                    strong.size() == q1.strong_ids.size() && q1.strong_ids == q2.strong_ids &&
                    q1.weak_ids == q2.weak_ids;
        for (const auto& w : q1.weak_ids) good = good && !strong.contains(w);
        if (good) ++ok;
    }
    report(6, ok == 500, fmt("%.0f / 500 score sets disjoint, within K, order independent", ok));
}

// Flips pixels within one step of the object boundary with probability 0.4.
BinaryMask corrupt_boundary(const BinaryMask& m, Rng& rng) {
    const int H = m.height(), W = m.width();
    std::vector<std::uint8_t> out(m.values().begin(), m.values().end());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            bool edge = false;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < H && xx >= 0 && xx < W && m.at(yy, xx) != m.at(y, x)) edge = true;
                }
            if (edge && rng.uniform() < 0.4) out[static_cast<std::size_t>(y) * W + x] ^= 1;
        }
    return {H, W, std::move(out)};
}

void ensemble_refinement() {
    const auto center = CrfParams::desk_center();
    int ok = 0;
    double sum_in = 0, sum_single = 0, sum_ens = 0;
    for (int trial = 0; trial < 20; ++trial) {
        SyntheticSpec spec;
        spec.n_samples = 8;
        spec.seed = 9000 + static_cast<std::uint64_t>(trial);
        Rng rng(mix_seed(spec.seed, 1));
        const auto ens = build_ensemble(center, 5, {}, mix_seed(spec.seed, 2));
        double d_in = 0, d_single = 0, d_ens = 0;
        for (const auto& s : generate_synthetic(spec)) {
            const auto noisy = corrupt_boundary(s.ground_truth(), rng);
            std::vector<double> pv(noisy.size());
            for (std::size_t i = 0; i < pv.size(); ++i) pv[i] = noisy[i] ? 0.7 : 0.3;
            const ProbMap p(noisy.height(), noisy.width(), pv);
            const MeanFieldOptions exact{MessagePassing::exact, 3.0};
            d_in += dice(noisy, s.ground_truth()) / 8;
            d_single += dice(infer(s.image(), p, center, exact), s.ground_truth()) / 8;
            d_ens += dice(refine(ens, s.image(), p, exact), s.ground_truth()) / 8;
        }
        if (d_ens >= d_single - 0.01 && d_ens >= d_in) ++ok;
        sum_in += d_in / 20;
        sum_single += d_single / 20;
        sum_ens += d_ens / 20;
    }
    report(10, ok >= 16,
           fmt("%.0f / 20 trials pass; mean Dice corrupted %.4f, ", ok, sum_in) +
               fmt("single center %.4f, M=5 vote %.4f", sum_single, sum_ens));
}

// ---------------------------------------------------------------------------

struct SeedRuns {
    RunResult dsal, random, no_pseudo, pseudo;
    double dsal_seconds = 0.0;
};

double final_dsc(const RunResult& r) { return r.records.back().test_dsc; }

void experiment_criteria() {
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    const auto base = ExperimentConfig::defaults();
    std::vector<SeedRuns> runs;
    std::vector<double> full;
    double worst_seconds = 0.0;
    for (auto seed : seeds) {
        const auto cfg = base.with_seed(seed);
        const auto split = split_dataset(load_samples(cfg), cfg.split, seed);
        SeedRuns r;
        auto t0 = std::chrono::steady_clock::now();
        r.dsal = run(split, cfg.al);
        r.dsal_seconds = seconds_since(t0);
        worst_seconds = std::max(worst_seconds, r.dsal_seconds);
        ALConfig al = cfg.al;
        al.mode = QueryMode::random;
        r.random = run(split, al);
        al = cfg.al;
        al.strategy = {false, false, false};
        r.no_pseudo = run(split, al);
        al.strategy = {true, false, false};
        r.pseudo = run(split, al);
        if (full.size() < 3) full.push_back(final_dsc(run_full_supervision(split, cfg.al)));
        std::printf("  seed %llu: dsal %.4f random %.4f no-pseudo %.4f pseudo %.4f (dsal run %.0f s)\n",
                    static_cast<unsigned long long>(seed), final_dsc(r.dsal), final_dsc(r.random),
                    final_dsc(r.no_pseudo), final_dsc(r.pseudo), r.dsal_seconds);
        std::fflush(stdout);
        runs.push_back(std::move(r));
    }
    const double n = static_cast<double>(runs.size());

    // 7: label efficiency at the last iteration within 60% of the oracle budget
    double full_mean = 0.0;
    for (double f : full) full_mean += f / static_cast<double>(full.size());
    double at_budget = 0.0, frac_used = 0.0;
    for (const auto& r : runs) {
        const auto frac = oracle_fraction(r.dsal.records, base.split.initial, base.split.pool);
        std::size_t t = 0;
        for (std::size_t k = 0; k < frac.size(); ++k)
            if (frac[k] <= 0.6) t = k;
        at_budget += r.dsal.records[t].test_dsc / n;
        frac_used = std::max(frac_used, frac[t]);
    }
    report(7, at_budget >= 0.95 * full_mean && frac_used <= 0.6 && worst_seconds < 1800,
           fmt("DSAL %.4f at <= %.3f oracle labels vs full supervision %.4f", at_budget, frac_used, full_mean) +
               fmt(" (ratio %.4f, >= 0.95); slowest run %.0f s", at_budget / full_mean, worst_seconds));

    // 8: paired random baseline
    double d = 0.0, rnd = 0.0;
    for (const auto& r : runs) {
        d += final_dsc(r.dsal) / n;
        rnd += final_dsc(r.random) / n;
    }
    report(8, d >= rnd, fmt("mean final DSC DSAL %.4f vs random %.4f over %.0f seeds", d, rnd, n));

    // 9: rank correlation of the base model on the held-out set
    double rho = 0.0;
    std::size_t pairs = 0;
    for (const auto& r : runs) {
        rho += report_correlation(r.dsal.records[0].held_out).coefficient / n;
        pairs = r.dsal.records[0].held_out.size();
    }
    report(9, rho >= 0.5 && pairs >= 50,
           fmt("mean rank coefficient %.3f over %.0f held-out samples, %.0f seeds", rho, static_cast<double>(pairs), n));

    // 11: ablation ordering
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
    for (const auto& r : runs) {
        a0 += final_dsc(r.no_pseudo) / n;
        a1 += final_dsc(r.pseudo) / n;
        a2 += final_dsc(r.dsal) / n;
    }
    report(11, a0 <= a1 + 0.005 && a1 <= a2 + 0.005,
           fmt("no-pseudo %.4f, +pseudo %.4f, +pseudo+confidence+ensCRF %.4f (slack 0.005)", a0, a1, a2));
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void determinism() {
    auto cfg = ExperimentConfig::from_key_values(KeyValues::parse(
        "seed=12\nsynthetic.n_samples=70\nsynthetic.image_size=16\nsplit.initial=10\nsplit.pool=40\nsplit.test=20\n"
        "al.iterations=3\nal.k_strong=6\nal.k_weak=4\nal.pseudo_start=2\ntrain.base.epochs=3\n"
        "train.finetune.epochs=1\nexperiment.baseline=random\nexperiment.full_supervision=true\n"));
    const auto root = fs::temp_directory_path() / "dsal_acceptance_determinism";
    fs::remove_all(root);
    run_experiment(cfg, root / "a");
    run_experiment(cfg, root / "b");
    int files = 0, same = 0;
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
        if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
        ++files;
        if (slurp(e.path()) == slurp(root / "b" / fs::relative(e.path(), root / "a"))) ++same;
    }
    fs::remove_all(root);
    report(12, files > 0 && same == files, fmt("%.0f / %.0f CSV files byte-identical across two runs", same, files));
}

}  // namespace

// With no arguments every criterion runs; otherwise only the listed ones
// (criteria 7, 8, 9 and 11 share their runs).
int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int a = 1; a < argc; ++a) wanted.insert(std::atoi(argv[a]));
    const auto want = [&](std::initializer_list<int> ids) {
        if (wanted.empty()) return true;
        for (int id : ids)
            if (wanted.contains(id)) return true;
        return false;
    };
    try {
        if (want({1})) gradient_check();
        if (want({2})) crf_equivalence();
        if (want({3})) degenerate_crf();
        if (want({4})) confidence_bounds();
        if (want({5})) histogram_threshold();
        if (want({6})) selection_properties();
        if (want({10})) ensemble_refinement();
        if (want({12})) determinism();
        if (want({7, 8, 9, 11})) experiment_criteria();
    } catch (const std::exception& e) {
        std::printf("acceptance aborted: %s\n", e.what());
        return 2;
    }
    std::sort(outcomes.begin(), outcomes.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
    int failures = 0;
    for (const auto& o : outcomes) {
        std::printf("criterion %2d: %s  %s\n", o.id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        if (!o.pass) ++failures;
    }
    std::printf("%d of %zu criteria failed\n", failures, outcomes.size());
    return failures == 0 ? 0 : 1;
}
