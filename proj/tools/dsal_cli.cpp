#include "dsal/csv.hpp"
#include "dsal/experiment.hpp"
#include "dsal/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out;
};

dsal::KeyValues config_values(const Globals& g) {
    if (g.config.empty()) return {};
    std::ifstream is(g.config);
    if (!is) throw dsal::Error("cannot open config " + g.config);
    return dsal::KeyValues::parse(is, g.config);
}

fs::path require_out(const Globals& g, const char* what) {
    if (g.out.empty()) throw dsal::Error(std::string(what) + " needs --out");
    return g.out;
}

int cmd_generate(const Globals& g, const dsal::SyntheticSpec& overrides, const std::vector<std::string>& set_flags) {
    const auto kv = config_values(g);
    dsal::SyntheticSpec spec = dsal::synthetic_spec_from(kv, "synthetic.");
    if (!kv.contains("synthetic.seed")) spec.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
    for (const auto& f : set_flags) {
        if (f == "n") spec.n_samples = overrides.n_samples;
        if (f == "size") spec.image_size = overrides.image_size;
        if (f == "shape") spec.shape = overrides.shape;
        if (f == "noise") spec.noise_level = overrides.noise_level;
        if (f == "spread") spec.noise_spread = overrides.noise_spread;
        if (f == "occlusion") spec.occlusion_probability = overrides.occlusion_probability;
    }
    if (g.seed) spec.seed = *g.seed;
    const auto out = require_out(g, "generate");
    const auto samples = dsal::generate_synthetic(spec);
    dsal::save_dataset(out, samples);
    std::ofstream(out / "synthetic.txt") << dsal::to_key_values(spec);
    std::printf("wrote %zu samples to %s\n", samples.size(), out.string().c_str());
    return 0;
}

int cmd_run(const Globals& g) {
    auto cfg = g.config.empty() ? dsal::ExperimentConfig::defaults() : dsal::ExperimentConfig::load(g.config);
    if (g.seed) cfg = cfg.with_seed(*g.seed);
    const auto out = require_out(g, "run");
    const auto res = dsal::run_experiment(cfg, out);
    const auto print = [](const char* name, const dsal::RunResult& r) {
        std::printf("%-8s iterations=%zu labeled=%zu final_test_dsc=%s\n", name, r.records.size() - 1,
                    r.final_pool.labeled().size(), dsal::fmt_real(r.records.back().test_dsc).c_str());
    };
    print(std::string(dsal::to_string(cfg.al.mode)).c_str(), res.main);
    if (res.baseline) print("random", *res.baseline);
    if (res.full) print("full", *res.full);
    return 0;
}

int cmd_score(const Globals& g, const std::string& checkpoint, const std::string& data) {
    const dsal::DeepSupervisedNet net(dsal::load_checkpoint(checkpoint));
    const auto samples = dsal::load_dataset(data);
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!g.out.empty()) {
        fs::create_directories(g.out);
        file.open(fs::path(g.out) / "scores.csv", std::ios::binary);
        if (!file) throw dsal::Error("cannot write " + (fs::path(g.out) / "scores.csv").string());
        os = &file;
    }
    dsal::write_scores_csv_header(*os);
    for (const auto& s : samples)
        dsal::write_scores_csv_row(*os, 0, dsal::score_sample(net.predict(s.image()), s.id()), dsal::SelectedAs::none);
    return 0;
}

int cmd_refine(const Globals& g, const std::string& image, const std::string& prob, const std::string& ensemble,
               const std::string& preset, int members, bool exact) {
    dsal::CrfEnsemble ens;
    if (!ensemble.empty()) {
        ens = dsal::load_ensemble(ensemble);
    } else {
        dsal::CrfParams center = preset == "isic"   ? dsal::CrfParams::isic_center()
                                 : preset == "rsna" ? dsal::CrfParams::rsna_center()
                                 : preset == "desk" ? dsal::CrfParams::desk_center()
                                                    : throw dsal::Error("unknown center preset '" + preset + "'");
        const auto kv = config_values(g);
        if (kv.contains("ensemble.center.gaussian.sdims")) center = dsal::crf_params_from(kv, "ensemble.center.");
        ens = dsal::build_ensemble(center, members, {}, g.seed.value_or(0));
    }
    dsal::MeanFieldOptions opts;
    if (exact) opts.mode = dsal::MessagePassing::exact;
    const auto img = dsal::read_image(image);
    const auto p = dsal::read_prob_map(prob);
    const auto mask = dsal::refine(ens, img, p, opts);
    const auto out = require_out(g, "refine");
    dsal::write_mask(out, mask);
    std::printf("foreground pixels: %zu of %zu\n", mask.foreground_count(), mask.size());
    return 0;
}

int cmd_report(const Globals& g, const std::string& in) {
    std::ifstream is(fs::path(in) / "correlation.csv");
    if (!is) throw dsal::Error("cannot open " + (fs::path(in) / "correlation.csv").string());
    const fs::path out = g.out.empty() ? fs::path(in) : fs::path(g.out);
    fs::create_directories(out);
    std::ofstream os(out / "correlation_summary.csv", std::ios::binary);
    if (!os) throw dsal::Error("cannot write " + (out / "correlation_summary.csv").string());
    dsal::regenerate_correlation_summary(is, os);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deep-supervision active learning for binary segmentation"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Master seed");
    app.add_option("--config", g.config, "key=value config file");
    app.add_option("--out", g.out, "Output path");

    auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
    gen->fallthrough();
    dsal::SyntheticSpec ov;
    std::string shape;
    gen->add_option("--n", ov.n_samples, "Number of samples");
    gen->add_option("--size", ov.image_size, "Image side (multiple of 4)");
    gen->add_option("--shape", shape, "ellipse, blob, rectangle or mixed");
    gen->add_option("--noise", ov.noise_level, "Noise stddev");
    gen->add_option("--spread", ov.noise_spread, "Per-sample noise spread in [0,1]");
    gen->add_option("--occlusion", ov.occlusion_probability, "Occluder probability");

    auto* run = app.add_subcommand("run", "Run an experiment from a config");
    run->fallthrough();

    auto* score = app.add_subcommand("score", "Score a dataset with a checkpoint");
    score->fallthrough();
    std::string checkpoint, data;
    score->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    score->add_option("--data", data, "Dataset directory")->required();

    auto* refine = app.add_subcommand("refine", "Refine a probability map with a CRF ensemble");
    refine->fallthrough();
    std::string image, prob, ensemble, preset = "desk";
    int members = 5;
    bool exact = false;
    refine->add_option("--image", image, "Grayscale image (PGM/PPM)")->required();
    refine->add_option("--prob", prob, "Probability map (PGM)")->required();
    refine->add_option("--ensemble", ensemble, "Ensemble snapshot");
    refine->add_option("--center", preset, "Center preset when no snapshot: desk, isic or rsna");
    refine->add_option("--members", members, "Ensemble size when no snapshot");
    refine->add_flag("--exact", exact, "All-pairs message passing");

    auto* report = app.add_subcommand("report", "Regenerate correlation summary from logs");
    report->fallthrough();
    std::string in;
    report->add_option("--in", in, "Run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*gen) {
            std::vector<std::string> set;
            for (const char* f : {"n", "size", "shape", "noise", "spread", "occlusion"})
                if (gen->count(std::string("--") + f) > 0) set.emplace_back(f);
            if (!shape.empty()) ov.shape = dsal::parse_shape_kind(shape);
            return cmd_generate(g, ov, set);
        }
        if (*run) return cmd_run(g);
        if (*score) return cmd_score(g, checkpoint, data);
        if (*refine) return cmd_refine(g, image, prob, ensemble, preset, members, exact);
        if (*report) return cmd_report(g, in);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dsal: %s\n", e.what());
        return 1;
    }
    return 1;
}
