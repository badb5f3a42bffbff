#include "dsal/experiment.hpp"

#include "dsal/csv.hpp"
#include "dsal/io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace dsal {

namespace {

const std::set<std::string, std::less<>>& known_keys() {
    static const std::set<std::string, std::less<>> keys = [] {
        std::set<std::string, std::less<>> k = {
            "seed",
            "data.source",
            "data.dir",
            "synthetic.n_samples",
            "synthetic.image_size",
            "synthetic.shape",
            "synthetic.noise_level",
            "synthetic.noise_spread",
            "synthetic.occlusion_probability",
            "synthetic.seed",
            "split.initial",
            "split.pool",
            "split.test",
            "al.mode",
            "al.iterations",
            "al.k_strong",
            "al.k_weak",
            "al.bins",
            "al.pseudo_start",
            "al.target_dsc",
            "ablation.pseudo_labels",
            "ablation.confidence_filter",
            "ablation.ensemble_crf",
            "ensemble.center_preset",
            "ensemble.members",
            "ensemble.rounds",
            "ensemble.validation_limit",
            "ensemble.relative_sigma",
            "ensemble.floor",
            "ensemble.perturb_steps",
            "ensemble.message_passing",
            "ensemble.window_sigmas",
            "experiment.baseline",
            "experiment.full_supervision",
            "report.timings",
        };
        for (const char* stage : {"train.base.", "train.finetune."})
            for (const char* f : {"epochs", "learning_rate", "batch_size", "loss", "optimizer", "weights.lower",
                                  "weights.middle", "weights.final"})
                k.insert(std::string(stage) + f);
        for (const char* f : {"gaussian.sdims", "gaussian.compat", "bilateral.sdims", "bilateral.schan",
                              "bilateral.compat", "steps"})
            k.insert(std::string("ensemble.center.") + f);
        return k;
    }();
    return keys;
}

CrfParams center_preset(std::string_view name) {
    if (name == "desk") return CrfParams::desk_center();
    if (name == "isic") return CrfParams::isic_center();
    if (name == "rsna") return CrfParams::rsna_center();
    throw Error("unknown ensemble.center_preset '" + std::string(name) + "' (expected desk, isic or rsna)");
}

TrainConfig train_from(const KeyValues& kv, const std::string& p, TrainConfig t) {
    t.epochs = static_cast<int>(kv.get_int(p + "epochs", t.epochs));
    t.learning_rate = kv.get_real(p + "learning_rate", t.learning_rate);
    t.batch_size = static_cast<int>(kv.get_int(p + "batch_size", t.batch_size));
    t.loss = parse_loss_kind(kv.get_string(p + "loss", std::string(to_string(t.loss))));
    t.optimizer = parse_optimizer_kind(kv.get_string(p + "optimizer", std::string(to_string(t.optimizer))));
    t.weights.lower = kv.get_real(p + "weights.lower", t.weights.lower);
    t.weights.middle = kv.get_real(p + "weights.middle", t.weights.middle);
    t.weights.final = kv.get_real(p + "weights.final", t.weights.final);
    return t;
}

void echo_train(std::ostream& os, const std::string& p, const TrainConfig& t) {
    os << p << "epochs=" << t.epochs << '\n';
    os << p << "learning_rate=" << fmt_exact(t.learning_rate) << '\n';
    os << p << "batch_size=" << t.batch_size << '\n';
    os << p << "loss=" << to_string(t.loss) << '\n';
    os << p << "optimizer=" << to_string(t.optimizer) << '\n';
    os << p << "weights.lower=" << fmt_exact(t.weights.lower) << '\n';
    os << p << "weights.middle=" << fmt_exact(t.weights.middle) << '\n';
    os << p << "weights.final=" << fmt_exact(t.weights.final) << '\n';
}

std::string_view bool_text(bool b) { return b ? "true" : "false"; }

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    return os;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

}  // namespace

std::string_view to_string(Baseline b) noexcept { return b == Baseline::random ? "random" : "none"; }

Baseline parse_baseline(std::string_view s) {
    if (s == "none") return Baseline::none;
    if (s == "random") return Baseline::random;
    throw Error("unknown experiment.baseline '" + std::string(s) + "' (expected none or random)");
}

ExperimentConfig ExperimentConfig::defaults() { return {}; }

ExperimentConfig ExperimentConfig::from_key_values(const KeyValues& kv) {
    for (const auto& [key, value] : kv.entries())
        if (!known_keys().contains(key)) throw Error("unknown config key '" + key + "'");

    ExperimentConfig c = defaults();
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
    c.al.seed = c.seed;

    const auto source = kv.get_string("data.source", "synthetic");
    if (source == "directory") {
        if (!kv.contains("data.dir")) throw Error("data.source=directory needs data.dir");
        c.data_dir = kv.get_string("data.dir");
    } else if (source != "synthetic") {
        throw Error("unknown data.source '" + source + "' (expected synthetic or directory)");
    }
    SyntheticSpec syn = c.synthetic;
    syn.seed = c.seed;
    c.synthetic = synthetic_spec_from(kv, "synthetic.", syn);

    c.split.initial = static_cast<std::size_t>(kv.get_int("split.initial", static_cast<long long>(c.split.initial)));
    c.split.pool = static_cast<std::size_t>(kv.get_int("split.pool", static_cast<long long>(c.split.pool)));
    c.split.test = static_cast<std::size_t>(kv.get_int("split.test", static_cast<long long>(c.split.test)));

    ALConfig& al = c.al;
    al.mode = parse_query_mode(kv.get_string("al.mode", std::string(to_string(al.mode))));
    al.iterations = static_cast<int>(kv.get_int("al.iterations", al.iterations));
    al.k_strong = static_cast<std::size_t>(kv.get_int("al.k_strong", static_cast<long long>(al.k_strong)));
    al.k_weak = static_cast<std::size_t>(kv.get_int("al.k_weak", static_cast<long long>(al.k_weak)));
    al.bins = static_cast<int>(kv.get_int("al.bins", al.bins));
    al.pseudo_start_iter = static_cast<int>(kv.get_int("al.pseudo_start", al.pseudo_start_iter));
    const auto target = kv.get_string("al.target_dsc", "none");
    if (target != "none") al.target_dsc = kv.get_real("al.target_dsc");

    al.strategy.pseudo_labels = kv.get_bool("ablation.pseudo_labels", al.strategy.pseudo_labels);
    al.strategy.confidence_filter = kv.get_bool("ablation.confidence_filter", al.strategy.confidence_filter);
    al.strategy.ensemble_crf = kv.get_bool("ablation.ensemble_crf", al.strategy.ensemble_crf);

    al.base_train = train_from(kv, "train.base.", al.base_train);
    al.finetune = train_from(kv, "train.finetune.", al.finetune);

    EnsembleConfig& e = al.ensemble;
    e.center = center_preset(kv.get_string("ensemble.center_preset", "desk"));
    e.center.gaussian_sdims = kv.get_real("ensemble.center.gaussian.sdims", e.center.gaussian_sdims);
    e.center.gaussian_compat = kv.get_real("ensemble.center.gaussian.compat", e.center.gaussian_compat);
    e.center.bilateral_sdims = kv.get_real("ensemble.center.bilateral.sdims", e.center.bilateral_sdims);
    e.center.bilateral_schan = kv.get_real("ensemble.center.bilateral.schan", e.center.bilateral_schan);
    e.center.bilateral_compat = kv.get_real("ensemble.center.bilateral.compat", e.center.bilateral_compat);
    e.center.steps = static_cast<int>(kv.get_int("ensemble.center.steps", e.center.steps));
    e.members = static_cast<int>(kv.get_int("ensemble.members", e.members));
    e.finetune_rounds = static_cast<int>(kv.get_int("ensemble.rounds", e.finetune_rounds));
    e.validation_limit =
        static_cast<std::size_t>(kv.get_int("ensemble.validation_limit", static_cast<long long>(e.validation_limit)));
    e.perturb.relative_sigma = kv.get_real("ensemble.relative_sigma", e.perturb.relative_sigma);
    e.perturb.floor = kv.get_real("ensemble.floor", e.perturb.floor);
    e.perturb.perturb_steps = kv.get_bool("ensemble.perturb_steps", e.perturb.perturb_steps);
    const auto mp = kv.get_string("ensemble.message_passing", "truncated");
    if (mp == "exact")
        e.meanfield.mode = MessagePassing::exact;
    else if (mp == "truncated")
        e.meanfield.mode = MessagePassing::truncated;
    else
        throw Error("unknown ensemble.message_passing '" + mp + "' (expected exact or truncated)");
    e.meanfield.window_sigmas = kv.get_real("ensemble.window_sigmas", e.meanfield.window_sigmas);

    c.baseline = parse_baseline(kv.get_string("experiment.baseline", "none"));
    c.full_supervision = kv.get_bool("experiment.full_supervision", false);
    c.report_timings = kv.get_bool("report.timings", false);
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open config " + path.string());
    return from_key_values(KeyValues::parse(is, path.string()));
}

std::string ExperimentConfig::to_text() const {
    std::ostringstream os;
    os << "seed=" << seed << '\n';
    os << "data.source=" << (data_dir ? "directory" : "synthetic") << '\n';
    if (data_dir) os << "data.dir=" << data_dir->string() << '\n';
    os << to_key_values(synthetic, "synthetic.");
    os << "split.initial=" << split.initial << '\n';
    os << "split.pool=" << split.pool << '\n';
    os << "split.test=" << split.test << '\n';
    os << "al.mode=" << to_string(al.mode) << '\n';
    os << "al.iterations=" << al.iterations << '\n';
    os << "al.k_strong=" << al.k_strong << '\n';
    os << "al.k_weak=" << al.k_weak << '\n';
    os << "al.bins=" << al.bins << '\n';
    os << "al.pseudo_start=" << al.pseudo_start_iter << '\n';
    os << "al.target_dsc=" << (al.target_dsc ? fmt_exact(*al.target_dsc) : std::string("none")) << '\n';
    os << "ablation.pseudo_labels=" << bool_text(al.strategy.pseudo_labels) << '\n';
    os << "ablation.confidence_filter=" << bool_text(al.strategy.confidence_filter) << '\n';
    os << "ablation.ensemble_crf=" << bool_text(al.strategy.ensemble_crf) << '\n';
    echo_train(os, "train.base.", al.base_train);
    echo_train(os, "train.finetune.", al.finetune);
    const EnsembleConfig& e = al.ensemble;
    os << to_key_values(e.center, "ensemble.center.");
    os << "ensemble.members=" << e.members << '\n';
    os << "ensemble.rounds=" << e.finetune_rounds << '\n';
    os << "ensemble.validation_limit=" << e.validation_limit << '\n';
    os << "ensemble.relative_sigma=" << fmt_exact(e.perturb.relative_sigma) << '\n';
    os << "ensemble.floor=" << fmt_exact(e.perturb.floor) << '\n';
    os << "ensemble.perturb_steps=" << bool_text(e.perturb.perturb_steps) << '\n';
    os << "ensemble.message_passing=" << (e.meanfield.mode == MessagePassing::exact ? "exact" : "truncated") << '\n';
    os << "ensemble.window_sigmas=" << fmt_exact(e.meanfield.window_sigmas) << '\n';
    os << "experiment.baseline=" << to_string(baseline) << '\n';
    os << "experiment.full_supervision=" << bool_text(full_supervision) << '\n';
    os << "report.timings=" << bool_text(report_timings) << '\n';
    return os.str();
}

ExperimentConfig ExperimentConfig::with_seed(std::uint64_t s) const {
    ExperimentConfig c = *this;
    c.seed = s;
    c.al.seed = s;
    c.synthetic.seed = s;
    return c;
}

void ExperimentConfig::validate() const {
    synthetic.validate();
    al.validate();
    if (al.seed != seed) throw Error("al.seed must equal seed");
    if (split.initial == 0 || split.test == 0) throw Error("split.initial and split.test must be positive");
    if (!data_dir) {
        const std::size_t need = split.initial + split.pool + split.test;
        if (need > static_cast<std::size_t>(synthetic.n_samples))
            throw Error("split sizes sum to " + std::to_string(need) + " but synthetic.n_samples is " +
                        std::to_string(synthetic.n_samples));
    }
}

std::vector<Sample> load_samples(const ExperimentConfig& cfg) {
    if (cfg.data_dir) return load_dataset(*cfg.data_dir);
    return generate_synthetic(cfg.synthetic);
}

CorrelationReport report_correlation(std::span<const HeldOutScore> pairs) {
    if (pairs.size() < 10)
        throw Error("report_correlation: need at least 10 pairs, got " + std::to_string(pairs.size()));
    std::vector<double> m, r;
    for (const auto& p : pairs) {
        m.push_back(p.mean_dsc);
        r.push_back(p.r_dsc);
    }
    return {rank_correlation(m, r), descending_ranks(m), descending_ranks(r)};
}

void write_correlation_csv_header(std::ostream& os) {
    os << "iteration,sample_id,mean_dsc,r_dsc,rank_mean_dsc,rank_r_dsc\n";
}

void write_correlation_rows(std::ostream& os, int iteration, std::span<const HeldOutScore> pairs,
                            const CorrelationReport& report) {
    for (std::size_t k = 0; k < pairs.size(); ++k)
        os << iteration << ',' << csv_field(pairs[k].sample_id) << ',' << fmt_real(pairs[k].mean_dsc) << ','
           << fmt_real(pairs[k].r_dsc) << ',' << fmt_real(report.rank_mean_dsc[k]) << ','
           << fmt_real(report.rank_r_dsc[k]) << '\n';
}

void write_correlation_summary_header(std::ostream& os) { os << "iteration,n_pairs,coefficient\n"; }

void write_correlation_summary_row(std::ostream& os, int iteration, std::size_t n, double coefficient) {
    os << iteration << ',' << n << ',' << fmt_real(coefficient) << '\n';
}

void write_run_reports(const std::filesystem::path& dir, const RunResult& result, bool timings) {
    std::filesystem::create_directories(dir);

    auto log = open_out(dir / "run_log.csv");
    write_run_log_csv_header(log);
    for (const auto& r : result.records) write_run_log_csv_row(log, r, timings);

    auto scores = open_out(dir / "scores.csv");
    write_scores_csv_header(scores);
    for (const auto& r : result.records) {
        const std::set<std::string_view> strong(r.strong_ids.begin(), r.strong_ids.end());
        const std::set<std::string_view> weak(r.weak_ids.begin(), r.weak_ids.end());
        for (const auto& s : r.scores) {
            const SelectedAs as = strong.contains(s.sample_id) ? SelectedAs::strong
                                  : weak.contains(s.sample_id) ? SelectedAs::weak
                                                               : SelectedAs::none;
            write_scores_csv_row(scores, r.iteration, s, as);
        }
    }

    auto corr = open_out(dir / "correlation.csv");
    auto summary = open_out(dir / "correlation_summary.csv");
    write_correlation_csv_header(corr);
    write_correlation_summary_header(summary);
    for (const auto& r : result.records) {
        if (r.held_out.size() < 10) continue;
        const auto rep = report_correlation(r.held_out);
        write_correlation_rows(corr, r.iteration, r.held_out, rep);
        write_correlation_summary_row(summary, r.iteration, r.held_out.size(), rep.coefficient);
    }

    if (const auto* net = dynamic_cast<const DeepSupervisedNet*>(result.model.get()))
        save_checkpoint(dir / "model_final.ckpt", net->params());
    if (result.ensemble) save_ensemble(dir / "ensemble.txt", *result.ensemble);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    cfg.validate();
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec || !std::filesystem::is_directory(out)) throw Error("cannot create output directory " + out.string());
    {
        auto echo = open_out(out / "config.txt");
        echo << cfg.to_text();
    }

    const auto samples = load_samples(cfg);
    const auto split = split_dataset(samples, cfg.split, cfg.seed);

    ExperimentResult result{run(split, cfg.al), std::nullopt, std::nullopt};
    write_run_reports(out, result.main, cfg.report_timings);

    if (cfg.baseline == Baseline::random) {
        ALConfig b = cfg.al;
        b.mode = QueryMode::random;
        result.baseline = run(split, b);
        write_run_reports(out / "baseline", *result.baseline, cfg.report_timings);
    }
    if (cfg.full_supervision) {
        result.full = run_full_supervision(split, cfg.al);
        write_run_reports(out / "full", *result.full, cfg.report_timings);
    }
    return result;
}

void regenerate_correlation_summary(std::istream& correlation_csv, std::ostream& summary_csv) {
    std::string line;
    if (!std::getline(correlation_csv, line)) throw Error("correlation CSV is empty");
    const auto header = split_csv_line(line);
    const auto col = [&](std::string_view name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error("correlation CSV lacks column '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_it = col("iteration"), c_id = col("sample_id"), c_m = col("mean_dsc"), c_r = col("r_dsc");

    std::vector<std::pair<int, std::vector<HeldOutScore>>> groups;
    std::size_t line_no = 1;
    while (std::getline(correlation_csv, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) throw Error("correlation CSV line " + std::to_string(line_no) + ": wrong field count");
        try {
            const int it = std::stoi(f[c_it]);
            if (groups.empty() || groups.back().first != it) groups.push_back({it, {}});
            groups.back().second.push_back({f[c_id], std::stod(f[c_m]), std::stod(f[c_r])});
        } catch (const std::logic_error&) {
            throw Error("correlation CSV line " + std::to_string(line_no) + ": unparsable number");
        }
    }
    write_correlation_summary_header(summary_csv);
    for (const auto& [it, pairs] : groups)
        write_correlation_summary_row(summary_csv, it, pairs.size(), report_correlation(pairs).coefficient);
}

}  // namespace dsal
