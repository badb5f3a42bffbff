#pragma once

#include "dsal/alloop.hpp"
#include "dsal/kv.hpp"
#include "dsal/synthetic.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dsal {

enum class Baseline { none, random };

std::string_view to_string(Baseline b) noexcept;
Baseline parse_baseline(std::string_view s);

/// Everything a run needs. The text form is a flat key=value file; see the
/// README for the schema. Unknown keys are rejected.
struct ExperimentConfig {
    SyntheticSpec synthetic;
    std::optional<std::filesystem::path> data_dir;  // ingest instead of generating
    SplitSizes split;
    ALConfig al;
    Baseline baseline = Baseline::none;
    bool full_supervision = false;
    bool report_timings = false;  // off keeps run logs byte-stable
    std::uint64_t seed = 0;

    /// The desk-scale defaults (32x32 synthetic shapes, 40/200/100 split).
    static ExperimentConfig defaults();

    static ExperimentConfig from_key_values(const KeyValues& kv);
    static ExperimentConfig load(const std::filesystem::path& path);
    std::string to_text() const;

    /// Copy with `seed` (and every seed derived from it) replaced.
    ExperimentConfig with_seed(std::uint64_t s) const;
    void validate() const;
};

std::vector<Sample> load_samples(const ExperimentConfig& cfg);

struct CorrelationReport {
    double coefficient = 0.0;
    std::vector<double> rank_mean_dsc;
    std::vector<double> rank_r_dsc;
};

/// Rank agreement between Mean-DSC and R-DSC; needs at least 10 pairs.
CorrelationReport report_correlation(std::span<const HeldOutScore> pairs);

void write_correlation_csv_header(std::ostream& os);
void write_correlation_rows(std::ostream& os, int iteration, std::span<const HeldOutScore> pairs,
                            const CorrelationReport& report);
void write_correlation_summary_header(std::ostream& os);
void write_correlation_summary_row(std::ostream& os, int iteration, std::size_t n, double coefficient);

/// Writes run_log.csv, scores.csv, correlation.csv and correlation_summary.csv
/// for one run into `dir`, plus model and ensemble snapshots when available.
void write_run_reports(const std::filesystem::path& dir, const RunResult& result, bool timings);

struct ExperimentResult {
    RunResult main;
    std::optional<RunResult> baseline;
    std::optional<RunResult> full;
};

/// Runs the configured experiment and writes reports under `out`:
///   config.txt, run_log.csv, scores.csv, correlation.csv,
///   correlation_summary.csv, model_final.ckpt, ensemble.txt,
///   baseline/ (random queries) and full/ (full supervision) when enabled.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Re-derives correlation_summary.csv rows from a correlation.csv.
void regenerate_correlation_summary(std::istream& correlation_csv, std::ostream& summary_csv);

}  // namespace dsal
