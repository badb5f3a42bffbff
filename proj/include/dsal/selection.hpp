#pragma once

#include "dsal/core.hpp"
#include "dsal/segmenter.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dsal {

struct SampleScores {
    std::string sample_id;
    double l_dsc = 0.0;       // lower head vs final head
    double m_dsc = 0.0;       // middle head vs final head
    double mean_dsc = 0.0;
    double uncertainty = 0.0;  // 1 - mean_dsc
    double confidence = 0.0;   // mean |p - 1/2| of the final head
};

struct QuerySplit {
    std::vector<std::string> strong_ids;
    std::vector<std::string> weak_ids;
    double t_conf = 0.0;
};

/// Mean over pixels of |p - 0.5|; lies in [0, 0.5].
double confidence(const ProbMap& p);

SampleScores score_sample(const MultiHeadPrediction& pred, std::string sample_id = {});

/// Start of the uppermost of `bins` equal-width bins spanning the scores.
/// When every score is equal the threshold sits just below them so that all
/// samples pass the strict `> t_conf` filter.
double confidence_threshold(std::span<const double> scores, int bins);

struct SelectionConfig {
    std::size_t k_strong = 0;
    std::size_t k_weak = 0;
    int bins = 10;
    bool pseudo_enabled = false;
    bool confidence_filter = true;
};

/// Strong queries are the top-k uncertain samples; weak queries are the
/// bottom-k uncertain among the remaining samples whose confidence exceeds the
/// histogram threshold. Uncertainty ties break by ascending id.
QuerySplit select_queries(std::span<const SampleScores> scores, const SelectionConfig& cfg);

/// Pearson correlation of descending-order ranks (average ranks on ties).
double rank_correlation(std::span<const double> a, std::span<const double> b);

/// 1-based descending ranks; tied values share their average rank.
std::vector<double> descending_ranks(std::span<const double> values);

enum class SelectedAs { none, strong, weak };

std::string_view to_string(SelectedAs s) noexcept;

void write_scores_csv_header(std::ostream& os);
void write_scores_csv_row(std::ostream& os, int iteration, const SampleScores& s, SelectedAs selected);

}  // namespace dsal
