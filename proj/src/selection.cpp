#include "dsal/selection.hpp"

#include "dsal/csv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_set>

namespace dsal {

double confidence(const ProbMap& p) {
    double sum = 0.0;
    for (double v : p.values()) sum += std::abs(v - 0.5);
    return sum / static_cast<double>(p.size());
}

SampleScores score_sample(const MultiHeadPrediction& pred, std::string sample_id) {
    const BinaryMask final_mask = binarize(pred.final);
    SampleScores s;
    s.sample_id = std::move(sample_id);
    s.l_dsc = dice(binarize(pred.lower), final_mask);
    s.m_dsc = dice(binarize(pred.middle), final_mask);
    s.mean_dsc = (s.l_dsc + s.m_dsc) / 2.0;
    s.uncertainty = 1.0 - s.mean_dsc;
    s.confidence = confidence(pred.final);
    return s;
}

double confidence_threshold(std::span<const double> scores, int bins) {
    if (scores.empty()) throw Error("confidence_threshold: no scores");
    if (bins < 2) throw Error("confidence_threshold: need at least 2 bins, got " + std::to_string(bins));
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    if (*lo == *hi) return *lo - 1e-12;
    return *lo + (static_cast<double>(bins - 1) / bins) * (*hi - *lo);
}

QuerySplit select_queries(std::span<const SampleScores> scores, const SelectionConfig& cfg) {
    std::vector<const SampleScores*> by_unc(scores.size());
    for (std::size_t k = 0; k < scores.size(); ++k) by_unc[k] = &scores[k];
    // Descending uncertainty, ascending id.
    std::sort(by_unc.begin(), by_unc.end(), [](const SampleScores* a, const SampleScores* b) {
        if (a->uncertainty != b->uncertainty) return a->uncertainty > b->uncertainty;
        return a->sample_id < b->sample_id;
    });

    QuerySplit split;
    const std::size_t n_strong = std::min(cfg.k_strong, by_unc.size());
    for (std::size_t k = 0; k < n_strong; ++k) split.strong_ids.push_back(by_unc[k]->sample_id);

    if (!cfg.pseudo_enabled || cfg.k_weak == 0 || scores.empty()) return split;

    std::vector<double> conf(scores.size());
    std::transform(scores.begin(), scores.end(), conf.begin(), [](const SampleScores& s) { return s.confidence; });
    split.t_conf = confidence_threshold(conf, cfg.bins);

    std::vector<const SampleScores*> candidates;
    for (std::size_t k = n_strong; k < by_unc.size(); ++k)
        if (!cfg.confidence_filter || by_unc[k]->confidence > split.t_conf) candidates.push_back(by_unc[k]);
    // Ascending uncertainty, ascending id.
    std::sort(candidates.begin(), candidates.end(), [](const SampleScores* a, const SampleScores* b) {
        if (a->uncertainty != b->uncertainty) return a->uncertainty < b->uncertainty;
        return a->sample_id < b->sample_id;
    });
    const std::size_t n_weak = std::min(cfg.k_weak, candidates.size());
    for (std::size_t k = 0; k < n_weak; ++k) split.weak_ids.push_back(candidates[k]->sample_id);
    return split;
}

std::vector<double> descending_ranks(std::span<const double> values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double rank_correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("rank_correlation: length mismatch");
    if (a.size() < 3) throw Error("rank_correlation: need at least 3 pairs");
    const auto ra = descending_ranks(a);
    const auto rb = descending_ranks(b);
    const double n = static_cast<double>(ra.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t k = 0; k < ra.size(); ++k) {
        sab += (ra[k] - ma) * (rb[k] - mb);
        saa += (ra[k] - ma) * (ra[k] - ma);
        sbb += (rb[k] - mb) * (rb[k] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;  // a constant list carries no ordering
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::string_view to_string(SelectedAs s) noexcept {
    switch (s) {
        case SelectedAs::strong: return "strong";
        case SelectedAs::weak: return "weak";
        case SelectedAs::none: break;
    }
    return "none";
}

void write_scores_csv_header(std::ostream& os) {
    os << "iteration,sample_id,l_dsc,m_dsc,mean_dsc,uncertainty,confidence,selected_as\n";
}

void write_scores_csv_row(std::ostream& os, int iteration, const SampleScores& s, SelectedAs selected) {
    os << iteration << ',' << csv_field(s.sample_id) << ',' << fmt_real(s.l_dsc) << ',' << fmt_real(s.m_dsc) << ','
       << fmt_real(s.mean_dsc) << ',' << fmt_real(s.uncertainty) << ',' << fmt_real(s.confidence) << ','
       << to_string(selected) << '\n';
}

}  // namespace dsal
