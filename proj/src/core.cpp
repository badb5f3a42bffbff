#include "dsal/core.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace dsal {

namespace {

thread_local int fence_depth = 0;

void check_dims(int height, int width, std::size_t n) {
    if (height < 1 || width < 1)
        throw Error("raster dimensions must be positive, got " + std::to_string(height) + "x" +
                    std::to_string(width));
    if (static_cast<std::size_t>(height) * static_cast<std::size_t>(width) != n)
        throw Error("raster value count " + std::to_string(n) + " does not match " +
                    std::to_string(height) + "x" + std::to_string(width));
}

void check_unit_interval(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw Error(std::string(what) + " value outside [0,1]: " + std::to_string(v));
    }
}

}  // namespace

template <typename T>
Raster<T>::Raster(int height, int width, std::vector<T> values)
    : height_(height), width_(width), values_(std::move(values)) {
    check_dims(height_, width_, values_.size());
}

template class Raster<double>;
template class Raster<std::uint8_t>;

ImageGrid::ImageGrid(int height, int width, std::vector<double> values)
    : Raster(height, width, std::move(values)) {
    check_unit_interval(values_, "image");
}

ImageGrid ImageGrid::filled(int height, int width, double value) {
    return ImageGrid(height, width,
                     std::vector<double>(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0), value));
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> values)
    : Raster(height, width, std::move(values)) {
    for (auto v : values_) {
        if (v > 1) throw Error("mask value must be 0 or 1, got " + std::to_string(int(v)));
    }
}

BinaryMask BinaryMask::filled(int height, int width, std::uint8_t value) {
    return BinaryMask(height, width,
                      std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0), value));
}

std::size_t BinaryMask::foreground_count() const noexcept {
    return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

ProbMap::ProbMap(int height, int width, std::vector<double> values)
    : Raster(height, width, std::move(values)) {
    check_unit_interval(values_, "probability");
}

ProbMap ProbMap::filled(int height, int width, double value) {
    return ProbMap(height, width,
                   std::vector<double>(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0), value));
}

ProbMap ProbMap::from_mask(const BinaryMask& mask, double foreground, double background) {
    std::vector<double> v(mask.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = mask[i] ? foreground : background;
    return ProbMap(mask.height(), mask.width(), std::move(v));
}

GroundTruthFence::GroundTruthFence() { ++fence_depth; }
GroundTruthFence::~GroundTruthFence() { --fence_depth; }
bool GroundTruthFence::active() noexcept { return fence_depth > 0; }

Sample::Sample(std::string id, ImageGrid image, std::optional<BinaryMask> ground_truth)
    : id_(std::move(id)), image_(std::move(image)), ground_truth_(std::move(ground_truth)) {
    if (ground_truth_ && !ground_truth_->same_shape(image_))
        throw Error("sample '" + id_ + "': mask dimensions differ from image");
}

const BinaryMask& Sample::ground_truth() const {
    if (GroundTruthFence::active())
        throw Error("ground truth of '" + id_ + "' read inside the weak-labeling path");
    if (!ground_truth_) throw Error("sample '" + id_ + "' has no ground truth");
    return *ground_truth_;
}

std::string_view to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::initial: return "initial";
        case Provenance::oracle: return "oracle";
        case Provenance::pseudo: return "pseudo";
    }
    return "unknown";
}

PoolState::PoolState(std::vector<LabeledEntry> labeled, std::vector<Sample> unlabeled, int iteration)
    : labeled_(std::move(labeled)), unlabeled_(std::move(unlabeled)), iteration_(iteration) {
    if (iteration_ < 0) throw Error("pool iteration must be nonnegative");
    std::unordered_set<std::string> seen;
    for (const auto& e : labeled_) {
        if (!e.mask.same_shape(e.sample.image()))
            throw Error("labeled entry '" + e.sample.id() + "': mask dimensions differ from image");
        if (!seen.insert(e.sample.id()).second) throw Error("duplicate sample id '" + e.sample.id() + "'");
    }
    for (const auto& s : unlabeled_) {
        if (!seen.insert(s.id()).second) throw Error("duplicate sample id '" + s.id() + "'");
    }
}

std::size_t PoolState::count(Provenance p) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(labeled_.begin(), labeled_.end(), [p](const LabeledEntry& e) { return e.provenance == p; }));
}

const Sample* PoolState::find_unlabeled(std::string_view id) const noexcept {
    for (const auto& s : unlabeled_)
        if (s.id() == id) return &s;
    return nullptr;
}

PoolState PoolState::advanced() const {
    PoolState next = *this;
    ++next.iteration_;
    return next;
}

double dice(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b))
        throw Error("dice: dimension mismatch " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                    " vs " + std::to_string(b.height()) + "x" + std::to_string(b.width()));
    std::size_t inter = 0, sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += a[i] & b[i];
        sum += a[i] + b[i];
    }
    if (sum == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(sum);
}

BinaryMask binarize(const ProbMap& p, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw Error("binarize: threshold must lie in (0,1), got " + std::to_string(threshold));
    std::vector<std::uint8_t> v(p.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = p[i] >= threshold ? 1 : 0;
    return BinaryMask(p.height(), p.width(), std::move(v));
}

PoolState move_to_labeled(const PoolState& pool, std::span<const std::string> ids,
                          std::span<const BinaryMask> masks, Provenance provenance) {
    if (ids.size() != masks.size())
        throw Error("move_to_labeled: " + std::to_string(ids.size()) + " ids but " + std::to_string(masks.size()) +
                    " masks");
    std::unordered_set<std::string> moving;
    for (const auto& id : ids) {
        if (!moving.insert(id).second) throw Error("move_to_labeled: duplicate id '" + id + "'");
        if (!pool.find_unlabeled(id)) throw Error("move_to_labeled: '" + id + "' is not in the unlabeled pool");
    }
    if (ids.empty()) return pool;

    std::vector<LabeledEntry> labeled = pool.labeled();
    std::vector<Sample> unlabeled;
    unlabeled.reserve(pool.unlabeled().size() - ids.size());
    for (const auto& s : pool.unlabeled())
        if (!moving.contains(s.id())) unlabeled.push_back(s);
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const Sample* s = pool.find_unlabeled(ids[k]);
        if (!masks[k].same_shape(s->image()))
            throw Error("move_to_labeled: mask for '" + ids[k] + "' has wrong dimensions");
        labeled.push_back(LabeledEntry{*s, masks[k], provenance});
    }
    return PoolState(std::move(labeled), std::move(unlabeled), pool.iteration());
}

}  // namespace dsal
