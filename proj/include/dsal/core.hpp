#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dsal {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Row-major single-channel raster. Value checks are done by the derived
/// domain types; the base only guarantees size == height * width.
template <typename T>
class Raster {
public:
    using value_type = T;

    Raster() = default;

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return values_.size(); }

    T operator[](std::size_t i) const noexcept { return values_[i]; }
    T at(int row, int col) const noexcept { return values_[static_cast<std::size_t>(row) * width_ + col]; }
    std::span<const T> values() const noexcept { return values_; }

    bool same_shape(const Raster& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    template <typename U>
    bool same_shape(const Raster<U>& other) const noexcept {
        return height_ == other.height() && width_ == other.width();
    }

    friend bool operator==(const Raster& a, const Raster& b) = default;

protected:
    Raster(int height, int width, std::vector<T> values);

    int height_ = 0;
    int width_ = 0;
    std::vector<T> values_;
};

/// Grayscale image, intensities normalized to [0,1].
class ImageGrid : public Raster<double> {
public:
    ImageGrid() = default;
    ImageGrid(int height, int width, std::vector<double> values);

    static ImageGrid filled(int height, int width, double value);
};

/// Per-pixel label, 0 = background, 1 = foreground.
class BinaryMask : public Raster<std::uint8_t> {
public:
    BinaryMask() = default;
    BinaryMask(int height, int width, std::vector<std::uint8_t> values);

    static BinaryMask filled(int height, int width, std::uint8_t value);

    std::size_t foreground_count() const noexcept;
};

/// Per-pixel foreground probability.
class ProbMap : public Raster<double> {
public:
    ProbMap() = default;
    ProbMap(int height, int width, std::vector<double> values);

    static ProbMap filled(int height, int width, double value);
    static ProbMap from_mask(const BinaryMask& mask, double foreground = 1.0, double background = 0.0);
};

/// Access guard for ground truth. While a fence is alive on the current
/// thread, reading any sample's ground truth throws. The weak-labeling path
/// runs inside a fence so pseudo labels can never see the stored masks.
class GroundTruthFence {
public:
    GroundTruthFence();
    ~GroundTruthFence();
    GroundTruthFence(const GroundTruthFence&) = delete;
    GroundTruthFence& operator=(const GroundTruthFence&) = delete;

    static bool active() noexcept;
};

class Sample {
public:
    Sample() = default;
    Sample(std::string id, ImageGrid image, std::optional<BinaryMask> ground_truth = std::nullopt);

    const std::string& id() const noexcept { return id_; }
    const ImageGrid& image() const noexcept { return image_; }
    bool has_ground_truth() const noexcept { return ground_truth_.has_value(); }

    /// Throws when absent or when called inside a GroundTruthFence.
    const BinaryMask& ground_truth() const;

private:
    std::string id_;
    ImageGrid image_;
    std::optional<BinaryMask> ground_truth_;
};

enum class Provenance { initial, oracle, pseudo };

std::string_view to_string(Provenance p) noexcept;

struct LabeledEntry {
    Sample sample;
    BinaryMask mask;
    Provenance provenance = Provenance::initial;
};

/// Labeled set L_t, unlabeled pool U_t and iteration counter t. Transitions
/// return a new state and leave the old one untouched.
class PoolState {
public:
    PoolState() = default;
    PoolState(std::vector<LabeledEntry> labeled, std::vector<Sample> unlabeled, int iteration = 0);

    const std::vector<LabeledEntry>& labeled() const noexcept { return labeled_; }
    const std::vector<Sample>& unlabeled() const noexcept { return unlabeled_; }
    int iteration() const noexcept { return iteration_; }
    std::size_t total() const noexcept { return labeled_.size() + unlabeled_.size(); }

    std::size_t count(Provenance p) const noexcept;
    const Sample* find_unlabeled(std::string_view id) const noexcept;

    PoolState advanced() const;

private:
    std::vector<LabeledEntry> labeled_;
    std::vector<Sample> unlabeled_;
    int iteration_ = 0;
};

/// 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty.
double dice(const BinaryMask& a, const BinaryMask& b);

/// Foreground iff p >= threshold.
BinaryMask binarize(const ProbMap& p, double threshold = 0.5);

PoolState move_to_labeled(const PoolState& pool, std::span<const std::string> ids,
                          std::span<const BinaryMask> masks, Provenance provenance);

}  // namespace dsal
