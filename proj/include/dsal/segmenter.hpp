#pragma once

#include "dsal/core.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dsal {

/// Lower, middle and final head outputs, all at input resolution.
struct MultiHeadPrediction {
    ProbMap lower;
    ProbMap middle;
    ProbMap final;
};

struct LossWeights {
    double lower = 0.1;
    double middle = 0.3;
    double final = 0.6;

    /// Throws unless all weights are nonnegative and sum to 1 within 1e-12.
    void validate() const;
};

enum class LossKind { cross_entropy, soft_dice };
enum class OptimizerKind { sgd, adam };

std::string_view to_string(LossKind k) noexcept;
std::string_view to_string(OptimizerKind k) noexcept;
LossKind parse_loss_kind(std::string_view s);
OptimizerKind parse_optimizer_kind(std::string_view s);

struct TrainConfig {
    int epochs = 10;
    double learning_rate = 1e-2;
    int batch_size = 4;
    LossKind loss = LossKind::cross_entropy;
    OptimizerKind optimizer = OptimizerKind::adam;
    LossWeights weights;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TensorSpec {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t count = 0;
};

/// Flat parameter vector of the reference deeply supervised encoder-decoder.
///
///   enc1   conv3x3  1 -> 8   + ReLU          (H)
///          maxpool 2
///   enc2   conv3x3  8 -> 16  + ReLU          (H/2)
///          maxpool 2
///   enc3   conv3x3 16 -> 32  + ReLU          (H/4)  -> head_lower  (x4 nearest)
///          nearest x2, concat enc2
///   dec2   conv3x3 48 -> 16  + ReLU          (H/2)  -> head_middle (x2 nearest)
///          nearest x2, concat enc1
///   dec1   conv3x3 24 -> 8   + ReLU          (H)    -> head_final
///
/// Heads are 1x1 convolutions followed by a sigmoid. Gradients share the
/// same layout, so a gradient is also a SegmenterParams.
class SegmenterParams {
public:
    SegmenterParams();

    static const std::vector<TensorSpec>& layout();
    static std::size_t parameter_count();
    static const TensorSpec& spec(std::string_view name);

    std::span<double> tensor(std::string_view name);
    std::span<const double> tensor(std::string_view name) const;

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool all_finite() const noexcept;

    friend bool operator==(const SegmenterParams&, const SegmenterParams&) = default;

private:
    std::vector<double> values_;
};

/// Kernels ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases zero.
SegmenterParams init_params(std::uint64_t seed);

/// Requires both image dimensions to be multiples of 4.
MultiHeadPrediction forward(const SegmenterParams& params, const ImageGrid& image);

/// Mean binary cross-entropy with p clamped to [1e-8, 1 - 1e-8].
double head_loss(const ProbMap& p, const BinaryMask& target);

/// 1 - (2 sum(p t) + 1) / (sum(p) + sum(t) + 1).
double soft_dice_loss(const ProbMap& p, const BinaryMask& target);

double total_loss(const MultiHeadPrediction& pred, const BinaryMask& target, const LossWeights& weights,
                  LossKind kind = LossKind::cross_entropy);

struct LossGradient {
    double loss = 0.0;
    SegmenterParams gradient;
};

LossGradient backward(const SegmenterParams& params, const ImageGrid& image, const BinaryMask& target,
                      const LossWeights& weights, LossKind kind = LossKind::cross_entropy);

struct TrainingExample {
    const ImageGrid* image = nullptr;
    const BinaryMask* target = nullptr;
};

/// Mini-batch descent over a seeded shuffle of the examples, starting from
/// `params`. Images must already be 4-aligned.
SegmenterParams train(SegmenterParams params, std::span<const TrainingExample> examples, const TrainConfig& cfg);

/// Mean total loss over the examples.
double dataset_loss(const SegmenterParams& params, std::span<const TrainingExample> examples,
                    const LossWeights& weights, LossKind kind);

// Edge-replication padding up to a multiple of `multiple`, and the matching crop.
ImageGrid pad_to_multiple(const ImageGrid& image, int multiple = 4);
BinaryMask pad_to_multiple(const BinaryMask& mask, int multiple = 4);
ProbMap crop(const ProbMap& p, int height, int width);

/// forward() with padding and cropping handled.
MultiHeadPrediction predict(const SegmenterParams& params, const ImageGrid& image);

/// Any model with lower/middle/final heads can drive the active learning loop.
class MultiHeadSegmenter {
public:
    virtual ~MultiHeadSegmenter() = default;

    virtual MultiHeadPrediction predict(const ImageGrid& image) const = 0;
    virtual void fit(std::span<const LabeledEntry> labeled, const TrainConfig& cfg) = 0;
    virtual std::unique_ptr<MultiHeadSegmenter> clone() const = 0;
};

class DeepSupervisedNet final : public MultiHeadSegmenter {
public:
    explicit DeepSupervisedNet(SegmenterParams params) : params_(std::move(params)) {}

    MultiHeadPrediction predict(const ImageGrid& image) const override;
    void fit(std::span<const LabeledEntry> labeled, const TrainConfig& cfg) override;
    std::unique_ptr<MultiHeadSegmenter> clone() const override;

    const SegmenterParams& params() const noexcept { return params_; }

private:
    SegmenterParams params_;
};

// Checkpoint layout:
//   DSAL-CHECKPOINT 1
//   tensors <n>
//   <name> <d0>x<d1>x... <count>     (one line per tensor, in layout order)
//   data <total count>
// followed by the raw values as little-endian IEEE-754 doubles.
void save_checkpoint(const std::filesystem::path& path, const SegmenterParams& params);
SegmenterParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dsal
