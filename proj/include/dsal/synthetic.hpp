#pragma once

#include "dsal/core.hpp"
#include "dsal/kv.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dsal {

enum class ShapeKind { ellipse, blob, rectangle, mixed };

std::string_view to_string(ShapeKind k) noexcept;
ShapeKind parse_shape_kind(std::string_view s);

/// Noisy renderings of single random shapes. Foreground renders at 0.8 and
/// background at 0.2 before noise; each sample draws its own noise stddev
/// uniformly from noise_level * [1 - noise_spread, 1 + noise_spread].
/// Occluders are low-contrast strokes that pull intensities toward 0.5
/// without crossing it.
struct SyntheticSpec {
    int n_samples = 340;
    int image_size = 32;
    ShapeKind shape = ShapeKind::mixed;
    double noise_level = 0.45;
    double noise_spread = 1.0;
    double occlusion_probability = 0.3;
    std::uint64_t seed = 0;

    void validate() const;
};

inline constexpr double kForegroundLevel = 0.8;
inline constexpr double kBackgroundLevel = 0.2;

std::vector<Sample> generate_synthetic(const SyntheticSpec& spec);

/// Single sample with index `index` of the dataset `spec` would generate.
Sample generate_synthetic_sample(const SyntheticSpec& spec, int index);

std::string to_key_values(const SyntheticSpec& spec, std::string_view prefix = "synthetic.");
SyntheticSpec synthetic_spec_from(const KeyValues& kv, std::string_view prefix = "synthetic.",
                                  const SyntheticSpec& defaults = {});

}  // namespace dsal
