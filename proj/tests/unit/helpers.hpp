#pragma once

#include "dsal/core.hpp"
#include "dsal/rng.hpp"

#include <vector>

namespace testing {

inline dsal::ImageGrid random_image(int h, int w, dsal::Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(h) * w);
    for (double& x : v) x = rng.uniform();
    return {h, w, std::move(v)};
}

inline dsal::ProbMap random_prob(int h, int w, dsal::Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(h) * w);
    for (double& x : v) x = rng.uniform(lo, hi);
    return {h, w, std::move(v)};
}

inline dsal::BinaryMask random_mask(int h, int w, dsal::Rng& rng, double p_fg = 0.5) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(h) * w);
    for (auto& x : v) x = rng.uniform() < p_fg ? 1 : 0;
    return {h, w, std::move(v)};
}

inline dsal::BinaryMask mask_from(int h, int w, std::vector<std::uint8_t> v) { return {h, w, std::move(v)}; }

}  // namespace testing
