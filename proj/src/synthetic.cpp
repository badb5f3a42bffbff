#include "dsal/synthetic.hpp"

#include "dsal/csv.hpp"
#include "dsal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace dsal {

namespace {

constexpr double kMinForeground = 0.05;
constexpr double kMaxForeground = 0.6;
constexpr double kOccluderForeground = 0.55;
constexpr double kOccluderBackground = 0.45;

struct Frame {
    double cx, cy, angle;
};

// (u, v) of pixel center (x, y) in the shape's rotated frame.
std::pair<double, double> local(const Frame& f, int x, int y) {
    const double px = x + 0.5 - f.cx, py = y + 0.5 - f.cy;
    const double c = std::cos(f.angle), s = std::sin(f.angle);
    return {c * px + s * py, -s * px + c * py};
}

std::vector<std::uint8_t> render_shape(ShapeKind kind, int size, Rng& rng) {
    const double S = size;
    const Frame f{rng.uniform(0.3, 0.7) * S, rng.uniform(0.3, 0.7) * S, rng.uniform(0.0, std::numbers::pi)};
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(size) * size, 0);

    if (kind == ShapeKind::ellipse) {
        const double a = rng.uniform(0.1, 0.4) * S, b = rng.uniform(0.1, 0.4) * S;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const auto [u, v] = local(f, x, y);
                mask[static_cast<std::size_t>(y) * size + x] = (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
            }
    } else if (kind == ShapeKind::rectangle) {
        const double a = rng.uniform(0.1, 0.35) * S, b = rng.uniform(0.1, 0.35) * S;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const auto [u, v] = local(f, x, y);
                mask[static_cast<std::size_t>(y) * size + x] = std::abs(u) <= a && std::abs(v) <= b;
            }
    } else {
        // Star-shaped blob: radius modulated by a few low harmonics.
        const double r0 = rng.uniform(0.15, 0.35) * S;
        double amp[3], phase[3];
        for (int k = 0; k < 3; ++k) {
            amp[k] = rng.uniform(0.0, 0.25);
            phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const auto [u, v] = local(f, x, y);
                const double theta = std::atan2(v, u);
                double r = 1.0;
                for (int k = 0; k < 3; ++k) r += amp[k] * std::cos((k + 2) * theta + phase[k]);
                mask[static_cast<std::size_t>(y) * size + x] = std::hypot(u, v) <= r0 * r;
            }
    }
    return mask;
}

// Thick line through a random point at a random angle.
std::vector<std::uint8_t> render_occluder(int size, Rng& rng) {
    const double px = rng.uniform(0.2, 0.8) * size, py = rng.uniform(0.2, 0.8) * size;
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double half_width = rng.uniform(0.6, 1.6);
    const double nx = -std::sin(angle), ny = std::cos(angle);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(size) * size, 0);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            out[static_cast<std::size_t>(y) * size + x] = std::abs((x + 0.5 - px) * nx + (y + 0.5 - py) * ny) <= half_width;
    return out;
}

}  // namespace

std::string_view to_string(ShapeKind k) noexcept {
    switch (k) {
        case ShapeKind::ellipse: return "ellipse";
        case ShapeKind::blob: return "blob";
        case ShapeKind::rectangle: return "rectangle";
        case ShapeKind::mixed: break;
    }
    return "mixed";
}

ShapeKind parse_shape_kind(std::string_view s) {
    if (s == "ellipse") return ShapeKind::ellipse;
    if (s == "blob") return ShapeKind::blob;
    if (s == "rectangle") return ShapeKind::rectangle;
    if (s == "mixed") return ShapeKind::mixed;
    throw Error("unknown shape kind '" + std::string(s) + "' (expected ellipse, blob, rectangle or mixed)");
}

void SyntheticSpec::validate() const {
    if (n_samples < 0) throw Error("synthetic.n_samples must be nonnegative");
    if (image_size < 8 || image_size % 4 != 0)
        throw Error("synthetic.image_size must be a multiple of 4 and at least 8, got " + std::to_string(image_size));
    if (!(noise_level >= 0.0)) throw Error("synthetic.noise_level must be nonnegative");
    if (!(noise_spread >= 0.0 && noise_spread <= 1.0)) throw Error("synthetic.noise_spread must lie in [0,1]");
    if (!(occlusion_probability >= 0.0 && occlusion_probability <= 1.0))
        throw Error("synthetic.occlusion_probability must lie in [0,1]");
}

Sample generate_synthetic_sample(const SyntheticSpec& spec, int index) {
    spec.validate();
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(index)));
    const int S = spec.image_size;
    const std::size_t n = static_cast<std::size_t>(S) * S;

    ShapeKind kind = spec.shape;
    if (kind == ShapeKind::mixed) kind = static_cast<ShapeKind>(rng.below(3));

    std::vector<std::uint8_t> mask;
    for (int attempt = 0;; ++attempt) {
        mask = render_shape(kind, S, rng);
        const double frac = static_cast<double>(std::count(mask.begin(), mask.end(), 1)) / static_cast<double>(n);
        if (frac >= kMinForeground && frac <= kMaxForeground) break;
        if (attempt > 1000) throw Error("generate_synthetic: could not place a shape of acceptable size");
    }

    std::vector<double> image(n);
    for (std::size_t i = 0; i < n; ++i) image[i] = mask[i] ? kForegroundLevel : kBackgroundLevel;

    if (rng.uniform() < spec.occlusion_probability) {
        const auto occ = render_occluder(S, rng);
        for (std::size_t i = 0; i < n; ++i)
            if (occ[i]) image[i] = mask[i] ? kOccluderForeground : kOccluderBackground;
    }

    const double sigma = spec.noise_level * rng.uniform(1.0 - spec.noise_spread, 1.0 + spec.noise_spread);
    if (sigma > 0.0)
        for (double& v : image) v = std::clamp(v + rng.normal(0.0, sigma), 0.0, 1.0);

    char id[64];
    std::snprintf(id, sizeof id, "syn%llu_%05d", static_cast<unsigned long long>(spec.seed), index);
    return Sample(id, ImageGrid(S, S, std::move(image)), BinaryMask(S, S, std::move(mask)));
}

std::vector<Sample> generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(spec.n_samples));
    for (int k = 0; k < spec.n_samples; ++k) out.push_back(generate_synthetic_sample(spec, k));
    return out;
}

std::string to_key_values(const SyntheticSpec& spec, std::string_view prefix) {
    std::ostringstream os;
    const std::string p(prefix);
    os << p << "n_samples=" << spec.n_samples << '\n';
    os << p << "image_size=" << spec.image_size << '\n';
    os << p << "shape=" << to_string(spec.shape) << '\n';
    os << p << "noise_level=" << fmt_exact(spec.noise_level) << '\n';
    os << p << "noise_spread=" << fmt_exact(spec.noise_spread) << '\n';
    os << p << "occlusion_probability=" << fmt_exact(spec.occlusion_probability) << '\n';
    os << p << "seed=" << spec.seed << '\n';
    return os.str();
}

SyntheticSpec synthetic_spec_from(const KeyValues& kv, std::string_view prefix, const SyntheticSpec& defaults) {
    const std::string p(prefix);
    SyntheticSpec s = defaults;
    s.n_samples = static_cast<int>(kv.get_int(p + "n_samples", s.n_samples));
    s.image_size = static_cast<int>(kv.get_int(p + "image_size", s.image_size));
    s.shape = parse_shape_kind(kv.get_string(p + "shape", std::string(to_string(s.shape))));
    s.noise_level = kv.get_real(p + "noise_level", s.noise_level);
    s.noise_spread = kv.get_real(p + "noise_spread", s.noise_spread);
    s.occlusion_probability = kv.get_real(p + "occlusion_probability", s.occlusion_probability);
    s.seed = static_cast<std::uint64_t>(kv.get_int(p + "seed", static_cast<long long>(s.seed)));
    s.validate();
    return s;
}

}  // namespace dsal
