#pragma once

#include "dsal/core.hpp"
#include "dsal/kv.hpp"

#include <string>
#include <vector>

namespace dsal {

/// Dense CRF hyperparameters. Spatial scales are in pixels; the intensity
/// scale is in normalized [0,1] grayscale units.
struct CrfParams {
    double gaussian_sdims = 1.0;
    double gaussian_compat = 0.0;
    double bilateral_sdims = 1.0;
    double bilateral_schan = 1.0;
    double bilateral_compat = 0.0;
    int steps = 1;

    void validate() const;

    /// Reported centers for the dermoscopy (ISIC 2017) and bone-age (RSNA) setups.
    static CrfParams isic_center();
    static CrfParams rsna_center();
    /// Center used for 32x32 synthetic runs.
    static CrfParams desk_center();

    friend bool operator==(const CrfParams&, const CrfParams&) = default;
};

/// `gaussian.sdims=...` lines, one per field, each key prefixed by `prefix`.
std::string to_key_values(const CrfParams& p, std::string_view prefix = "");
/// Reads the six keys under `prefix`; missing keys are an error.
CrfParams crf_params_from(const KeyValues& kv, std::string_view prefix = "");

struct UnaryEnergies {
    int height = 0;
    int width = 0;
    std::vector<double> foreground;
    std::vector<double> background;
};

/// psi(fg) = -log clamp(p), psi(bg) = -log clamp(1 - p), clamp to [1e-8, 1 - 1e-8].
UnaryEnergies unary_from_prob(const ProbMap& p);

/// Per-pixel label distribution Q_i over {background, foreground}.
struct MarginalField {
    int height = 0;
    int width = 0;
    std::vector<double> foreground;
    std::vector<double> background;
};

double gaussian_kernel(double dy, double dx, double sdims);
double bilateral_kernel(double dy, double dx, double dintensity, double sdims, double schan);

enum class MessagePassing {
    exact,      // all pixel pairs
    truncated,  // square window of radius ceil(window_sigmas * sdims) per kernel
};

struct MeanFieldOptions {
    MessagePassing mode = MessagePassing::truncated;
    double window_sigmas = 3.0;
};

/// Exact Gibbs energy of a labeling, by double loop over all pixel pairs.
double gibbs_energy(const BinaryMask& y, const ImageGrid& image, const ProbMap& p, const CrfParams& params,
                    std::size_t oracle_limit_pixels = 64 * 64);

MarginalField initial_field(const UnaryEnergies& unary);

MarginalField meanfield_step(const MarginalField& q, const ImageGrid& image, const UnaryEnergies& unary,
                             const CrfParams& params, const MeanFieldOptions& opts = {});

/// Unary-softmax initialization, `steps` mean-field updates, per-pixel
/// argmax with ties going to foreground.
BinaryMask infer(const ImageGrid& image, const ProbMap& p, const CrfParams& params,
                 const MeanFieldOptions& opts = {});

}  // namespace dsal
