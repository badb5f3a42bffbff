#include "dsal/crf.hpp"

#include "dsal/csv.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dsal {

namespace {

constexpr double kUnaryEps = 1e-8;

void check_inputs(const ImageGrid& image, const UnaryEnergies& unary) {
    if (image.height() != unary.height || image.width() != unary.width)
        throw Error("crf: image and unary dimensions differ");
}

// sum_{j != i} K(i,j) * v_j for the two labels at once,
// K = gaussian_compat * k_gaussian + bilateral_compat * k_bilateral.
class PairwiseMessages {
public:
    PairwiseMessages(const ImageGrid& image, const CrfParams& params, const MeanFieldOptions& opts)
        : image_(image), params_(params), opts_(opts) {
        if (opts_.mode == MessagePassing::truncated) prepare_truncated();
    }

    void apply(const std::vector<double>& q_fg, const std::vector<double>& q_bg, std::vector<double>& m_fg,
               std::vector<double>& m_bg) const {
        if (opts_.mode == MessagePassing::exact)
            apply_exact(q_fg, q_bg, m_fg, m_bg);
        else
            apply_truncated(q_fg, q_bg, m_fg, m_bg);
    }

private:
    void apply_exact(const std::vector<double>& q_fg, const std::vector<double>& q_bg, std::vector<double>& m_fg,
                     std::vector<double>& m_bg) const {
        const int H = image_.height(), W = image_.width();
        const std::size_t n = image_.size();
        m_fg.assign(n, 0.0);
        m_bg.assign(n, 0.0);
        for (int yi = 0; yi < H; ++yi) {
            for (int xi = 0; xi < W; ++xi) {
                const std::size_t i = static_cast<std::size_t>(yi) * W + xi;
                double sf = 0.0, sb = 0.0;
                for (int yj = 0; yj < H; ++yj) {
                    for (int xj = 0; xj < W; ++xj) {
                        const std::size_t j = static_cast<std::size_t>(yj) * W + xj;
                        if (j == i) continue;
                        const double dy = yi - yj, dx = xi - xj;
                        const double k =
                            params_.gaussian_compat * gaussian_kernel(dy, dx, params_.gaussian_sdims) +
                            params_.bilateral_compat * bilateral_kernel(dy, dx, image_[i] - image_[j],
                                                                        params_.bilateral_sdims,
                                                                        params_.bilateral_schan);
                        sf += k * q_fg[j];
                        sb += k * q_bg[j];
                    }
                }
                m_fg[i] = sf;
                m_bg[i] = sb;
            }
        }
    }

    int radius(double sdims) const {
        const int cap = std::max(image_.height(), image_.width()) - 1;
        return std::min(cap, static_cast<int>(std::ceil(opts_.window_sigmas * sdims)));
    }

    void prepare_truncated() {
        const int H = image_.height(), W = image_.width();
        rg_ = radius(params_.gaussian_sdims);
        gauss1d_.resize(2 * rg_ + 1);
        const double ig = 1.0 / (2.0 * params_.gaussian_sdims * params_.gaussian_sdims);
        for (int d = -rg_; d <= rg_; ++d) gauss1d_[d + rg_] = std::exp(-d * d * ig);

        rb_ = radius(params_.bilateral_sdims);
        const int span = 2 * rb_ + 1;
        bilateral_.assign(image_.size() * span * span, 0.0);
        if (params_.bilateral_compat == 0.0) return;
        const double is = 1.0 / (2.0 * params_.bilateral_sdims * params_.bilateral_sdims);
        const double ic = 1.0 / (2.0 * params_.bilateral_schan * params_.bilateral_schan);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * W + x;
                double* row = bilateral_.data() + i * span * span;
                for (int dy = -rb_; dy <= rb_; ++dy) {
                    const int yj = y + dy;
                    if (yj < 0 || yj >= H) continue;
                    for (int dx = -rb_; dx <= rb_; ++dx) {
                        const int xj = x + dx;
                        if (xj < 0 || xj >= W || (dy == 0 && dx == 0)) continue;
                        const double di = image_[i] - image_.at(yj, xj);
                        row[(dy + rb_) * span + dx + rb_] = std::exp(-(dy * dy + dx * dx) * is - di * di * ic);
                    }
                }
            }
        }
    }

    // Separable Gaussian over the square window, then the self term removed.
    std::vector<double> gaussian_filter(const std::vector<double>& v) const {
        const int H = image_.height(), W = image_.width();
        std::vector<double> tmp(v.size(), 0.0), out(v.size(), 0.0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double s = 0.0;
                for (int d = std::max(-rg_, -x); d <= std::min(rg_, W - 1 - x); ++d)
                    s += gauss1d_[d + rg_] * v[static_cast<std::size_t>(y) * W + x + d];
                tmp[static_cast<std::size_t>(y) * W + x] = s;
            }
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double s = 0.0;
                for (int d = std::max(-rg_, -y); d <= std::min(rg_, H - 1 - y); ++d)
                    s += gauss1d_[d + rg_] * tmp[static_cast<std::size_t>(y + d) * W + x];
                out[static_cast<std::size_t>(y) * W + x] = s - v[static_cast<std::size_t>(y) * W + x];
            }
        return out;
    }

    void apply_truncated(const std::vector<double>& q_fg, const std::vector<double>& q_bg, std::vector<double>& m_fg,
                         std::vector<double>& m_bg) const {
        const int H = image_.height(), W = image_.width();
        const std::size_t n = image_.size();
        m_fg.assign(n, 0.0);
        m_bg.assign(n, 0.0);
        if (params_.gaussian_compat != 0.0) {
            const auto gf = gaussian_filter(q_fg);
            const auto gb = gaussian_filter(q_bg);
            for (std::size_t i = 0; i < n; ++i) {
                m_fg[i] += params_.gaussian_compat * gf[i];
                m_bg[i] += params_.gaussian_compat * gb[i];
            }
        }
        if (params_.bilateral_compat != 0.0) {
            const int span = 2 * rb_ + 1;
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * W + x;
                    const double* row = bilateral_.data() + i * span * span;
                    double sf = 0.0, sb = 0.0;
                    for (int dy = std::max(-rb_, -y); dy <= std::min(rb_, H - 1 - y); ++dy) {
                        const double* wr = row + (dy + rb_) * span + rb_;
                        const std::size_t base = static_cast<std::size_t>(y + dy) * W + x;
                        for (int dx = std::max(-rb_, -x); dx <= std::min(rb_, W - 1 - x); ++dx) {
                            sf += wr[dx] * q_fg[base + dx];
                            sb += wr[dx] * q_bg[base + dx];
                        }
                    }
                    m_fg[i] += params_.bilateral_compat * sf;
                    m_bg[i] += params_.bilateral_compat * sb;
                }
            }
        }
    }

    const ImageGrid& image_;
    CrfParams params_;
    MeanFieldOptions opts_;
    int rg_ = 0;
    int rb_ = 0;
    std::vector<double> gauss1d_;
    std::vector<double> bilateral_;
};

struct Energies {
    std::vector<double> foreground;
    std::vector<double> background;
};

Energies label_energies(const MarginalField& q, const UnaryEnergies& unary, const PairwiseMessages& messages) {
    std::vector<double> m_fg, m_bg;
    messages.apply(q.foreground, q.background, m_fg, m_bg);
    Energies e{unary.foreground, unary.background};
    // Potts: choosing label l pays for the mass on the other label.
    for (std::size_t i = 0; i < e.foreground.size(); ++i) {
        e.foreground[i] += m_bg[i];
        e.background[i] += m_fg[i];
    }
    return e;
}

MarginalField softmax_field(int height, int width, const std::vector<double>& e_fg, const std::vector<double>& e_bg) {
    MarginalField q{height, width, std::vector<double>(e_fg.size()), std::vector<double>(e_fg.size())};
    for (std::size_t i = 0; i < e_fg.size(); ++i) {
        const double d = e_fg[i] - e_bg[i];  // Q_fg = 1 / (1 + exp(d))
        if (d >= 0.0) {
            const double t = std::exp(-d);
            q.foreground[i] = t / (1.0 + t);
            q.background[i] = 1.0 / (1.0 + t);
        } else {
            const double t = std::exp(d);
            q.foreground[i] = 1.0 / (1.0 + t);
            q.background[i] = t / (1.0 + t);
        }
    }
    return q;
}

}  // namespace

void CrfParams::validate() const {
    auto positive = [](double v, const char* what) {
        if (!(v > 0.0) || !std::isfinite(v)) throw Error(std::string("crf: ") + what + " must be positive");
    };
    auto nonnegative = [](double v, const char* what) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw Error(std::string("crf: ") + what + " must be nonnegative");
    };
    positive(gaussian_sdims, "gaussian.sdims");
    nonnegative(gaussian_compat, "gaussian.compat");
    positive(bilateral_sdims, "bilateral.sdims");
    positive(bilateral_schan, "bilateral.schan");
    nonnegative(bilateral_compat, "bilateral.compat");
    if (steps < 1) throw Error("crf: steps must be at least 1");
}

CrfParams CrfParams::isic_center() { return {29.93, 9.06, 28.19, 5.59, 9.46, 2}; }

CrfParams CrfParams::rsna_center() { return {1.0, 6.0, 1.0, 7.0, 4.0, 1}; }

CrfParams CrfParams::desk_center() { return {1.0, 2.0, 2.0, 0.2, 1.0, 2}; }

std::string to_key_values(const CrfParams& p, std::string_view prefix) {
    std::ostringstream os;
    const std::string pre(prefix);
    os << pre << "gaussian.sdims=" << fmt_exact(p.gaussian_sdims) << '\n';
    os << pre << "gaussian.compat=" << fmt_exact(p.gaussian_compat) << '\n';
    os << pre << "bilateral.sdims=" << fmt_exact(p.bilateral_sdims) << '\n';
    os << pre << "bilateral.schan=" << fmt_exact(p.bilateral_schan) << '\n';
    os << pre << "bilateral.compat=" << fmt_exact(p.bilateral_compat) << '\n';
    os << pre << "steps=" << p.steps << '\n';
    return os.str();
}

CrfParams crf_params_from(const KeyValues& kv, std::string_view prefix) {
    const std::string pre(prefix);
    CrfParams p;
    p.gaussian_sdims = kv.get_real(pre + "gaussian.sdims");
    p.gaussian_compat = kv.get_real(pre + "gaussian.compat");
    p.bilateral_sdims = kv.get_real(pre + "bilateral.sdims");
    p.bilateral_schan = kv.get_real(pre + "bilateral.schan");
    p.bilateral_compat = kv.get_real(pre + "bilateral.compat");
    p.steps = static_cast<int>(kv.get_int(pre + "steps"));
    p.validate();
    return p;
}

UnaryEnergies unary_from_prob(const ProbMap& p) {
    UnaryEnergies u{p.height(), p.width(), std::vector<double>(p.size()), std::vector<double>(p.size())};
    for (std::size_t i = 0; i < p.size(); ++i) {
        u.foreground[i] = -std::log(std::clamp(p[i], kUnaryEps, 1.0 - kUnaryEps));
        u.background[i] = -std::log(std::clamp(1.0 - p[i], kUnaryEps, 1.0 - kUnaryEps));
    }
    return u;
}

double gaussian_kernel(double dy, double dx, double sdims) {
    return std::exp(-(dy * dy + dx * dx) / (2.0 * sdims * sdims));
}

double bilateral_kernel(double dy, double dx, double dintensity, double sdims, double schan) {
    return std::exp(-(dy * dy + dx * dx) / (2.0 * sdims * sdims) - dintensity * dintensity / (2.0 * schan * schan));
}

double gibbs_energy(const BinaryMask& y, const ImageGrid& image, const ProbMap& p, const CrfParams& params,
                    std::size_t oracle_limit_pixels) {
    params.validate();
    if (!y.same_shape(image) || !p.same_shape(image)) throw Error("gibbs_energy: dimension mismatch");
    if (image.size() > oracle_limit_pixels)
        throw Error("gibbs_energy: " + std::to_string(image.size()) + " pixels exceeds the oracle limit of " +
                    std::to_string(oracle_limit_pixels));
    const auto u = unary_from_prob(p);
    const int W = image.width();
    double e = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) e += y[i] ? u.foreground[i] : u.background[i];
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t j = i + 1; j < y.size(); ++j) {
            if (y[i] == y[j]) continue;
            const double dy = static_cast<double>(i / W) - static_cast<double>(j / W);
            const double dx = static_cast<double>(i % W) - static_cast<double>(j % W);
            e += params.gaussian_compat * gaussian_kernel(dy, dx, params.gaussian_sdims) +
                 params.bilateral_compat *
                     bilateral_kernel(dy, dx, image[i] - image[j], params.bilateral_sdims, params.bilateral_schan);
        }
    }
    return e;
}

MarginalField initial_field(const UnaryEnergies& unary) {
    return softmax_field(unary.height, unary.width, unary.foreground, unary.background);
}

MarginalField meanfield_step(const MarginalField& q, const ImageGrid& image, const UnaryEnergies& unary,
                             const CrfParams& params, const MeanFieldOptions& opts) {
    params.validate();
    check_inputs(image, unary);
    if (q.height != unary.height || q.width != unary.width) throw Error("meanfield_step: field dimensions differ");
    const PairwiseMessages messages(image, params, opts);
    const auto e = label_energies(q, unary, messages);
    return softmax_field(q.height, q.width, e.foreground, e.background);
}

BinaryMask infer(const ImageGrid& image, const ProbMap& p, const CrfParams& params, const MeanFieldOptions& opts) {
    params.validate();
    if (!image.same_shape(p)) throw Error("crf infer: image and probability map dimensions differ");
    const auto unary = unary_from_prob(p);
    const PairwiseMessages messages(image, params, opts);
    MarginalField q = initial_field(unary);
    Energies e{unary.foreground, unary.background};
    for (int s = 0; s < params.steps; ++s) {
        e = label_energies(q, unary, messages);
        q = softmax_field(q.height, q.width, e.foreground, e.background);
    }
    std::vector<std::uint8_t> labels(p.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = e.foreground[i] <= e.background[i] ? 1 : 0;
    return BinaryMask(p.height(), p.width(), std::move(labels));
}

}  // namespace dsal
