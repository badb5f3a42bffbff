#include "dsal/segmenter.hpp"

#include "dsal/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dsal {

namespace {

constexpr double kProbEps = 1e-8;
constexpr double kDiceSmooth = 1.0;

struct LayerShape {
    const char* name;
    int out;
    int in;
    int k;
};

constexpr LayerShape kConvLayers[] = {
    {"enc1", 8, 1, 3}, {"enc2", 16, 8, 3}, {"enc3", 32, 16, 3}, {"dec2", 16, 48, 3}, {"dec1", 8, 24, 3},
    {"head_lower", 1, 32, 1}, {"head_middle", 1, 16, 1}, {"head_final", 1, 8, 1},
};

std::vector<TensorSpec> build_layout() {
    std::vector<TensorSpec> specs;
    std::size_t offset = 0;
    for (const auto& l : kConvLayers) {
        TensorSpec w{std::string(l.name) + ".weight", {}, offset, 0};
        w.shape = l.k == 1 ? std::vector<int>{l.out, l.in} : std::vector<int>{l.out, l.in, l.k, l.k};
        w.count = static_cast<std::size_t>(l.out) * l.in * l.k * l.k;
        offset += w.count;
        TensorSpec b{std::string(l.name) + ".bias", {l.out}, offset, static_cast<std::size_t>(l.out)};
        offset += b.count;
        specs.push_back(std::move(w));
        specs.push_back(std::move(b));
    }
    return specs;
}

/// Channel-major feature map.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}

    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    double* ch(int k) { return v.data() + k * plane(); }
    const double* ch(int k) const { return v.data() + k * plane(); }
};

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct ConvView {
    std::span<const double> w;
    std::span<const double> b;
};

struct ConvGrad {
    std::span<double> w;
    std::span<double> b;
};

ConvView conv_view(const SegmenterParams& p, std::string_view layer) {
    const std::string n(layer);
    return {p.tensor(n + ".weight"), p.tensor(n + ".bias")};
}

ConvGrad conv_grad(SegmenterParams& g, std::string_view layer) {
    const std::string n(layer);
    return {g.tensor(n + ".weight"), g.tensor(n + ".bias")};
}

// 3x3 convolution, stride 1, zero padding 1, optional ReLU.
Tensor conv3x3(const Tensor& in, ConvView p, int out_channels, bool relu) {
    Tensor out(out_channels, in.h, in.w);
    const int H = in.h, W = in.w;
    for (int o = 0; o < out_channels; ++o) {
        double* dst0 = out.ch(o);
        std::fill(dst0, dst0 + out.plane(), p.b[o]);
        for (int i = 0; i < in.c; ++i) {
            const double* src0 = in.ch(i);
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    const double wv = p.w[((o * in.c + i) * 3 + ky) * 3 + kx];
                    for (int y = y0; y < y1; ++y) {
                        double* dst = dst0 + y * W;
                        const double* src = src0 + (y + dy) * W + dx;
                        for (int x = x0; x < x1; ++x) dst[x] += wv * src[x];
                    }
                }
            }
        }
        if (relu)
            for (std::size_t k = 0; k < out.plane(); ++k) dst0[k] = std::max(0.0, dst0[k]);
    }
    return out;
}

// Accumulates weight/bias gradients; returns the input gradient when asked.
Tensor conv3x3_backward(const Tensor& in, ConvView p, const Tensor& dout, ConvGrad g, bool need_input_grad) {
    const int H = in.h, W = in.w;
    Tensor din;
    if (need_input_grad) din = Tensor(in.c, H, W);
    for (int o = 0; o < dout.c; ++o) {
        const double* d0 = dout.ch(o);
        g.b[o] += std::accumulate(d0, d0 + dout.plane(), 0.0);
        for (int i = 0; i < in.c; ++i) {
            const double* src0 = in.ch(i);
            double* di0 = need_input_grad ? din.ch(i) : nullptr;
            for (int ky = 0; ky < 3; ++ky) {
                const int dy = ky - 1;
                const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                for (int kx = 0; kx < 3; ++kx) {
                    const int dx = kx - 1;
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    const std::size_t widx = static_cast<std::size_t>(((o * in.c + i) * 3 + ky) * 3 + kx);
                    const double wv = p.w[widx];
                    double acc = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const double* d = d0 + y * W;
                        const double* src = src0 + (y + dy) * W + dx;
                        for (int x = x0; x < x1; ++x) acc += d[x] * src[x];
                        if (di0) {
                            double* di = di0 + (y + dy) * W + dx;
                            for (int x = x0; x < x1; ++x) di[x] += wv * d[x];
                        }
                    }
                    g.w[widx] += acc;
                }
            }
        }
    }
    return din;
}

void relu_backward(Tensor& grad, const Tensor& activation) {
    for (std::size_t k = 0; k < grad.v.size(); ++k)
        if (activation.v[k] <= 0.0) grad.v[k] = 0.0;
}

struct Pooled {
    Tensor out;
    std::vector<std::uint8_t> argmax;
};

Pooled maxpool2(const Tensor& in) {
    Pooled r{Tensor(in.c, in.h / 2, in.w / 2), {}};
    r.argmax.resize(r.out.v.size());
    std::size_t k = 0;
    for (int c = 0; c < in.c; ++c) {
        const double* src = in.ch(c);
        for (int y = 0; y < r.out.h; ++y) {
            for (int x = 0; x < r.out.w; ++x, ++k) {
                const double* a = src + (2 * y) * in.w + 2 * x;
                const double cand[4] = {a[0], a[1], a[in.w], a[in.w + 1]};
                std::uint8_t best = 0;
                for (std::uint8_t q = 1; q < 4; ++q)
                    if (cand[q] > cand[best]) best = q;
                r.out.v[k] = cand[best];
                r.argmax[k] = best;
            }
        }
    }
    return r;
}

Tensor maxpool2_backward(const Pooled& pooled, const Tensor& dout, int in_h, int in_w) {
    Tensor din(dout.c, in_h, in_w);
    std::size_t k = 0;
    for (int c = 0; c < dout.c; ++c) {
        double* d = din.ch(c);
        for (int y = 0; y < dout.h; ++y) {
            for (int x = 0; x < dout.w; ++x, ++k) {
                const int q = pooled.argmax[k];
                d[(2 * y + (q >> 1)) * in_w + 2 * x + (q & 1)] += dout.v[k];
            }
        }
    }
    return din;
}

// Nearest-neighbor x2 upsample of `low`, stacked on top of `skip`.
Tensor upsample_concat(const Tensor& low, const Tensor& skip) {
    Tensor out(low.c + skip.c, skip.h, skip.w);
    for (int c = 0; c < low.c; ++c) {
        const double* src = low.ch(c);
        double* dst = out.ch(c);
        for (int y = 0; y < skip.h; ++y)
            for (int x = 0; x < skip.w; ++x) dst[y * skip.w + x] = src[(y / 2) * low.w + x / 2];
    }
    std::copy(skip.v.begin(), skip.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(low.c * out.plane()));
    return out;
}

// Splits the gradient of upsample_concat into (low-resolution part, skip part).
std::pair<Tensor, Tensor> upsample_concat_backward(const Tensor& dcat, int low_c, int low_h, int low_w) {
    Tensor dlow(low_c, low_h, low_w);
    Tensor dskip(dcat.c - low_c, dcat.h, dcat.w);
    for (int c = 0; c < low_c; ++c) {
        const double* src = dcat.ch(c);
        double* dst = dlow.ch(c);
        for (int y = 0; y < dcat.h; ++y)
            for (int x = 0; x < dcat.w; ++x) dst[(y / 2) * low_w + x / 2] += src[y * dcat.w + x];
    }
    std::copy(dcat.v.begin() + static_cast<std::ptrdiff_t>(low_c * dcat.plane()), dcat.v.end(), dskip.v.begin());
    return {std::move(dlow), std::move(dskip)};
}

// 1x1 convolution to a single logit map.
std::vector<double> head_logits(const Tensor& f, ConvView p) {
    std::vector<double> z(f.plane(), p.b[0]);
    for (int c = 0; c < f.c; ++c) {
        const double wv = p.w[c];
        const double* src = f.ch(c);
        for (std::size_t k = 0; k < z.size(); ++k) z[k] += wv * src[k];
    }
    return z;
}

void head_backward(const Tensor& f, ConvView p, std::span<const double> dz, ConvGrad g, Tensor& df) {
    g.b[0] += std::accumulate(dz.begin(), dz.end(), 0.0);
    for (int c = 0; c < f.c; ++c) {
        const double* src = f.ch(c);
        double* d = df.ch(c);
        double acc = 0.0;
        for (std::size_t k = 0; k < dz.size(); ++k) {
            acc += dz[k] * src[k];
            d[k] += p.w[c] * dz[k];
        }
        g.w[c] += acc;
    }
}

// Sigmoid of a low-resolution logit map, replicated `factor` times per axis.
ProbMap upsampled_probs(const std::vector<double>& z, int low_h, int low_w, int factor) {
    const int H = low_h * factor, W = low_w * factor;
    std::vector<double> p(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) p[static_cast<std::size_t>(y) * W + x] = sigmoid(z[(y / factor) * low_w + x / factor]);
    return ProbMap(H, W, std::move(p));
}

struct Activations {
    Tensor input;
    Tensor a1;
    Pooled p1;
    Tensor a2;
    Pooled p2;
    Tensor a3;
    Tensor cat2;
    Tensor d2;
    Tensor cat1;
    Tensor d1;
    std::vector<double> z_lower, z_middle, z_final;
    MultiHeadPrediction pred;
};

void check_aligned(const ImageGrid& image) {
    if (image.height() % 4 != 0 || image.width() % 4 != 0)
        throw Error("segmenter input " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                    " is not a multiple of 4; pad the image first (pad_to_multiple)");
}

Activations run_forward(const SegmenterParams& params, const ImageGrid& image) {
    check_aligned(image);
    Activations a;
    const int H = image.height(), W = image.width();
    a.input = Tensor(1, H, W);
    std::copy(image.values().begin(), image.values().end(), a.input.v.begin());

    a.a1 = conv3x3(a.input, conv_view(params, "enc1"), 8, true);
    a.p1 = maxpool2(a.a1);
    a.a2 = conv3x3(a.p1.out, conv_view(params, "enc2"), 16, true);
    a.p2 = maxpool2(a.a2);
    a.a3 = conv3x3(a.p2.out, conv_view(params, "enc3"), 32, true);
    a.cat2 = upsample_concat(a.a3, a.a2);
    a.d2 = conv3x3(a.cat2, conv_view(params, "dec2"), 16, true);
    a.cat1 = upsample_concat(a.d2, a.a1);
    a.d1 = conv3x3(a.cat1, conv_view(params, "dec1"), 8, true);

    a.z_lower = head_logits(a.a3, conv_view(params, "head_lower"));
    a.z_middle = head_logits(a.d2, conv_view(params, "head_middle"));
    a.z_final = head_logits(a.d1, conv_view(params, "head_final"));
    a.pred.lower = upsampled_probs(a.z_lower, a.a3.h, a.a3.w, 4);
    a.pred.middle = upsampled_probs(a.z_middle, a.d2.h, a.d2.w, 2);
    a.pred.final = upsampled_probs(a.z_final, a.d1.h, a.d1.w, 1);
    return a;
}

void check_same(const ProbMap& p, const BinaryMask& t, const char* what) {
    if (!p.same_shape(t))
        throw Error(std::string(what) + ": dimension mismatch between prediction and target");
}

// dLoss/dp per full-resolution pixel.
std::vector<double> loss_grad_wrt_prob(const ProbMap& p, const BinaryMask& t, LossKind kind) {
    const std::size_t n = p.size();
    std::vector<double> g(n);
    if (kind == LossKind::cross_entropy) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double pk = p[k];
            if (pk < kProbEps || pk > 1.0 - kProbEps) {
                g[k] = 0.0;
                continue;
            }
            g[k] = (t[k] ? -1.0 / pk : 1.0 / (1.0 - pk)) * inv_n;
        }
    } else {
        double inter = 0.0, sp = 0.0, st = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            inter += p[k] * t[k];
            sp += p[k];
            st += t[k];
        }
        const double num = 2.0 * inter + kDiceSmooth;
        const double den = sp + st + kDiceSmooth;
        for (std::size_t k = 0; k < n; ++k) g[k] = -(2.0 * t[k] * den - num) / (den * den);
    }
    return g;
}

// Chains dLoss/dp through the sigmoid and the nearest upsampling.
std::vector<double> logit_grad(const ProbMap& p, const BinaryMask& t, LossKind kind, double alpha, int low_h,
                               int low_w, int factor) {
    std::vector<double> dz(static_cast<std::size_t>(low_h) * low_w, 0.0);
    if (alpha == 0.0) return dz;
    const auto dp = loss_grad_wrt_prob(p, t, kind);
    const int W = p.width();
    for (int y = 0; y < p.height(); ++y) {
        for (int x = 0; x < W; ++x) {
            const std::size_t k = static_cast<std::size_t>(y) * W + x;
            const double pk = p[k];
            dz[(y / factor) * low_w + x / factor] += alpha * dp[k] * pk * (1.0 - pk);
        }
    }
    return dz;
}

void add_into(Tensor& dst, const Tensor& src) {
    for (std::size_t k = 0; k < dst.v.size(); ++k) dst.v[k] += src.v[k];
}

}  // namespace

void LossWeights::validate() const {
    if (!(lower >= 0.0 && middle >= 0.0 && final >= 0.0))
        throw Error("loss weights must be nonnegative");
    if (std::abs(lower + middle + final - 1.0) > 1e-12)
        throw Error("loss weights must sum to 1, got " + std::to_string(lower + middle + final));
}

std::string_view to_string(LossKind k) noexcept {
    return k == LossKind::cross_entropy ? "cross_entropy" : "soft_dice";
}

std::string_view to_string(OptimizerKind k) noexcept { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

LossKind parse_loss_kind(std::string_view s) {
    if (s == "cross_entropy") return LossKind::cross_entropy;
    if (s == "soft_dice") return LossKind::soft_dice;
    throw Error("unknown loss kind '" + std::string(s) + "' (expected cross_entropy or soft_dice)");
}

OptimizerKind parse_optimizer_kind(std::string_view s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw Error("unknown optimizer '" + std::string(s) + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
    if (epochs < 0) throw Error("train.epochs must be nonnegative");
    if (!(learning_rate > 0.0)) throw Error("train.learning_rate must be positive");
    if (batch_size < 1) throw Error("train.batch_size must be positive");
    weights.validate();
}

SegmenterParams::SegmenterParams() : values_(parameter_count(), 0.0) {}

const std::vector<TensorSpec>& SegmenterParams::layout() {
    static const std::vector<TensorSpec> specs = build_layout();
    return specs;
}

std::size_t SegmenterParams::parameter_count() {
    const auto& l = layout();
    return l.back().offset + l.back().count;
}

const TensorSpec& SegmenterParams::spec(std::string_view name) {
    for (const auto& s : layout())
        if (s.name == name) return s;
    throw Error("unknown parameter tensor '" + std::string(name) + "'");
}

std::span<double> SegmenterParams::tensor(std::string_view name) {
    const auto& s = spec(name);
    return std::span<double>(values_).subspan(s.offset, s.count);
}

std::span<const double> SegmenterParams::tensor(std::string_view name) const {
    const auto& s = spec(name);
    return std::span<const double>(values_).subspan(s.offset, s.count);
}

bool SegmenterParams::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

SegmenterParams init_params(std::uint64_t seed) {
    SegmenterParams p;
    Rng rng(seed);
    for (const auto& s : SegmenterParams::layout()) {
        if (s.shape.size() == 1) continue;  // bias
        int fan_in = 1;
        for (std::size_t d = 1; d < s.shape.size(); ++d) fan_in *= s.shape[d];
        const double bound = std::sqrt(6.0 / fan_in);
        for (double& v : p.tensor(s.name)) v = rng.uniform(-bound, bound);
    }
    return p;
}

MultiHeadPrediction forward(const SegmenterParams& params, const ImageGrid& image) {
    return std::move(run_forward(params, image).pred);
}

double head_loss(const ProbMap& p, const BinaryMask& target) {
    check_same(p, target, "head_loss");
    double sum = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double pk = std::clamp(p[k], kProbEps, 1.0 - kProbEps);
        sum -= target[k] ? std::log(pk) : std::log(1.0 - pk);
    }
    return sum / static_cast<double>(p.size());
}

double soft_dice_loss(const ProbMap& p, const BinaryMask& target) {
    check_same(p, target, "soft_dice_loss");
    double inter = 0.0, sp = 0.0, st = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        inter += p[k] * target[k];
        sp += p[k];
        st += target[k];
    }
    return 1.0 - (2.0 * inter + kDiceSmooth) / (sp + st + kDiceSmooth);
}

double total_loss(const MultiHeadPrediction& pred, const BinaryMask& target, const LossWeights& weights,
                  LossKind kind) {
    weights.validate();
    const auto loss = kind == LossKind::cross_entropy ? head_loss : soft_dice_loss;
    return weights.lower * loss(pred.lower, target) + weights.middle * loss(pred.middle, target) +
           weights.final * loss(pred.final, target);
}

LossGradient backward(const SegmenterParams& params, const ImageGrid& image, const BinaryMask& target,
                      const LossWeights& weights, LossKind kind) {
    weights.validate();
    if (!image.same_shape(target)) throw Error("backward: target dimensions differ from image");
    const Activations a = run_forward(params, image);
    LossGradient out;
    out.loss = total_loss(a.pred, target, weights, kind);
    SegmenterParams& g = out.gradient;

    const auto gl = logit_grad(a.pred.lower, target, kind, weights.lower, a.a3.h, a.a3.w, 4);
    const auto gm = logit_grad(a.pred.middle, target, kind, weights.middle, a.d2.h, a.d2.w, 2);
    const auto gf = logit_grad(a.pred.final, target, kind, weights.final, a.d1.h, a.d1.w, 1);

    // final head -> dec1
    Tensor dd1(a.d1.c, a.d1.h, a.d1.w);
    head_backward(a.d1, conv_view(params, "head_final"), gf, conv_grad(g, "head_final"), dd1);
    relu_backward(dd1, a.d1);
    const Tensor dcat1 = conv3x3_backward(a.cat1, conv_view(params, "dec1"), dd1, conv_grad(g, "dec1"), true);
    auto [dd2, da1_skip] = upsample_concat_backward(dcat1, a.d2.c, a.d2.h, a.d2.w);

    // middle head joins at dec2
    head_backward(a.d2, conv_view(params, "head_middle"), gm, conv_grad(g, "head_middle"), dd2);
    relu_backward(dd2, a.d2);
    const Tensor dcat2 = conv3x3_backward(a.cat2, conv_view(params, "dec2"), dd2, conv_grad(g, "dec2"), true);
    auto [da3, da2_skip] = upsample_concat_backward(dcat2, a.a3.c, a.a3.h, a.a3.w);

    // lower head joins at the bottleneck
    head_backward(a.a3, conv_view(params, "head_lower"), gl, conv_grad(g, "head_lower"), da3);
    relu_backward(da3, a.a3);
    const Tensor dp2 = conv3x3_backward(a.p2.out, conv_view(params, "enc3"), da3, conv_grad(g, "enc3"), true);

    Tensor da2 = maxpool2_backward(a.p2, dp2, a.a2.h, a.a2.w);
    add_into(da2, da2_skip);
    relu_backward(da2, a.a2);
    const Tensor dp1 = conv3x3_backward(a.p1.out, conv_view(params, "enc2"), da2, conv_grad(g, "enc2"), true);

    Tensor da1 = maxpool2_backward(a.p1, dp1, a.a1.h, a.a1.w);
    add_into(da1, da1_skip);
    relu_backward(da1, a.a1);
    conv3x3_backward(a.input, conv_view(params, "enc1"), da1, conv_grad(g, "enc1"), false);
    return out;
}

SegmenterParams train(SegmenterParams params, std::span<const TrainingExample> examples, const TrainConfig& cfg) {
    cfg.validate();
    if (examples.empty()) throw Error("train: labeled set is empty");
    for (const auto& ex : examples) {
        if (!ex.image || !ex.target) throw Error("train: null example");
        check_aligned(*ex.image);
    }
    if (cfg.epochs == 0) return params;

    const std::size_t n = params.values().size();
    std::vector<double> m1, m2;
    if (cfg.optimizer == OptimizerKind::adam) {
        m1.assign(n, 0.0);
        m2.assign(n, 0.0);
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long step = 0;

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> batch_grad(n);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
            for (std::size_t b = start; b < stop; ++b) {
                const auto& ex = examples[order[b]];
                const auto lg = backward(params, *ex.image, *ex.target, cfg.weights, cfg.loss);
                const auto gv = lg.gradient.values();
                for (std::size_t k = 0; k < n; ++k) batch_grad[k] += gv[k];
            }
            const double scale = 1.0 / static_cast<double>(stop - start);
            auto pv = params.values();
            if (cfg.optimizer == OptimizerKind::sgd) {
                for (std::size_t k = 0; k < n; ++k) pv[k] -= cfg.learning_rate * scale * batch_grad[k];
            } else {
                ++step;
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
                for (std::size_t k = 0; k < n; ++k) {
                    const double gk = scale * batch_grad[k];
                    m1[k] = beta1 * m1[k] + (1.0 - beta1) * gk;
                    m2[k] = beta2 * m2[k] + (1.0 - beta2) * gk * gk;
                    pv[k] -= cfg.learning_rate * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + adam_eps);
                }
            }
        }
    }
    return params;
}

double dataset_loss(const SegmenterParams& params, std::span<const TrainingExample> examples,
                    const LossWeights& weights, LossKind kind) {
    if (examples.empty()) throw Error("dataset_loss: no examples");
    double sum = 0.0;
    for (const auto& ex : examples) sum += total_loss(forward(params, *ex.image), *ex.target, weights, kind);
    return sum / static_cast<double>(examples.size());
}

namespace {

template <typename T>
std::vector<T> pad_values(std::span<const T> v, int h, int w, int ph, int pw) {
    std::vector<T> out(static_cast<std::size_t>(ph) * pw);
    for (int y = 0; y < ph; ++y) {
        const int sy = std::min(y, h - 1);
        for (int x = 0; x < pw; ++x) out[static_cast<std::size_t>(y) * pw + x] = v[static_cast<std::size_t>(sy) * w + std::min(x, w - 1)];
    }
    return out;
}

int round_up(int v, int multiple) { return (v + multiple - 1) / multiple * multiple; }

}  // namespace

ImageGrid pad_to_multiple(const ImageGrid& image, int multiple) {
    const int ph = round_up(image.height(), multiple), pw = round_up(image.width(), multiple);
    if (ph == image.height() && pw == image.width()) return image;
    return ImageGrid(ph, pw, pad_values(image.values(), image.height(), image.width(), ph, pw));
}

BinaryMask pad_to_multiple(const BinaryMask& mask, int multiple) {
    const int ph = round_up(mask.height(), multiple), pw = round_up(mask.width(), multiple);
    if (ph == mask.height() && pw == mask.width()) return mask;
    return BinaryMask(ph, pw, pad_values(mask.values(), mask.height(), mask.width(), ph, pw));
}

ProbMap crop(const ProbMap& p, int height, int width) {
    if (height > p.height() || width > p.width()) throw Error("crop: target larger than map");
    if (height == p.height() && width == p.width()) return p;
    std::vector<double> out(static_cast<std::size_t>(height) * width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) out[static_cast<std::size_t>(y) * width + x] = p.at(y, x);
    return ProbMap(height, width, std::move(out));
}

MultiHeadPrediction predict(const SegmenterParams& params, const ImageGrid& image) {
    const ImageGrid padded = pad_to_multiple(image, 4);
    if (padded.same_shape(image)) return forward(params, image);
    auto pred = forward(params, padded);
    const int h = image.height(), w = image.width();
    return {crop(pred.lower, h, w), crop(pred.middle, h, w), crop(pred.final, h, w)};
}

MultiHeadPrediction DeepSupervisedNet::predict(const ImageGrid& image) const { return dsal::predict(params_, image); }

void DeepSupervisedNet::fit(std::span<const LabeledEntry> labeled, const TrainConfig& cfg) {
    std::vector<ImageGrid> images;
    std::vector<BinaryMask> masks;
    images.reserve(labeled.size());
    masks.reserve(labeled.size());
    for (const auto& e : labeled) {
        images.push_back(pad_to_multiple(e.sample.image(), 4));
        masks.push_back(pad_to_multiple(e.mask, 4));
    }
    std::vector<TrainingExample> examples(labeled.size());
    for (std::size_t k = 0; k < labeled.size(); ++k) examples[k] = {&images[k], &masks[k]};
    params_ = train(std::move(params_), examples, cfg);
}

std::unique_ptr<MultiHeadSegmenter> DeepSupervisedNet::clone() const {
    return std::make_unique<DeepSupervisedNet>(*this);
}

}  // namespace dsal
