#include "helpers.hpp"

#include "dsal/crf.hpp"

#include <doctest.h>

#include <cmath>

using namespace dsal;
using testing::mask_from;

namespace {

// Straight transcription of the update for the Potts energy:
//   E_l(i) = psi_l(i) + sum_{j != i} k(i,j) * Q_j(not l),  Q_i(l) ∝ exp(-E_l(i)).
struct RefField {
    std::vector<double> fg, bg;
};

RefField ref_step(const RefField& q, const ImageGrid& img, const ProbMap& p, const CrfParams& c) {
    const int H = img.height(), W = img.width();
    RefField out{std::vector<double>(img.size()), std::vector<double>(img.size())};
    for (int a = 0; a < H * W; ++a) {
        const double pa = std::min(std::max(p[a], 1e-8), 1.0 - 1e-8);
        double efg = -std::log(pa), ebg = -std::log(std::min(std::max(1.0 - p[a], 1e-8), 1.0 - 1e-8));
        for (int b = 0; b < H * W; ++b) {
            if (a == b) continue;
            const double d2 = std::pow(a / W - b / W, 2) + std::pow(a % W - b % W, 2);
            const double di = img[a] - img[b];
            const double k = c.gaussian_compat * std::exp(-d2 / (2 * c.gaussian_sdims * c.gaussian_sdims)) +
                             c.bilateral_compat * std::exp(-d2 / (2 * c.bilateral_sdims * c.bilateral_sdims) -
                                                           di * di / (2 * c.bilateral_schan * c.bilateral_schan));
            efg += k * q.bg[b];
            ebg += k * q.fg[b];
        }
        const double m = std::min(efg, ebg);
        const double zf = std::exp(-(efg - m)), zb = std::exp(-(ebg - m));
        out.fg[a] = zf / (zf + zb);
        out.bg[a] = zb / (zf + zb);
    }
    return out;
}

CrfParams random_params(Rng& rng) {
    return {rng.uniform(0.5, 5.0), rng.uniform(0.0, 5.0), rng.uniform(0.5, 5.0), rng.uniform(0.05, 1.0),
            rng.uniform(0.0, 5.0), 1 + static_cast<int>(rng.below(3))};
}

}  // namespace

TEST_CASE("crf params validation and serialization") {
    CHECK_NOTHROW(CrfParams::isic_center().validate());
    CHECK_NOTHROW(CrfParams::rsna_center().validate());
    CHECK_NOTHROW(CrfParams::desk_center().validate());
    CHECK(CrfParams::isic_center() == CrfParams{29.93, 9.06, 28.19, 5.59, 9.46, 2});
    CHECK(CrfParams::rsna_center() == CrfParams{1, 6, 1, 7, 4, 1});
    CHECK_THROWS_AS((CrfParams{0.0, 1, 1, 1, 1, 1}).validate(), Error);
    CHECK_THROWS_AS((CrfParams{1, -1, 1, 1, 1, 1}).validate(), Error);
    CHECK_THROWS_AS((CrfParams{1, 1, 1, 1, 1, 0}).validate(), Error);

    const CrfParams p{1.25, 0.1, 3.0, 1.0 / 3.0, 2.5, 4};
    const auto text = to_key_values(p, "x.");
    CHECK(text.find("x.gaussian.sdims=1.25\n") != std::string::npos);
    CHECK(crf_params_from(KeyValues::parse(text), "x.") == p);
    CHECK_THROWS_AS(crf_params_from(KeyValues::parse("gaussian.sdims=1\n")), Error);
}

TEST_CASE("unary energies") {
    const auto u = unary_from_prob(ProbMap(1, 3, {0.25, 0.0, 1.0}));
    CHECK(u.foreground[0] == doctest::Approx(-std::log(0.25)));
    CHECK(u.background[0] == doctest::Approx(-std::log(0.75)));
    CHECK(u.foreground[1] == doctest::Approx(-std::log(1e-8)));
    CHECK(std::isfinite(u.background[2]));
    const auto q = initial_field(u);
    CHECK(q.foreground[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("two-pixel gibbs energy by hand") {
    const ImageGrid img(1, 2, {0.2, 0.6});
    const ProbMap p(1, 2, {0.8, 0.3});
    const CrfParams c{1.0, 2.0, 2.0, 0.5, 3.0, 1};
    // one pair at distance 1, intensity gap 0.4
    const double k = 2.0 * std::exp(-0.5) + 3.0 * std::exp(-1.0 / 8.0 - 0.16 / 0.5);
    CHECK(gibbs_energy(mask_from(1, 2, {1, 0}), img, p, c) ==
          doctest::Approx(-std::log(0.8) - std::log(0.7) + k).epsilon(1e-12));
    CHECK(gibbs_energy(mask_from(1, 2, {1, 1}), img, p, c) ==
          doctest::Approx(-std::log(0.8) - std::log(0.3)).epsilon(1e-12));
    CHECK_THROWS_AS(gibbs_energy(BinaryMask::filled(80, 80, 0), ImageGrid::filled(80, 80, 0), ProbMap::filled(80, 80, 0.5), c),
                    Error);
}

TEST_CASE("two-pixel mean-field step by hand") {
    const ImageGrid img(1, 2, {0.2, 0.6});
    const ProbMap p(1, 2, {0.8, 0.3});
    const CrfParams c{1.0, 2.0, 2.0, 0.5, 3.0, 1};
    const double k = 2.0 * std::exp(-0.5) + 3.0 * std::exp(-1.0 / 8.0 - 0.16 / 0.5);
    // pixel 0 pays k * Q_1(bg) = 0.7k for foreground, k * Q_1(fg) = 0.3k for background
    const double e0f = -std::log(0.8) + 0.7 * k, e0b = -std::log(0.2) + 0.3 * k;
    const double e1f = -std::log(0.3) + 0.2 * k, e1b = -std::log(0.7) + 0.8 * k;
    const auto u = unary_from_prob(p);
    for (MessagePassing mode : {MessagePassing::exact, MessagePassing::truncated}) {
        const auto q = meanfield_step(initial_field(u), img, u, c, {mode, 3.0});
        CHECK(q.foreground[0] == doctest::Approx(1.0 / (1.0 + std::exp(e0f - e0b))).epsilon(1e-12));
        CHECK(q.foreground[1] == doctest::Approx(1.0 / (1.0 + std::exp(e1f - e1b))).epsilon(1e-12));
        CHECK(q.foreground[0] + q.background[0] == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("exact mean-field step matches the reference update") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto img = testing::random_image(6, 6, rng);
        const auto p = testing::random_prob(6, 6, rng);
        const auto c = random_params(rng);
        const auto u = unary_from_prob(p);
        auto q = initial_field(u);
        RefField r{q.foreground, q.background};
        for (int s = 0; s < 3; ++s) {
            q = meanfield_step(q, img, u, c, {MessagePassing::exact, 3.0});
            r = ref_step(r, img, p, c);
            for (std::size_t i = 0; i < q.foreground.size(); ++i) {
                CHECK(std::abs(q.foreground[i] - r.fg[i]) < 1e-9);
                CHECK(std::abs(q.background[i] - r.bg[i]) < 1e-9);
            }
        }
    }
}

TEST_CASE("truncated message passing tracks the exact path") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto img = testing::random_image(6, 6, rng);
        const auto p = testing::random_prob(6, 6, rng);
        const auto c = random_params(rng);
        const auto u = unary_from_prob(p);
        const auto q0 = initial_field(u);
        const auto a = meanfield_step(q0, img, u, c, {MessagePassing::exact, 3.0});
        const auto b = meanfield_step(q0, img, u, c, {MessagePassing::truncated, 3.0});
        for (std::size_t i = 0; i < a.foreground.size(); ++i) CHECK(std::abs(a.foreground[i] - b.foreground[i]) < 1e-3);
    }
}

TEST_CASE("window wide enough to cover the image reproduces the exact step") {
    Rng rng(7);
    const auto img = testing::random_image(8, 8, rng);
    const auto p = testing::random_prob(8, 8, rng);
    const CrfParams c{0.7, 3.0, 0.8, 0.3, 2.0, 1};
    const auto u = unary_from_prob(p);
    const auto a = meanfield_step(initial_field(u), img, u, c, {MessagePassing::exact, 3.0});
    const auto b = meanfield_step(initial_field(u), img, u, c, {MessagePassing::truncated, 20.0});
    for (std::size_t i = 0; i < a.foreground.size(); ++i) CHECK(std::abs(a.foreground[i] - b.foreground[i]) < 1e-12);
}

TEST_CASE("zero compatibility reduces infer to binarize") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto img = testing::random_image(7, 5, rng);
        auto p = testing::random_prob(7, 5, rng);
        if (trial == 0) p = ProbMap::filled(7, 5, 0.5);
        CrfParams c = random_params(rng);
        c.gaussian_compat = 0.0;
        c.bilateral_compat = 0.0;
        for (MessagePassing mode : {MessagePassing::exact, MessagePassing::truncated})
            CHECK(infer(img, p, c, {mode, 3.0}) == binarize(p));
    }
}

TEST_CASE("smoothing removes an isolated flipped pixel") {
    std::vector<double> pv(64, 0.1);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) pv[y * 8 + x] = 0.9;
    pv[3 * 8 + 3] = 0.4;   // hole inside the square
    pv[0 * 8 + 7] = 0.6;   // speck in the background
    const ProbMap p(8, 8, pv);
    const auto img = ImageGrid::filled(8, 8, 0.5);
    const auto raw = binarize(p);
    CHECK(raw.at(3, 3) == 0);
    CHECK(raw.at(0, 7) == 1);
    const auto out = infer(img, p, {1.0, 2.0, 2.0, 0.2, 0.0, 2}, {MessagePassing::exact, 3.0});
    CHECK(out.at(3, 3) == 1);
    CHECK(out.at(0, 7) == 0);
    CHECK(out.at(4, 4) == 1);
    CHECK(out.at(7, 0) == 0);
}

TEST_CASE("infer is pure and checks shapes") {
    Rng rng(9);
    const auto img = testing::random_image(8, 8, rng);
    const auto p = testing::random_prob(8, 8, rng);
    const auto c = CrfParams::desk_center();
    CHECK(infer(img, p, c) == infer(img, p, c));
    CHECK_THROWS_AS(infer(img, ProbMap::filled(8, 7, 0.5), c), Error);
}
