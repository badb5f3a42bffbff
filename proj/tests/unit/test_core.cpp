#include "helpers.hpp"

#include <doctest.h>

#include <string>

using namespace dsal;
using testing::mask_from;

namespace {

std::vector<Sample> make_samples(int n, const std::string& prefix = "s") {
    std::vector<Sample> out;
    for (int k = 0; k < n; ++k)
        out.emplace_back(prefix + std::to_string(k), ImageGrid::filled(4, 4, 0.5), BinaryMask::filled(4, 4, 0));
    return out;
}

}  // namespace

TEST_CASE("raster types validate their values") {
    CHECK_THROWS_AS(ImageGrid(2, 2, {0.0, 0.5, 1.0}), Error);
    CHECK_THROWS_AS(ImageGrid(0, 2, {}), Error);
    CHECK_THROWS_AS(ImageGrid(1, 2, {0.0, 1.5}), Error);
    CHECK_THROWS_AS(ImageGrid(1, 2, {0.0, std::nan("")}), Error);
    CHECK_THROWS_AS(BinaryMask(1, 2, {0, 2}), Error);
    CHECK_THROWS_AS(ProbMap(1, 2, {-0.1, 0.2}), Error);
    CHECK_NOTHROW(ProbMap(1, 2, {0.0, 1.0}));
}

TEST_CASE("dice examples") {
    const auto a = mask_from(2, 4, {1, 1, 1, 1, 0, 0, 0, 0});
    const auto b = mask_from(2, 4, {0, 0, 1, 1, 1, 1, 0, 0});
    const auto c = mask_from(2, 4, {0, 0, 0, 0, 0, 0, 1, 1});
    CHECK(dice(a, a) == 1.0);
    CHECK(dice(a, c) == 0.0);
    CHECK(dice(a, b) == 0.5);
    CHECK(dice(BinaryMask::filled(3, 3, 0), BinaryMask::filled(3, 3, 0)) == 1.0);
    CHECK(dice(BinaryMask::filled(3, 3, 0), BinaryMask::filled(3, 3, 1)) == 0.0);
    CHECK_THROWS_AS(dice(BinaryMask::filled(3, 3, 0), BinaryMask::filled(3, 4, 0)), Error);
}

TEST_CASE("dice is symmetric and bounded") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = testing::random_mask(5, 7, rng, rng.uniform());
        const auto b = testing::random_mask(5, 7, rng, rng.uniform());
        CHECK(dice(a, b) == dice(b, a));
        CHECK(dice(a, b) >= 0.0);
        CHECK(dice(a, b) <= 1.0);
        if (a.foreground_count() > 0) CHECK(dice(a, a) == 1.0);
    }
}

TEST_CASE("binarize") {
    CHECK(binarize(ProbMap::filled(3, 3, 0.7)) == BinaryMask::filled(3, 3, 1));
    CHECK(binarize(ProbMap::filled(3, 3, 0.3)) == BinaryMask::filled(3, 3, 0));
    CHECK(binarize(ProbMap(1, 2, {0.4, 0.6})) == mask_from(1, 2, {0, 1}));
    CHECK(binarize(ProbMap(1, 1, {0.5})) == mask_from(1, 1, {1}));
    CHECK(binarize(ProbMap(1, 2, {0.2, 0.3}), 0.25) == mask_from(1, 2, {0, 1}));
    CHECK_THROWS_AS(binarize(ProbMap::filled(1, 1, 0.5), 0.0), Error);
    CHECK_THROWS_AS(binarize(ProbMap::filled(1, 1, 0.5), 1.0), Error);
}

TEST_CASE("ground truth is unreadable inside a fence") {
    const Sample s("a", ImageGrid::filled(2, 2, 0.0), BinaryMask::filled(2, 2, 1));
    const Sample bare("b", ImageGrid::filled(2, 2, 0.0));
    CHECK_NOTHROW(s.ground_truth());
    CHECK_THROWS_AS(bare.ground_truth(), Error);
    {
        const GroundTruthFence fence;
        CHECK(GroundTruthFence::active());
        CHECK_THROWS_AS(s.ground_truth(), Error);
        {
            const GroundTruthFence inner;
            CHECK_THROWS_AS(s.ground_truth(), Error);
        }
        CHECK(GroundTruthFence::active());
    }
    CHECK_FALSE(GroundTruthFence::active());
    CHECK_NOTHROW(s.ground_truth());
}

TEST_CASE("pool state rejects overlapping or duplicate ids") {
    auto samples = make_samples(3);
    std::vector<LabeledEntry> labeled{{samples[0], BinaryMask::filled(4, 4, 0), Provenance::initial}};
    CHECK_THROWS_AS(PoolState(labeled, {samples[0], samples[1]}), Error);
    CHECK_THROWS_AS(PoolState({}, {samples[1], samples[1]}), Error);
    CHECK_THROWS_AS(PoolState({}, {samples[1]}, -1), Error);
    CHECK_NOTHROW(PoolState(labeled, {samples[1], samples[2]}));
}

TEST_CASE("move_to_labeled: 35 oracle and 20 pseudo out of 100") {
    const PoolState pool({}, make_samples(100), 4);
    std::vector<std::string> strong, weak;
    for (int k = 0; k < 35; ++k) strong.push_back("s" + std::to_string(k));
    for (int k = 35; k < 55; ++k) weak.push_back("s" + std::to_string(k));
    const std::vector<BinaryMask> sm(35, BinaryMask::filled(4, 4, 1)), wm(20, BinaryMask::filled(4, 4, 0));

    const auto p1 = move_to_labeled(pool, strong, sm, Provenance::oracle);
    const auto p2 = move_to_labeled(p1, weak, wm, Provenance::pseudo);
    CHECK(p2.unlabeled().size() == 45);
    CHECK(p2.labeled().size() == 55);
    CHECK(p2.count(Provenance::oracle) == 35);
    CHECK(p2.count(Provenance::pseudo) == 20);
    CHECK(p2.total() == pool.total());
    CHECK(p2.iteration() == 4);
    CHECK(p2.advanced().iteration() == 5);
    // the input state is untouched
    CHECK(pool.unlabeled().size() == 100);
    for (const auto& e : p2.labeled()) CHECK(p2.find_unlabeled(e.sample.id()) == nullptr);
}

TEST_CASE("move_to_labeled errors and the empty move") {
    const PoolState pool({}, make_samples(5), 0);
    const std::vector<std::string> none;
    const std::vector<BinaryMask> no_masks;
    const auto same = move_to_labeled(pool, none, no_masks, Provenance::oracle);
    CHECK(same.unlabeled().size() == 5);
    CHECK(same.labeled().empty());

    const std::vector<std::string> twice{"s1", "s1"};
    const std::vector<BinaryMask> two(2, BinaryMask::filled(4, 4, 0));
    CHECK_THROWS_AS(move_to_labeled(pool, twice, two, Provenance::oracle), Error);
    const std::vector<std::string> missing{"zz"};
    const std::vector<BinaryMask> one(1, BinaryMask::filled(4, 4, 0));
    CHECK_THROWS_AS(move_to_labeled(pool, missing, one, Provenance::oracle), Error);
    const std::vector<std::string> ok{"s1"};
    CHECK_THROWS_AS(move_to_labeled(pool, ok, two, Provenance::oracle), Error);
    const std::vector<BinaryMask> wrong_shape(1, BinaryMask::filled(3, 4, 0));
    CHECK_THROWS_AS(move_to_labeled(pool, ok, wrong_shape, Provenance::oracle), Error);
}

TEST_CASE("pool size is conserved over random transitions") {
    Rng rng(5);
    PoolState pool({}, make_samples(60), 0);
    const std::size_t total = pool.total();
    while (!pool.unlabeled().empty()) {
        std::vector<std::string> ids;
        for (const auto& s : pool.unlabeled())
            if (rng.uniform() < 0.2) ids.push_back(s.id());
        const std::vector<BinaryMask> masks(ids.size(), BinaryMask::filled(4, 4, 0));
        const std::size_t before = pool.unlabeled().size();
        pool = move_to_labeled(pool, ids, masks, Provenance::oracle).advanced();
        CHECK(pool.unlabeled().size() == before - ids.size());
        CHECK(pool.total() == total);
    }
}
