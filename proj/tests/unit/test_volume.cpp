#include <set>

#include "ctseg/volume.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace ctseg;

namespace {

Volume make_prob(Dims dims, float fill) {
    return Volume::create(dims, {1, 1, 1}, VolumeKind::Probability, fill);
}

}  // namespace

TEST_CASE("threshold_prob binarizes inclusively at t") {
    Volume above = make_prob({3, 3, 3}, 0.9f);
    Volume t1 = threshold_prob(above, 0.5);
    for (float v : t1.data) CHECK(v == 1.0f);
    CHECK(t1.kind == VolumeKind::Label);

    Volume below = make_prob({3, 3, 3}, 0.1f);
    Volume t0 = threshold_prob(below, 0.5);
    for (float v : t0.data) CHECK(v == 0.0f);

    Volume edge = make_prob({2, 1, 1}, 0.0f);
    edge.data = {0.5f, 0.49f};
    Volume te = threshold_prob(edge, 0.5);
    CHECK(te.data[0] == 1.0f);
    CHECK(te.data[1] == 0.0f);
}

TEST_CASE("threshold_prob rejects non-probability input") {
    Volume v = Volume::create({2, 2, 2}, {1, 1, 1}, VolumeKind::Intensity, 0.3f);
    CHECK_THROWS_AS(threshold_prob(v, 0.5), std::invalid_argument);
}

TEST_CASE("extract_surface: isolated voxel is its own surface") {
    Volume m = Volume::create({1, 1, 1}, {1, 1, 1}, VolumeKind::Label, 1.0f);
    SurfacePointSet s = extract_surface(m);
    REQUIRE(s.count() == 1);
    CHECK(s.points[0] == std::array<double, 3>{0.0, 0.0, 0.0});
}

TEST_CASE("extract_surface: solid 3x3x3 cube has 26 surface voxels") {
    Volume m = Volume::create({5, 5, 5}, {1, 1, 1}, VolumeKind::Label, 0.0f);
    for (int z = 1; z <= 3; ++z)
        for (int y = 1; y <= 3; ++y)
            for (int x = 1; x <= 3; ++x) m.at(z, y, x) = 1.0f;

    SurfacePointSet s = extract_surface(m);
    auto expected = oracles::brute_force_surface(m);
    CHECK(s.count() == 26);
    REQUIRE(s.count() == expected.size());
    CHECK(s.voxels == expected);
}

TEST_CASE("extract_surface scales coordinates by spacing") {
    Volume m = Volume::create({3, 3, 3}, {0.3, 0.25, 0.25}, VolumeKind::Label, 0.0f);
    m.at(1, 1, 1) = 1.0f;
    SurfacePointSet s = extract_surface(m);
    REQUIRE(s.count() == 1);
    CHECK(s.points[0][0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(s.points[0][1] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s.points[0][2] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("surface of a 1-voxel-thick slab equals its foreground") {
    Volume m = Volume::create({1, 4, 4}, {1, 1, 1}, VolumeKind::Label, 1.0f);
    SurfacePointSet s = extract_surface(m);
    CHECK(s.count() == 16);
}

TEST_CASE("empty foreground gives an empty surface") {
    Volume m = Volume::create({3, 3, 3}, {1, 1, 1}, VolumeKind::Label, 0.0f);
    CHECK(extract_surface(m).count() == 0);
}

TEST_CASE("confusion_counts on hand-built masks") {
    Volume r = Volume::create({3, 3, 3}, {1, 1, 1}, VolumeKind::Label, 0.0f);
    r.at(0, 0, 0) = r.at(0, 0, 1) = r.at(1, 1, 1) = r.at(2, 2, 2) = 1.0f;

    SUBCASE("identical masks") {
        ConfusionCounts c = confusion_counts(r, r);
        CHECK(c.tp == 4);
        CHECK(c.fp == 0);
        CHECK(c.fn == 0);
        CHECK(c.tn == 23);
        CHECK(c.total() == 27);
    }
    SUBCASE("empty prediction") {
        Volume p = Volume::create({3, 3, 3}, {1, 1, 1}, VolumeKind::Label, 0.0f);
        ConfusionCounts c = confusion_counts(p, r);
        CHECK(c.tp == 0);
        CHECK(c.fp == 0);
        CHECK(c.fn == 4);
    }
    SUBCASE("two hits, two misses, two spurious") {
        Volume p = Volume::create({3, 3, 3}, {1, 1, 1}, VolumeKind::Label, 0.0f);
        p.at(0, 0, 0) = p.at(0, 0, 1) = 1.0f;   // two of r's voxels
        p.at(2, 0, 0) = p.at(0, 2, 0) = 1.0f;   // two others
        ConfusionCounts c = confusion_counts(p, r);
        CHECK(c.tp == 2);
        CHECK(c.fp == 2);
        CHECK(c.fn == 2);
        CHECK(c.tn == 21);
    }
    SUBCASE("swapping arguments exchanges fp and fn") {
        Volume p = Volume::create({3, 3, 3}, {1, 1, 1}, VolumeKind::Label, 0.0f);
        p.at(0, 0, 0) = p.at(2, 0, 0) = 1.0f;
        ConfusionCounts a = confusion_counts(p, r);
        ConfusionCounts b = confusion_counts(r, p);
        CHECK(a.tp == b.tp);
        CHECK(a.fp == b.fn);
        CHECK(a.fn == b.fp);
        CHECK(a.tn == b.tn);
    }
}

TEST_CASE("confusion_counts rejects mismatched dims") {
    Volume a = Volume::create({2, 2, 2}, {1, 1, 1}, VolumeKind::Label, 0.0f);
    Volume b = Volume::create({2, 2, 3}, {1, 1, 1}, VolumeKind::Label, 0.0f);
    CHECK_THROWS_WITH_AS(confusion_counts(a, b),
                         doctest::Contains("dimension mismatch"), std::invalid_argument);
}

TEST_CASE("label validation rejects non-binary data") {
    Volume v = Volume::create({1, 1, 2}, {1, 1, 1}, VolumeKind::Label, 0.0f);
    v.data[1] = 0.5f;
    CHECK_THROWS_AS(v.validate(), std::invalid_argument);
}

TEST_CASE("spacing must be strictly positive") {
    CHECK_THROWS_AS(Volume::create({1, 1, 1}, {0.0, 1, 1}, VolumeKind::Label),
                    std::invalid_argument);
}
