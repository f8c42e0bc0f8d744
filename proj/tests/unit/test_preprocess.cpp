#include <algorithm>
#include <cmath>

#include "ctseg/preprocess.hpp"
#include "ctseg/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace ctseg;

namespace {

std::vector<float> checkerboard(int h, int w, float lo, float hi) {
    std::vector<float> s(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) s[static_cast<std::size_t>(y) * w + x] = ((y + x) % 2) ? hi : lo;
    return s;
}

std::vector<float> two_level(int h, int w, float lo, float hi) {
    std::vector<float> s(static_cast<std::size_t>(h) * w, lo);
    for (int y = h / 2; y < h; ++y)
        for (int x = 0; x < w; ++x) s[static_cast<std::size_t>(y) * w + x] = hi;
    return s;
}

}  // namespace

TEST_CASE("clahe leaves a constant slice unchanged") {
    std::vector<float> s(64 * 64, 3.5f);
    std::vector<float> out = clahe_slice(s, 64, 64, {});
    CHECK(out == s);
}

TEST_CASE("clahe with one tile and a huge clip limit equals global equalization") {
    std::vector<float> s = checkerboard(32, 32, 10.0f, 20.0f);
    // Blend in a gradient so the histogram has more than two levels.
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) s[static_cast<std::size_t>(y) * 32 + x] += 0.2f * y;

    ClaheParams params;
    params.tiles_y = params.tiles_x = 1;
    params.clip_limit = 1e9;
    params.bins = 128;
    std::vector<float> ours = clahe_slice(s, 32, 32, params);
    std::vector<float> oracle = oracles::global_hist_eq(s, 128);

    REQUIRE(ours.size() == oracle.size());
    for (std::size_t i = 0; i < ours.size(); ++i)
        CHECK(ours[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
}

TEST_CASE("clahe does not decrease entropy on the two-level fixture") {
    std::vector<float> s = two_level(64, 64, 0.2f, 0.8f);
    std::vector<float> out = clahe_slice(s, 64, 64, {});

    double h_in = oracles::shannon_entropy(s, 0.2, 0.8, 64);
    double h_out = oracles::shannon_entropy(out, 0.2, 0.8, 64);
    CHECK(h_out >= h_in - 1e-12);
}

TEST_CASE("clahe never widens the slice value range") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<float> s(48 * 40);
        for (float& v : s) v = static_cast<float>(100.0 + 50.0 * rng.next_double());
        const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
        float lo = *mn, hi = *mx;
        std::vector<float> out = clahe_slice(s, 48, 40, {});
        for (float v : out) {
            CHECK(v >= lo - 1e-4f);
            CHECK(v <= hi + 1e-4f);
        }
    }
}

TEST_CASE("clahe rejects a slice smaller than the tile grid") {
    std::vector<float> s(4 * 4, 1.0f);
    ClaheParams params;  // 8x8 tiles
    CHECK_THROWS_AS(clahe_slice(s, 4, 4, params), std::invalid_argument);
}

TEST_CASE("normalize maps endpoints to 0 and 1") {
    Volume v = Volume::create({1, 1, 3}, {1, 1, 1}, VolumeKind::Intensity, 0.0f);
    v.data = {100.0f, 200.0f, 300.0f};
    Volume n = normalize_volume(v);
    CHECK(n.data[0] == 0.0f);
    CHECK(n.data[1] == 0.5f);
    CHECK(n.data[2] == 1.0f);
}

TEST_CASE("normalize maps a constant volume to zeros") {
    Volume v = Volume::create({2, 2, 2}, {1, 1, 1}, VolumeKind::Intensity, 140.0f);
    Volume n = normalize_volume(v);
    for (float x : n.data) CHECK(x == 0.0f);
}

TEST_CASE("normalize is idempotent on normalized input") {
    Rng rng(77);
    Volume v = Volume::create({2, 4, 4}, {1, 1, 1}, VolumeKind::Intensity, 0.0f);
    for (float& x : v.data) x = static_cast<float>(rng.next_double());
    v.data[0] = 0.0f;
    v.data[1] = 1.0f;
    Volume once = normalize_volume(v);
    Volume twice = normalize_volume(once);
    CHECK(once.data == twice.data);
    CHECK(*std::min_element(once.data.begin(), once.data.end()) == 0.0f);
    CHECK(*std::max_element(once.data.begin(), once.data.end()) == 1.0f);
}

TEST_CASE("resize to the input size is the bitwise identity") {
    Rng rng(55);
    Volume v = Volume::create({2, 16, 16}, {1, 1, 1}, VolumeKind::Intensity, 0.0f);
    for (float& x : v.data) x = static_cast<float>(rng.next_gaussian());
    Volume out = resize_axial(v, 16, 16);
    CHECK(out.data == v.data);
    CHECK(out.spacing == v.spacing);
}

TEST_CASE("resize of a constant slice stays constant with rescaled spacing") {
    Volume v = Volume::create({1, 266, 266}, {0.3, 0.25, 0.25}, VolumeKind::Intensity, 0.42f);
    Volume out = resize_axial(v, 256, 256);
    CHECK(out.dims == Dims{1, 256, 256});
    for (float x : out.data) CHECK(x == 0.42f);
    CHECK(out.spacing.dy == doctest::Approx(0.25 * 266.0 / 256.0).epsilon(1e-12));
    CHECK(out.spacing.dx == doctest::Approx(0.25 * 266.0 / 256.0).epsilon(1e-12));
    CHECK(out.spacing.dz == 0.3);
}

TEST_CASE("resize 2x2 to 4x4 matches the align-corners formula") {
    Volume v = Volume::create({1, 2, 2}, {1, 1, 1}, VolumeKind::Intensity, 0.0f);
    v.at(0, 0, 0) = 0.0f;
    v.at(0, 0, 1) = 1.0f;
    v.at(0, 1, 0) = 0.0f;
    v.at(0, 1, 1) = 1.0f;
    Volume out = resize_axial(v, 4, 4);
    for (int y = 0; y < 4; ++y) {
        CHECK(out.at(0, y, 0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(out.at(0, y, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
        CHECK(out.at(0, y, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
        CHECK(out.at(0, y, 3) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("resize preserves min/max bounds") {
    Rng rng(66);
    Volume v = Volume::create({2, 10, 14}, {1, 1, 1}, VolumeKind::Intensity, 0.0f);
    for (float& x : v.data) x = static_cast<float>(rng.next_double() * 7.0 - 3.0);
    const auto [mn, mx] = std::minmax_element(v.data.begin(), v.data.end());
    Volume out = resize_axial(v, 23, 17);
    for (float x : out.data) {
        CHECK(x >= *mn - 1e-6f);
        CHECK(x <= *mx + 1e-6f);
    }
}
