#include <cmath>
#include <filesystem>

#include "ctseg/nn.hpp"
#include "ctseg/rng.hpp"
#include "doctest.h"

using namespace ctseg;

namespace {

Tensor5 random_tensor(int b, int c, int d, int h, int w, std::uint64_t seed) {
    Tensor5 t(b, c, d, h, w);
    Rng rng(seed);
    for (float& v : t.data) v = static_cast<float>(rng.next_double());
    return t;
}

bool all_finite(const Tensor5& t) {
    for (float v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

TEST_CASE("kaiming_init: sample std matches sqrt(2/fan_in) within 10%") {
    // (8,4,3,3,3) has fan_in 108; draw enough tensors for ~1e4 samples.
    std::vector<float> w = kaiming_init({8, 4, 3, 3, 3}, 77);
    double expect = std::sqrt(2.0 / 108.0);
    REQUIRE(w.size() == 8u * 4 * 27);

    std::vector<float> more = kaiming_init({8, 4, 3, 3, 3}, 78);
    std::vector<float> all = w;
    all.insert(all.end(), more.begin(), more.end());
    for (int extra = 0; extra < 4; ++extra) {
        std::vector<float> m = kaiming_init({8, 4, 3, 3, 3}, 100 + extra);
        all.insert(all.end(), m.begin(), m.end());
    }
    double mean = 0.0;
    for (float v : all) mean += v;
    mean /= static_cast<double>(all.size());
    double var = 0.0;
    for (float v : all) var += (v - mean) * (v - mean);
    var /= static_cast<double>(all.size());
    double std_dev = std::sqrt(var);
    CHECK(std_dev > 0.9 * expect);
    CHECK(std_dev < 1.1 * expect);
}

TEST_CASE("kaiming_init determinism and seed sensitivity") {
    std::vector<float> a = kaiming_init({4, 4, 3, 3, 3}, 5);
    std::vector<float> b = kaiming_init({4, 4, 3, 3, 3}, 5);
    std::vector<float> c = kaiming_init({4, 4, 3, 3, 3}, 6);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("kaiming_init rejects degenerate shapes") {
    CHECK_THROWS_AS(kaiming_init({}, 0), std::invalid_argument);
    CHECK_THROWS_AS(kaiming_init({8}, 0), std::invalid_argument);
    CHECK_THROWS_AS(kaiming_init({8, 0, 3}, 0), std::invalid_argument);
}

TEST_CASE("conv3d: 1x1x1 identity kernel reproduces the input") {
    Tensor5 x = random_tensor(1, 1, 3, 4, 5, 1);
    ConvParams p;
    p.out_ch = p.in_ch = 1;
    p.weight = {1.0f};
    p.bias = {0.0f};
    Tensor5 y = conv3d(x, p);
    CHECK(y.data == x.data);
}

TEST_CASE("conv3d: all-ones 3x3x3 kernel counts in-bounds taps") {
    Tensor5 x(1, 1, 4, 4, 4, 1.0f);
    ConvParams p;
    p.out_ch = p.in_ch = 1;
    p.kz = p.ky = p.kx = 3;
    p.weight.assign(27, 1.0f);
    p.bias = {0.0f};
    Tensor5 y = conv3d(x, p);
    CHECK(y.at(0, 0, 1, 1, 1) == 27.0f);  // interior: full neighborhood
    CHECK(y.at(0, 0, 0, 0, 0) == 8.0f);   // corner: 2x2x2 in bounds
}

TEST_CASE("conv3d: zero kernel with bias gives a constant map") {
    Tensor5 x = random_tensor(1, 2, 2, 2, 2, 3);
    ConvParams p;
    p.out_ch = 1;
    p.in_ch = 2;
    p.kz = p.ky = p.kx = 3;
    p.weight.assign(p.weight_count(), 0.0f);
    p.bias = {1.25f};
    Tensor5 y = conv3d(x, p);
    for (float v : y.data) CHECK(v == 1.25f);
}

TEST_CASE("conv3d rejects channel mismatch") {
    Tensor5 x = random_tensor(1, 3, 2, 2, 2, 4);
    ConvParams p;
    p.out_ch = 1;
    p.in_ch = 2;
    p.weight.assign(p.weight_count(), 0.0f);
    p.bias = {0.0f};
    CHECK_THROWS_AS(conv3d(x, p), std::invalid_argument);
}

TEST_CASE("maxpool takes window maxima and rejects odd dims") {
    Tensor5 x(1, 1, 2, 2, 2);
    x.data = {1, 2, 3, 4, 5, 6, 7, 8};
    Tensor5 y = maxpool3d_2x(x);
    REQUIRE(y.data.size() == 1);
    CHECK(y.data[0] == 8.0f);

    Tensor5 odd(1, 1, 3, 2, 2);
    CHECK_THROWS_AS(maxpool3d_2x(odd), std::invalid_argument);
}

TEST_CASE("instance_norm yields zero mean and unit variance per slab") {
    Tensor5 x = random_tensor(2, 3, 4, 4, 4, 9);
    Tensor5 y = instance_norm(x);
    for (int ib = 0; ib < y.b; ++ib)
        for (int c = 0; c < y.c; ++c) {
            double mean = 0.0, var = 0.0;
            for (std::size_t i = 0; i < y.spatial(); ++i)
                mean += y.data[y.index(ib, c, 0, 0, 0) + i];
            mean /= static_cast<double>(y.spatial());
            for (std::size_t i = 0; i < y.spatial(); ++i) {
                double d = y.data[y.index(ib, c, 0, 0, 0) + i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(y.spatial());
            CHECK(std::abs(mean) < 1e-6);
            CHECK(std::abs(var - 1.0) < 1e-4);
        }
}

TEST_CASE("upsample of a constant tensor stays constant with doubled dims") {
    Tensor5 x(1, 2, 2, 3, 4, 0.7f);
    Tensor5 y = upsample3d_2x(x);
    CHECK(y.d == 4);
    CHECK(y.h == 6);
    CHECK(y.w == 8);
    for (float v : y.data) CHECK(v == 0.7f);
}

TEST_CASE("reb with a zero body reduces to relu of the input") {
    Rng rng(12);
    RebParams p = make_reb(4, 4, rng);
    for (ConvParams& c : p.convs) {
        std::fill(c.weight.begin(), c.weight.end(), 0.0f);
        std::fill(c.bias.begin(), c.bias.end(), 0.0f);
    }
    Tensor5 x = random_tensor(1, 4, 4, 4, 4, 13);
    for (float& v : x.data) v = v - 0.5f;  // exercise both relu regimes
    Tensor5 y = reb_forward(x, p);
    REQUIRE(y.same_shape(x));
    for (std::size_t i = 0; i < x.data.size(); ++i)
        CHECK(y.data[i] == std::max(0.0f, x.data[i]));
}

TEST_CASE("reb preserves spatial shape and projects mismatched channels") {
    Rng rng(21);
    RebParams p = make_reb(3, 8, rng);
    REQUIRE(p.projection.has_value());
    Tensor5 x = random_tensor(2, 3, 4, 6, 8, 22);
    Tensor5 y = reb_forward(x, p);
    CHECK(y.b == 2);
    CHECK(y.c == 8);
    CHECK(y.d == 4);
    CHECK(y.h == 6);
    CHECK(y.w == 8);
    CHECK(all_finite(y));
}

TEST_CASE("se attention with zero weights halves the input") {
    Rng rng(31);
    AttentionParams params = make_attention(AttentionKind::Se, 4, rng);
    auto& se = std::get<SeParams>(params);
    std::fill(se.fc1.weight.begin(), se.fc1.weight.end(), 0.0f);
    std::fill(se.fc2.weight.begin(), se.fc2.weight.end(), 0.0f);

    Tensor5 x = random_tensor(1, 4, 2, 2, 2, 32);
    AttentionDiag diag;
    Tensor5 y = attention_forward(x, AttentionKind::Se, params, &diag);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        CHECK(y.data[i] == doctest::Approx(0.5f * x.data[i]).epsilon(1e-6));
    for (double g : diag.gate_values) CHECK(g == 0.5);
}

TEST_CASE("sk attention with zero selectors weights branches equally") {
    Rng rng(41);
    AttentionParams params = make_attention(AttentionKind::Sk, 4, rng);
    auto& sk = std::get<SkParams>(params);
    std::fill(sk.select_a.weight.begin(), sk.select_a.weight.end(), 0.0f);
    std::fill(sk.select_b.weight.begin(), sk.select_b.weight.end(), 0.0f);

    Tensor5 x = random_tensor(1, 4, 4, 4, 4, 42);
    AttentionDiag diag;
    Tensor5 y = attention_forward(x, AttentionKind::Sk, params, &diag);

    // With equal logits the selection is exactly (0.5, 0.5), so the output
    // is the mean of the two branch maps.
    Tensor5 ua = relu(instance_norm(conv3d(x, sk.branch_a)));
    Tensor5 ub = relu(instance_norm(conv3d(x, sk.branch_b)));
    for (std::size_t i = 0; i < y.data.size(); ++i)
        CHECK(y.data[i] ==
              doctest::Approx(0.5 * ua.data[i] + 0.5 * ub.data[i]).epsilon(1e-6));
    for (double s : diag.softmax_sums) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("every attention variant preserves shape with finite outputs") {
    Rng seeds(51);
    for (AttentionKind kind : all_attention_kinds()) {
        for (int trial = 0; trial < 3; ++trial) {
            int c = 2 + 2 * trial;
            Rng rng(seeds.next_u64());
            AttentionParams params = make_attention(kind, c, rng);
            Tensor5 x = random_tensor(1, c, 2 + trial, 3, 4, seeds.next_u64());
            AttentionDiag diag;
            Tensor5 y = attention_forward(x, kind, params, &diag);
            CHECK(y.same_shape(x));
            CHECK(all_finite(y));
            for (double s : diag.softmax_sums) CHECK(std::abs(s - 1.0) < 1e-6);
            for (double g : diag.gate_values) {
                CHECK(g > 0.0);
                CHECK(g < 1.0);
            }
        }
    }
}

TEST_CASE("danet position affinity rows are softmax-normalized") {
    Rng rng(61);
    AttentionParams params = make_attention(AttentionKind::Danet, 4, rng);
    Tensor5 x = random_tensor(1, 4, 3, 3, 3, 62);
    AttentionDiag diag;
    attention_forward(x, AttentionKind::Danet, params, &diag);
    // 27 position rows plus 4 channel rows.
    CHECK(diag.softmax_sums.size() == 27u + 4u);
    for (double s : diag.softmax_sums) CHECK(std::abs(s - 1.0) < 1e-6);
}

TEST_CASE("model_forward: shape, sigmoid range and aux head count") {
    ModelConfig cfg;
    cfg.seed = 9;
    cfg.attention = AttentionKind::Se;
    cfg.ds_heads = true;
    ModelParams params = init_model_params(cfg);
    Tensor5 x = random_tensor(1, 1, 16, 16, 16, 10);

    ModelOutput out = model_forward(x, cfg, params);
    CHECK(out.main.b == 1);
    CHECK(out.main.c == 1);
    CHECK(out.main.d == 16);
    CHECK(out.main.h == 16);
    CHECK(out.main.w == 16);
    REQUIRE(out.aux.size() == 2);
    for (const Tensor5& a : out.aux) CHECK(a.same_shape(out.main));
    for (float v : out.main.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
    for (const Tensor5& a : out.aux)
        for (float v : a.data) {
            CHECK(v > 0.0f);
            CHECK(v < 1.0f);
        }
}

TEST_CASE("model_forward is deterministic given seed and input") {
    ModelConfig cfg;
    cfg.seed = 77;
    cfg.attention = AttentionKind::Cbam;
    Tensor5 x = random_tensor(1, 1, 16, 16, 16, 78);
    ModelOutput a = model_forward(x, cfg, init_model_params(cfg));
    ModelOutput b = model_forward(x, cfg, init_model_params(cfg));
    CHECK(a.main.data == b.main.data);
}

TEST_CASE("model_forward rejects indivisible dims and missing params") {
    ModelConfig cfg;
    ModelParams params = init_model_params(cfg);
    Tensor5 bad = random_tensor(1, 1, 12, 16, 16, 1);
    CHECK_THROWS_AS(model_forward(bad, cfg, params), std::invalid_argument);
    Tensor5 ok = random_tensor(1, 1, 8, 8, 8, 1);
    CHECK_THROWS_AS(model_forward(ok, cfg, ModelParams{}), std::invalid_argument);
}

TEST_CASE("attention=none reduces to the plain residual encoder-decoder") {
    ModelConfig cfg;
    cfg.attention = AttentionKind::None;
    cfg.seed = 3;
    Tensor5 x = random_tensor(1, 1, 8, 8, 8, 4);
    ModelOutput out = model_forward(x, cfg, init_model_params(cfg));
    for (float v : out.main.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
}

TEST_CASE("params roundtrip through the sidecar+blob container") {
    namespace fs = std::filesystem;
    ModelConfig cfg;
    cfg.seed = 123;
    cfg.attention = AttentionKind::Polar;
    ModelParams params = init_model_params(cfg);

    fs::path dir = fs::temp_directory_path() / "ctseg_nn_tests";
    fs::create_directories(dir);
    std::string stem = (dir / "weights").string();
    write_model_params(params, cfg, stem);
    auto [loaded, loaded_cfg] = read_model_params(stem);
    CHECK(loaded_cfg.attention == AttentionKind::Polar);
    CHECK(loaded_cfg.seed == 123);

    Tensor5 x = random_tensor(1, 1, 8, 8, 8, 5);
    ModelOutput a = model_forward(x, cfg, params);
    ModelOutput b = model_forward(x, loaded_cfg, loaded);
    CHECK(tensor_hash(a.main) == tensor_hash(b.main));
}
