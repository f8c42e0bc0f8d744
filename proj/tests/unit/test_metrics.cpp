#include <cmath>

#include "ctseg/metrics.hpp"
#include "ctseg/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace ctseg;

namespace {

SurfacePointSet pts(std::vector<std::array<double, 3>> p) {
    return SurfacePointSet::from_points(std::move(p));
}

Volume random_mask(Dims dims, Spacing spacing, double density, Rng& rng) {
    Volume m = Volume::create(dims, spacing, VolumeKind::Label, 0.0f);
    for (float& v : m.data) v = rng.next_double() < density ? 1.0f : 0.0f;
    return m;
}

}  // namespace

TEST_CASE("point_to_set_distances on hand-derived cases") {
    CHECK(point_to_set_distances(pts({{0, 0, 0}}), pts({{0, 0, 0}}))[0] == 0.0);

    // 3-4-5 right triangle: the only distance is exactly 5.
    auto d = point_to_set_distances(pts({{0, 0, 0}}), pts({{0, 3, 4}}));
    CHECK(d[0] == doctest::Approx(5.0).epsilon(1e-15));

    auto d2 = point_to_set_distances(pts({{0, 0, 0}, {0, 0, 2}}), pts({{0, 0, 1}}));
    CHECK(d2[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(d2[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("point_to_set_distances rejects an empty reference set") {
    CHECK_THROWS_AS(point_to_set_distances(pts({{0, 0, 0}}), pts({})), std::invalid_argument);
}

TEST_CASE("hausdorff on hand-derived cases") {
    SurfacePointSet a = pts({{0, 0, 0}});
    CHECK(hausdorff(a, a) == 0.0);
    CHECK(hausdorff(pts({{0, 0, 0}}), pts({{0, 3, 4}})) == doctest::Approx(5.0).epsilon(1e-15));

    // Directed maxima are 1 (from sr) and 2 (from sp).
    SurfacePointSet sr = pts({{0, 0, 0}});
    SurfacePointSet sp = pts({{0, 0, 1}, {0, 0, 2}});
    CHECK(hausdorff(sr, sp) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(hausdorff(sr, sp, DistancePath::Auto, /*literal_sum=*/true) ==
          doctest::Approx(3.0).epsilon(1e-15));
    CHECK_THROWS_AS(hausdorff(sr, pts({})), std::invalid_argument);
}

TEST_CASE("assd on hand-derived cases") {
    SurfacePointSet a = pts({{1, 2, 3}, {4, 5, 6}});
    CHECK(assd(a, a) == 0.0);
    CHECK(assd(pts({{0, 0, 0}}), pts({{0, 3, 4}})) == doctest::Approx(5.0).epsilon(1e-15));

    // D(R,P) = 1, D(P,R) = 1 + 2 = 3, over 3 points total.
    SurfacePointSet sr = pts({{0, 0, 0}});
    SurfacePointSet sp = pts({{0, 0, 1}, {0, 0, 2}});
    CHECK(assd(sr, sp) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("surface overlap and dice against theta") {
    SurfacePointSet sr = pts({{0, 0, 0}});
    SurfacePointSet sp = pts({{0, 0, 0}, {0, 0, 5}});

    CHECK(surface_overlap(sp, sr, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(surface_dice(sr, sp, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    SUBCASE("identical sets overlap fully") {
        CHECK(surface_overlap(sp, sp, 1.0) == 1.0);
        CHECK(surface_dice(sp, sp, 1.0) == 1.0);
    }
    SUBCASE("d == theta counts as overlapping") {
        CHECK(surface_overlap(pts({{0, 0, 1}}), pts({{0, 0, 0}}), 1.0) == 1.0);
    }
    SUBCASE("far-apart points do not overlap") {
        CHECK(surface_dice(pts({{0, 0, 0}}), pts({{9, 9, 9}}), 1.0) == 0.0);
    }
}

TEST_CASE("accelerated distances equal the exhaustive oracle on random masks") {
    Rng rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        Spacing spacing{0.3, 0.25, 0.25};
        Volume a = random_mask({12, 12, 12}, spacing, 0.1 + 0.5 * rng.next_double(), rng);
        Volume b = random_mask({12, 12, 12}, spacing, 0.1 + 0.5 * rng.next_double(), rng);
        SurfacePointSet sa = extract_surface(a);
        SurfacePointSet sb = extract_surface(b);
        if (sa.empty() || sb.empty()) continue;

        auto fast = point_to_set_distances(sa, sb, DistancePath::Accelerated);
        auto oracle = oracles::pairwise_min_distances(sa.points, sb.points);
        REQUIRE(fast.size() == oracle.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
            double denom = std::max(1.0, oracle[i]);
            CHECK(std::abs(fast[i] - oracle[i]) / denom < 1e-9);
        }
    }
}

TEST_CASE("metric symmetry and ordering properties") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        Volume a = random_mask({10, 10, 10}, {1.0, 0.5, 0.75}, 0.3, rng);
        Volume b = random_mask({10, 10, 10}, {1.0, 0.5, 0.75}, 0.3, rng);
        SurfacePointSet sa = extract_surface(a);
        SurfacePointSet sb = extract_surface(b);
        if (sa.empty() || sb.empty()) continue;

        double hd_ab = hausdorff(sa, sb), hd_ba = hausdorff(sb, sa);
        CHECK(hd_ab == doctest::Approx(hd_ba).epsilon(1e-12));
        double as_ab = assd(sa, sb), as_ba = assd(sb, sa);
        CHECK(as_ab == doctest::Approx(as_ba).epsilon(1e-12));
        CHECK(surface_dice(sa, sb, 0.8) == doctest::Approx(surface_dice(sb, sa, 0.8)));
        CHECK(hd_ab >= as_ab - 1e-12);

        // SO and SD are non-decreasing in theta.
        double prev_so = -1.0, prev_sd = -1.0;
        for (double theta : {0.25, 0.5, 1.0, 2.0, 4.0}) {
            double so = surface_overlap(sb, sa, theta);
            double sd = surface_dice(sa, sb, theta);
            CHECK(so >= prev_so);
            CHECK(sd >= prev_sd);
            prev_so = so;
            prev_sd = sd;
        }
    }
}

TEST_CASE("translation shifts hausdorff by exactly the offset against a point") {
    SurfacePointSet sr = pts({{0, 0, 0}});
    SurfacePointSet sp = pts({{0, 0, 1}, {0, 2, 0}});
    double base = hausdorff(sr, sp);

    std::array<double, 3> t{1.0, -2.0, 2.0};
    double norm = std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
    SurfacePointSet moved = sp;
    for (auto& p : moved.points)
        for (int i = 0; i < 3; ++i) p[i] += t[i];

    // Single-point reference: translating the whole set by t moves the
    // farthest point distance by at most |t|; equality holds when t extends
    // the same ray, checked separately below.
    CHECK(std::abs(hausdorff(sr, moved) - base) <= norm + 1e-12);

    SurfacePointSet ray = pts({{0, 0, 2}});
    SurfacePointSet ray_moved = pts({{0, 0, 5}});
    CHECK(hausdorff(sr, ray_moved) - hausdorff(sr, ray) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("doubling the spacing doubles HD and ASSD exactly") {
    Rng rng(99);
    Volume a1 = random_mask({8, 8, 8}, {0.5, 0.5, 0.5}, 0.3, rng);
    Volume b1 = random_mask({8, 8, 8}, {0.5, 0.5, 0.5}, 0.3, rng);
    Volume a2 = a1, b2 = b1;
    a2.spacing = b2.spacing = {1.0, 1.0, 1.0};

    SurfacePointSet sa1 = extract_surface(a1), sb1 = extract_surface(b1);
    SurfacePointSet sa2 = extract_surface(a2), sb2 = extract_surface(b2);
    REQUIRE(!sa1.empty());
    REQUIRE(!sb1.empty());
    CHECK(hausdorff(sa2, sb2) == doctest::Approx(2.0 * hausdorff(sa1, sb1)).epsilon(1e-12));
    CHECK(assd(sa2, sb2) == doctest::Approx(2.0 * assd(sa1, sb1)).epsilon(1e-12));
}

TEST_CASE("overlap metrics from confusion counts") {
    Volume r = Volume::create({3, 3, 3}, {1, 1, 1}, VolumeKind::Label, 0.0f);
    r.at(0, 0, 0) = r.at(0, 0, 1) = r.at(1, 1, 1) = r.at(2, 2, 2) = 1.0f;

    SUBCASE("identity gives all ones") {
        OverlapMetrics m = overlap_metrics(r, r, 0.1, 0.9);
        CHECK(*m.dsc == 1.0);
        CHECK(*m.iou == 1.0);
        CHECK(*m.sen == 1.0);
        CHECK(*m.ppv == 1.0);
        CHECK(*m.wdsc == 1.0);
    }
    SUBCASE("tp=2 fp=2 fn=2 case") {
        Volume p = Volume::create({3, 3, 3}, {1, 1, 1}, VolumeKind::Label, 0.0f);
        p.at(0, 0, 0) = p.at(0, 0, 1) = 1.0f;
        p.at(2, 0, 0) = p.at(0, 2, 0) = 1.0f;
        OverlapMetrics m = overlap_metrics(p, r, 0.5, 0.5);
        CHECK(*m.dsc == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(*m.iou == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        CHECK(*m.sen == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(*m.ppv == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("disjoint masks score zero dice") {
        Volume p = Volume::create({1, 1, 2}, {1, 1, 1}, VolumeKind::Label, 0.0f);
        Volume q = p;
        p.data = {1.0f, 0.0f};
        q.data = {0.0f, 1.0f};
        OverlapMetrics m = overlap_metrics(p, q, 0.1, 0.9);
        CHECK(*m.dsc == 0.0);
        CHECK(*m.iou == 0.0);
    }
    SUBCASE("empty reference leaves sensitivity unset") {
        Volume p = r;
        Volume empty = Volume::create({3, 3, 3}, {1, 1, 1}, VolumeKind::Label, 0.0f);
        OverlapMetrics m = overlap_metrics(p, empty, 0.1, 0.9);
        CHECK(!m.sen.has_value());
        CHECK(m.ppv.has_value());
    }
}

TEST_CASE("evaluate_case: perfect prediction and undefined markers") {
    Volume r = Volume::create({4, 4, 4}, {0.3, 0.25, 0.25}, VolumeKind::Label, 0.0f);
    for (int z = 1; z <= 2; ++z)
        for (int y = 1; y <= 2; ++y)
            for (int x = 1; x <= 2; ++x) r.at(z, y, x) = 1.0f;

    SUBCASE("labels re-used as probabilities are perfect") {
        Volume p = r.as_probability();
        CaseReport rep = evaluate_case(p, r, {}, "perfect");
        CHECK(*rep.dsc == 100.0);
        CHECK(*rep.iou == 100.0);
        CHECK(*rep.sen == 100.0);
        CHECK(*rep.ppv == 100.0);
        CHECK(*rep.wdsc == 100.0);
        CHECK(*rep.hd == 0.0);
        CHECK(*rep.assd == 0.0);
        CHECK(*rep.so == 100.0);
        CHECK(*rep.sd == 100.0);
    }
    SUBCASE("all-zero prediction leaves ppv and surface metrics unset") {
        Volume p = Volume::create({4, 4, 4}, {0.3, 0.25, 0.25}, VolumeKind::Probability, 0.0f);
        CaseReport rep = evaluate_case(p, r, {}, "empty");
        CHECK(!rep.ppv.has_value());
        CHECK(!rep.hd.has_value());
        CHECK(!rep.assd.has_value());
        CHECK(rep.sen.has_value());
        CHECK(*rep.sen == 0.0);
    }
    SUBCASE("dims mismatch names both triples") {
        Volume p = Volume::create({4, 4, 5}, {0.3, 0.25, 0.25}, VolumeKind::Probability, 0.0f);
        CHECK_THROWS_WITH_AS(evaluate_case(p, r, {}, "bad"),
                             doctest::Contains("(4,4,5)"), std::invalid_argument);
    }
    SUBCASE("oracle and accelerated paths agree") {
        Volume p = r.as_probability();
        p.at(1, 1, 1) = 0.2f;  // drop one foreground voxel
        EvalConfig fast_cfg;
        EvalConfig oracle_cfg;
        oracle_cfg.path = DistancePath::Exhaustive;
        CaseReport fast = evaluate_case(p, r, fast_cfg, "x");
        CaseReport oracle = evaluate_case(p, r, oracle_cfg, "x");
        CHECK(*fast.hd == doctest::Approx(*oracle.hd).epsilon(1e-12));
        CHECK(*fast.assd == doctest::Approx(*oracle.assd).epsilon(1e-12));
        CHECK(*fast.so == doctest::Approx(*oracle.so).epsilon(1e-12));
        CHECK(*fast.sd == doctest::Approx(*oracle.sd).epsilon(1e-12));
    }
}
