#include "doctest.h"
#include "support.hpp"

using namespace cxtest;

TEST_SUITE("grid") {

TEST_CASE("bilinear_sample_hits_pixel_values_at_integer_positions") {
    std::mt19937_64 rng(1);
    const Image img = random_image(7, 5, rng);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 7; ++x) CHECK(bilinear_sample(img, x, y) == img.at(x, y));
    }
}

TEST_CASE("bilinear_sample_of_constant_image_is_constant") {
    const Image img(6, 6, 0.37);
    for (double x : {-3.0, 0.2, 2.5, 5.9, 9.0}) {
        for (double y : {-1.0, 0.0, 3.3, 7.0}) CHECK(bilinear_sample(img, x, y) == doctest::Approx(0.37).epsilon(1e-15));
    }
}

TEST_CASE("bilinear_sample_hand_value") {
    const Image img(2, 2, std::vector<double>{0, 1, 0, 1});
    CHECK(bilinear_sample(img, 0.5, 0.0) == 0.5);
    CHECK(bilinear_sample(img, 0.25, 0.5) == 0.25);
}

TEST_CASE("bilinear_sample_gradient_matches_finite_differences") {
    std::mt19937_64 rng(2);
    const Image img = random_image(9, 9, rng);
    for (int i = 0; i < 50; ++i) {
        const double x = uniform(rng, 0.1, 7.9), y = uniform(rng, 0.1, 7.9);
        if (std::abs(x - std::round(x)) < 1e-3 || std::abs(y - std::round(y)) < 1e-3) continue;
        const Sample s = bilinear_sample_with_gradient(img, x, y);
        const double h = 1e-6;
        CHECK(s.value == doctest::Approx(bilinear_sample(img, x, y)));
        CHECK(s.dx == doctest::Approx((bilinear_sample(img, x + h, y) - bilinear_sample(img, x - h, y)) / (2 * h)).epsilon(1e-6));
        CHECK(s.dy == doctest::Approx((bilinear_sample(img, x, y + h) - bilinear_sample(img, x, y - h)) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("bilinear_gradient_vanishes_along_clamped_axis") {
    std::vector<double> ramp(16);
    for (int i = 0; i < 16; ++i) ramp[i] = i / 15.0;
    const Image img(4, 4, ramp);
    const Sample s = bilinear_sample_with_gradient(img, -2.0, 1.5);
    CHECK(s.dx == 0.0);
    CHECK(s.dy == doctest::Approx(4.0 / 15.0));
    CHECK(s.value == doctest::Approx(6.0 / 15.0));
}

TEST_CASE("warp_with_zero_field_is_identity") {
    std::mt19937_64 rng(3);
    const Image img = random_image(11, 8, rng);
    CHECK(warp_image(img, DisplacementField(11, 8)) == img);
}

TEST_CASE("warp_pull_back_moves_bright_column_left") {
    Image img(5, 5, 0.0);
    for (int y = 0; y < 5; ++y) img.at(3, y) = 1.0;
    const Image out = warp_image(img, DisplacementField(5, 5, Vec2{1.0, 0.0}));
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 5; ++x) CHECK(out.at(x, y) == (x == 2 ? 1.0 : 0.0));
    }
}

TEST_CASE("warp_far_outside_uses_border_values") {
    std::mt19937_64 rng(4);
    const Image img = random_image(6, 4, rng);
    const Image out = warp_image(img, DisplacementField(6, 4, Vec2{100.0, -100.0}));
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 6; ++x) CHECK(out.at(x, y) == img.at(5, 0));
    }
}

TEST_CASE("warp_rejects_mismatched_field") {
    CHECK_THROWS_AS(warp_image(Image(4, 4), DisplacementField(5, 4)), DimensionMismatch);
}

TEST_CASE("soft_mask_warp_zero_field_is_one_hot") {
    std::mt19937_64 rng(5);
    const LabelMask m = random_mask(12, 12, LabelSemantics::RibPairs, rng, 3);
    const OccupancyStack occ = warp_mask_soft(m, DisplacementField(12, 12));
    REQUIRE(occ.labels == label_set(LabelSemantics::RibPairs));
    for (std::size_t p = 0; p < m.size(); ++p) {
        for (std::size_t l = 0; l < occ.labels.size(); ++l) {
            CHECK(occ.grids[l][p] == (m.labels()[p] == occ.labels[l] ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("soft_mask_occupancies_sum_to_one") {
    std::mt19937_64 rng(6);
    const LabelMask m = random_mask(10, 9, LabelSemantics::LungPair, rng, 2);
    const OccupancyStack occ = warp_mask_soft(m, random_field(10, 9, rng, 4.0));
    for (std::size_t p = 0; p < m.size(); ++p) {
        double s = 0.0;
        for (const auto &g : occ.grids) s += g[p];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("soft_mask_half_pixel_shift_splits_single_pixel") {
    LabelMask m(5, 5, LabelSemantics::Binary);
    m.set(2, 2, 1);
    const OccupancyStack occ = warp_mask_soft(m, DisplacementField(5, 5, Vec2{0.5, 0.0}));
    const auto &g = occ.grid_for(1);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 5; ++x) {
            const double expect = (y == 2 && (x == 1 || x == 2)) ? 0.5 : 0.0;
            CHECK(g[m.index(x, y)] == expect);
        }
    }
}

TEST_CASE("hard_mask_warp_identity_and_integer_shift") {
    std::mt19937_64 rng(7);
    const LabelMask m = random_mask(10, 10, LabelSemantics::RibPairs, rng, 2);
    CHECK(warp_mask_hard(m, DisplacementField(10, 10)) == m);
    const LabelMask s = warp_mask_hard(m, DisplacementField(10, 10, Vec2{2.0, -1.0}));
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 10; ++x) {
            CHECK(s.at(x, y) == m.at(std::min(x + 2, 9), std::max(y - 1, 0)));
        }
    }
}

TEST_CASE("hard_mask_warp_keeps_label_set") {
    std::mt19937_64 rng(8);
    const LabelMask m = random_mask(16, 16, LabelSemantics::LungPair, rng, 3);
    const LabelMask s = warp_mask_hard(m, random_field(16, 16, rng, 6.0));
    CHECK(s.semantics() == LabelSemantics::LungPair);
    for (auto v : s.labels()) CHECK(v <= 2);
}

TEST_CASE("label_mask_rejects_labels_outside_semantics") {
    LabelMask m(3, 3, LabelSemantics::RibPairs);
    CHECK_THROWS_AS(m.set(0, 0, 1), InvalidInput);
    CHECK_THROWS_AS(m.set(0, 0, 11), InvalidInput);
    CHECK_NOTHROW(m.set(0, 0, 10));
    CHECK_THROWS_AS(LabelMask(2, 1, LabelSemantics::Binary, {0, 2}), InvalidInput);
}

TEST_CASE("resample_mask_is_nearest_neighbour") {
    LabelMask m(4, 4, LabelSemantics::Binary);
    m.set(1, 2, 1);
    const LabelMask up = resample_mask(m, 8, 8);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) CHECK(up.at(x, y) == ((x / 2 == 1 && y / 2 == 2) ? 1 : 0));
    }
    CHECK(resample_mask(up, 4, 4) == m);
}

TEST_CASE("resample_image_preserves_constants") {
    const Image img(20, 20, 0.3);
    const Image small = resample_image(img, 7, 7);
    for (double v : small.data()) CHECK(v == doctest::Approx(0.3));
}

TEST_CASE("upsample_zero_field_stays_zero") {
    const DisplacementField up = upsample_field(DisplacementField(16, 16), 64, 48);
    for (const Vec2 &v : up.data()) CHECK(v == Vec2{});
}

TEST_CASE("upsample_uniform_field_scales_displacement") {
    const DisplacementField up = upsample_field(DisplacementField(64, 64, Vec2{1.0, -0.5}), 128, 128);
    for (const Vec2 &v : up.data()) {
        CHECK(v.x == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(v.y == doctest::Approx(-1.0).epsilon(1e-14));
    }
}

TEST_CASE("upsample_quadratic_field_within_interpolation_bound") {
    // Displacement c * X^2 in units of the image extent, X the normalised pixel centre.
    const double c = 0.05;
    const int n = 64, m = 1024;
    DisplacementField f(n, n);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double X = (x + 0.5) / n, Y = (y + 0.5) / n;
            f.at(x, y) = Vec2{n * c * X * X, n * c * Y * Y};
        }
    }
    const DisplacementField up = upsample_field(f, m, m);
    const double hcell = 1.0 / n;
    // Interior: |f''| h^2 / 8; outer half cell: linear extrapolation error c t (t + h), t = h/2.
    const double interior_bound = m * c * hcell * hcell / 4.0 + 1e-9;
    const double edge_bound = m * c * 0.75 * hcell * hcell + 1e-9;
    double worst_interior = 0.0, worst_edge = 0.0;
    for (int y = 0; y < m; ++y) {
        for (int x = 0; x < m; ++x) {
            const double X = (x + 0.5) / m, Y = (y + 0.5) / m;
            const double ex = std::abs(up.at(x, y).x - m * c * X * X);
            const double ey = std::abs(up.at(x, y).y - m * c * Y * Y);
            const bool edge = X < 0.5 / n || X > 1 - 0.5 / n || Y < 0.5 / n || Y > 1 - 0.5 / n;
            (edge ? worst_edge : worst_interior) = std::max(edge ? worst_edge : worst_interior, std::max(ex, ey));
        }
    }
    CHECK(worst_interior <= interior_bound);
    CHECK(worst_edge <= edge_bound);
}

TEST_CASE("upsample_reproduces_linear_fields_exactly") {
    DisplacementField f(8, 8);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) f.at(x, y) = Vec2{0.25 * x - 1.0, 0.1 * y + 0.05 * x};
    }
    const DisplacementField up = upsample_field(f, 32, 32);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            const double X = (x + 0.5) / 4.0 - 0.5, Y = (y + 0.5) / 4.0 - 0.5;
            CHECK(up.at(x, y).x == doctest::Approx(4.0 * (0.25 * X - 1.0)).epsilon(1e-12));
            CHECK(up.at(x, y).y == doctest::Approx(4.0 * (0.1 * Y + 0.05 * X)).epsilon(1e-12));
        }
    }
}

TEST_CASE("compose_uniform_fields_adds_them") {
    const DisplacementField c = compose_fields(DisplacementField(6, 6, Vec2{1.0, 0.0}), DisplacementField(6, 6, Vec2{0.0, 2.0}));
    for (const Vec2 &v : c.data()) CHECK(v == Vec2{1.0, 2.0});
}

TEST_CASE("compose_matches_sequential_warps_on_linear_content") {
    // Linear image content is reproduced exactly by bilinear sampling away from the border.
    Image img(20, 20);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 20; ++x) img.at(x, y) = 0.02 * x + 0.03 * y;
    }
    std::mt19937_64 rng(9);
    const DisplacementField a = random_field(20, 20, rng, 0.8);
    const DisplacementField b = random_field(20, 20, rng, 0.8);
    const Image twice = warp_image(warp_image(img, a), b);
    const Image once = warp_image(img, compose_fields(a, b));
    for (int y = 3; y < 17; ++y) {
        for (int x = 3; x < 17; ++x) CHECK(once.at(x, y) == doctest::Approx(twice.at(x, y)).epsilon(1e-12));
    }
}

}  // TEST_SUITE
