#include "mpcloc/geom.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mpcloc;

namespace {
constexpr double c = kSpeedOfLight;
}

TEST(CompleteMpc, ZeroDisplacementKeepsParameters) {
    const Vec3 dir = Vec3(1, 2, -2).normalized();
    const MpcTrue m = complete_mpc(Vec3(1, 1, 1), Vec3(1, 1, 1), 30e-9, dir);
    EXPECT_DOUBLE_EQ(m.tau_b, m.tau_a);
    EXPECT_LT((m.dir_b - dir).norm(), 1e-15);
}

TEST(CompleteMpc, CollinearAddsDistance) {
    const MpcTrue m = complete_mpc(Vec3::Zero(), Vec3(2, 0, 0), 5.0 / c, Vec3::UnitX());
    EXPECT_NEAR(m.tau_b * c, 7.0, 1e-12);
    EXPECT_LT((m.dir_b - Vec3::UnitX()).norm(), 1e-15);
    EXPECT_NEAR(delay_diff_true(m) * c, 2.0, 1e-12);
    EXPECT_DOUBLE_EQ(pwa_residual(m, Vec3(2, 0, 0)), 0.0);
}

TEST(CompleteMpc, PerpendicularCase) {
    const Vec3 d(2, 0, 0);
    const MpcTrue m = complete_mpc(Vec3::Zero(), d, 5.0 / c, Vec3::UnitY());
    EXPECT_NEAR(m.tau_b * c, 5.385164807134504, 1e-12);
    EXPECT_LT((m.dir_b - Vec3(2, 5, 0) / 5.385164807134504).norm(), 1e-15);
    EXPECT_NEAR(delay_diff_true(m) * c, 0.38516480713450374, 1e-12);
    EXPECT_NEAR(pwa_residual(m, d), -0.38516480713450374, 1e-12);
    EXPECT_NEAR(projection_residual(m, d), 0.0, 1e-12);
    EXPECT_LT(vector_identity_residual(m, d).norm(), 1e-12);
    EXPECT_LE(std::abs(c * delay_diff_true(m)), d.norm());
}

TEST(CompleteMpc, Errors) {
    EXPECT_THROW(complete_mpc(Vec3::Zero(), Vec3(1, 0, 0), 0.0, Vec3::UnitX()), InvalidParams);
    EXPECT_THROW(complete_mpc(Vec3::Zero(), Vec3(1, 0, 0), 1e-9, Vec3(1, 1, 0)), InvalidParams);
    // Virtual source at B: pos_a - c*tau_a*dir_a == pos_b.
    EXPECT_THROW(complete_mpc(Vec3::Zero(), Vec3(-3, 0, 0), 3.0 / c, Vec3::UnitX()), DegenerateGeometry);
}

TEST(GeomProperties, IdentitiesOnRandomScenarios) {
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Scenario s = testutil::random_scenario(0.5 + (i % 9), 3, 4, static_cast<std::uint64_t>(i));
        const Vec3 d = s.relative_position();
        for (const auto& m : s.mpcs) {
            ASSERT_LE(std::abs(c * delay_diff_true(m)), d.norm() + 1e-9);
            worst = std::max(worst, vector_identity_residual(m, d).norm());
            worst = std::max(worst, std::abs(projection_residual(m, d)));
            worst = std::max(worst, std::abs(pair_vector(m.dir_a, m.dir_b).dot(d) - c * delay_diff_true(m)));
            ASSERT_TRUE(is_unit(m.dir_b));
        }
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(GeomProperties, PlaneWaveResidualShrinksWithPathLength) {
    const Vec3 d(2, 0, 0);
    double prev = 1e9;
    for (double l : {5.0, 20.0, 100.0, 500.0, 2000.0}) {
        const MpcTrue m = complete_mpc(Vec3::Zero(), d, l / c, Vec3::UnitY());
        const double r = std::abs(pwa_residual(m, d));
        EXPECT_LT(r, prev);
        prev = r;
    }
    const MpcTrue far = complete_mpc(Vec3::Zero(), d, 1000.0 * d.norm() / c, Vec3(1, 1, 1).normalized());
    EXPECT_LT(std::abs(pwa_residual(far, d)), 1e-3 * d.norm());
}

TEST(GeomProperties, SwappingRolesNegatesDelayDifference) {
    const Vec3 pa(0.3, -1, 2), pb(2.5, 0.5, 1);
    const Vec3 dir = Vec3(-1, 2, 0.5).normalized();
    const MpcTrue ab = complete_mpc(pa, pb, 40e-9, dir);
    // Same virtual source, seen with B as the reference node.
    const MpcTrue ba = complete_mpc(pb, pa, ab.tau_b, ab.dir_b);
    EXPECT_NEAR(delay_diff_true(ba), -delay_diff_true(ab), 1e-20);
    EXPECT_LT((ba.dir_b - ab.dir_a).norm(), 1e-9);
}

TEST(Scenario, GroupingHelpers) {
    const Scenario s = sample_scenario(2.0, SvParams{}, 3, {2, 4, 1}, 5);
    EXPECT_EQ(s.total_mpcs(), 7u);
    EXPECT_EQ(s.observer_count(), 3);
    EXPECT_EQ(s.mpcs_per_observer(), (std::vector<int>{2, 4, 1}));
}
