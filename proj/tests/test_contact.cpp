#include "terrasim/contact.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace terrasim;

namespace {

double orthonormality_error(const ContactFrame& f) {
  return (f.rotation.transpose() * f.rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

}  // namespace

TEST(ContactFrame, UpwardNormalGivesIdentity) {
  const ContactFrame f = build_contact_frame(Vec3(0, 0, 1));
  EXPECT_TRUE(f.tangent1().isApprox(Vec3(1, 0, 0)));
  EXPECT_TRUE(f.tangent2().isApprox(Vec3(0, 1, 0)));
  EXPECT_TRUE(f.normal().isApprox(Vec3(0, 0, 1)));
}

TEST(ContactFrame, DownwardNormalStaysRightHanded) {
  const ContactFrame f = build_contact_frame(Vec3(0, 0, -1));
  EXPECT_NEAR(f.rotation.determinant(), 1.0, 1e-12);
  EXPECT_LE(orthonormality_error(f), 1e-12);
}

TEST(ContactFrame, DiagonalNormal) {
  const ContactFrame f = build_contact_frame(Vec3(1, 1, 1));
  EXPECT_LE(orthonormality_error(f), 1e-12);
  EXPECT_TRUE(f.normal().isApprox(Vec3(1, 1, 1).normalized(), 1e-14));
}

TEST(ContactFrame, ZeroNormalThrows) {
  EXPECT_THROW(build_contact_frame(Vec3::Zero()), DegenerateInput);
  EXPECT_THROW(build_contact_frame(Vec3(1e-14, 0, 0)), DegenerateInput);
}

TEST(ContactFrame, RandomNormalsOrthonormal) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 n = random_unit(rng) * std::exp(std::uniform_real_distribution<double>(-5, 5)(rng));
    const ContactFrame f = build_contact_frame(n);
    ASSERT_LE(orthonormality_error(f), 1e-12);
    ASSERT_NEAR(f.rotation.determinant(), 1.0, 1e-12);
    ASSERT_LE((f.normal() - n.normalized()).norm(), 1e-12);
  }
}

TEST(PenaltyNormal, Examples) {
  PenaltyMaterial mat;
  EXPECT_EQ(normal_force_penalty(ContactState::from_gap(0.0, -0.5, Vec2::Zero()), mat), 0.0);

  mat.k_n = 1e4;
  mat.d_n = 0.0;
  EXPECT_NEAR(normal_force_penalty(ContactState::from_gap(-0.001, 0.0, Vec2::Zero()), mat), 10.0, 1e-12);

  mat.d_n = 1e3;
  // penetration rate -0.02 means separating at 0.02 m/s
  EXPECT_EQ(normal_force_penalty(ContactState::from_gap(-0.001, 0.02, Vec2::Zero()), mat), 0.0);
}

TEST(PenaltyTangential, Examples) {
  PenaltyMaterial mat;
  mat.k_t = 100.0;
  mat.d_t = 0.0;
  mat.mu = 0.5;
  ContactState s = ContactState::from_gap(-0.001, 0.0, Vec2::Zero());

  auto rest = tangential_force(s, Vec2::Zero(), 10.0, mat);
  EXPECT_EQ(rest.regime, Regime::kStick);
  EXPECT_EQ(rest.force, Vec2::Zero());

  s.shear = Vec2(0.01, 0.0);
  auto stick = tangential_force(s, Vec2::Zero(), 10.0, mat);
  EXPECT_EQ(stick.regime, Regime::kStick);
  EXPECT_NEAR(stick.force.x(), -1.0, 1e-12);
  EXPECT_NEAR(stick.force.y(), 0.0, 1e-12);

  s.shear = Vec2(0.1, 0.0);
  auto slip = tangential_force(s, Vec2(0.02, 0.0), 10.0, mat);
  EXPECT_EQ(slip.regime, Regime::kSlip);
  EXPECT_NEAR(slip.force.x(), -5.0, 1e-12);
  EXPECT_NEAR(slip.force.y(), 0.0, 1e-12);
}

TEST(ShearState, Examples) {
  PenaltyMaterial mat;
  ContactState active = ContactState::from_gap(-0.001, 0.0, Vec2::Zero());
  Vec2 s = update_shear_state(active, Vec2(0.1, 0.0), Regime::kStick, 0.001, mat);
  EXPECT_NEAR(s.x(), 1e-4, 1e-18);

  active.shear = Vec2(0.1, 0.0);
  s = update_shear_state(active, Vec2(0.1, 0.0), Regime::kSlip, 0.001, mat);
  EXPECT_NEAR(s.x(), 0.09, 1e-15);

  ContactState idle = ContactState::from_gap(0.01, 0.0, Vec2::Zero());
  s = update_shear_state(idle, Vec2(1.0, 1.0), Regime::kSeparated, 0.001, mat);
  EXPECT_EQ(s, Vec2::Zero());
}

TEST(ShearState, FreezeFlag) {
  PenaltyMaterial mat;
  mat.freeze_shear_in_slip = true;
  ContactState active = ContactState::from_gap(-0.001, 0.0, Vec2(0.1, 0.0));
  EXPECT_EQ(update_shear_state(active, Vec2(1, 0), Regime::kSlip, 0.001, mat), Vec2(0.1, 0.0));
}

TEST(ShearState, OvershootingDecayRejected) {
  PenaltyMaterial mat;
  mat.alpha = 1000.0;
  ContactState s;
  EXPECT_THROW(update_shear_state(s, Vec2::Zero(), Regime::kSeparated, 0.001, mat), ConfigError);
  EXPECT_THROW(update_shear_state(s, Vec2::Zero(), Regime::kSeparated, 0.0, mat), ConfigError);
}

TEST(WorldForce, Examples) {
  const ContactFrame f = build_contact_frame(Vec3(0, 0, 1));
  EXPECT_TRUE(assemble_world_force(f, 10.0, Vec2::Zero()).isApprox(Vec3(0, 0, 10)));
  EXPECT_NEAR(assemble_world_force(f, 3.0, Vec2(4.0, 0.0)).norm(), 5.0, 1e-12);
  EXPECT_EQ(assemble_world_force(f, 0.0, Vec2::Zero()), Vec3::Zero());
}

TEST(WorldForce, NormPreservedOnRandomFrames) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 2000; ++i) {
    const ContactFrame f = build_contact_frame(random_unit(rng));
    const double fn = std::abs(u(rng));
    const Vec2 ft(u(rng), u(rng));
    const double expected = fn * fn + ft.squaredNorm();
    ASSERT_NEAR(assemble_world_force(f, fn, ft).squaredNorm(), expected, 1e-9 * expected);
  }
}

TEST(Smoothstep, Examples) {
  EXPECT_EQ(smoothstep(-0.01, 0.001), 0.0);
  EXPECT_EQ(smoothstep(0.001, 0.001), 1.0);
  EXPECT_DOUBLE_EQ(smoothstep(0.0005, 0.001), 0.5);
}

TEST(Smoothstep, MonotoneAndFlatAtEnds) {
  const double w = 1e-3;
  double prev = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double s = smoothstep(w * i / 1000.0, w);
    ASSERT_GE(s, prev);
    prev = s;
  }
  const double eps = 1e-9;
  EXPECT_LT((smoothstep(eps, w) - smoothstep(-eps, w)) / (2 * eps) * w, 1e-5);
  EXPECT_LT((smoothstep(w + eps, w) - smoothstep(w - eps, w)) / (2 * eps) * w, 1e-5);
  EXPECT_NEAR(smoothstep_derivative(0.5 * w, w), 1.5 / w, 1e-9);
}

TEST(SmoothedNormal, Examples) {
  SmoothedContactParams p;
  EXPECT_EQ(normal_force_smoothed(0.0, 0.0, p), 0.0);
  EXPECT_NEAR(normal_force_smoothed(1e-3, 0.0, p), 10.0, 1e-12);
  EXPECT_NEAR(normal_force_smoothed(5e-4, 0.0, p), 2.5, 1e-12);
}

TEST(SmoothedNormal, SpringEnergyIntegratesForce) {
  SmoothedContactParams p;
  // Trapezoid quadrature of the quasi-static force as an independent oracle.
  const int n = 200000;
  const double d_max = 3e-3;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = d_max * i / n;
    const double b = d_max * (i + 1) / n;
    acc += 0.5 * (normal_force_smoothed(a, 0.0, p) + normal_force_smoothed(b, 0.0, p)) * (b - a);
    if (i % 20000 == 19999) ASSERT_NEAR(smoothed_spring_energy(b, p), acc, 1e-9);
  }
}

TEST(MuEffective, Examples) {
  SmoothedContactParams p;
  EXPECT_DOUBLE_EQ(mu_effective(0.0, p), 0.5);
  EXPECT_NEAR(mu_effective(1e3, p), 0.3, 1e-15);
  EXPECT_NEAR(mu_effective(p.v_crit, p), 0.3 + 0.2 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(mu_effective(p.v_crit, p), 0.3736, 1e-4);
}

TEST(MuEffective, MonotoneBounded) {
  SmoothedContactParams p;
  double prev = mu_effective(0.0, p);
  for (int i = 1; i < 5000; ++i) {
    const double m = mu_effective(i * 1e-5, p);
    ASSERT_LE(m, prev);
    ASSERT_GE(m, p.mu_d);
    ASSERT_LE(m, p.mu_s);
    prev = m;
  }
}

TEST(ContactPower, Examples) {
  ContactResult r;
  EXPECT_EQ(contact_power(r, -1.0, Vec2(1, 1)), 0.0);
  r.f_normal = 10.0;
  EXPECT_NEAR(contact_power(r, -0.01, Vec2::Zero()), -0.1, 1e-15);
  r.f_tangent = Vec2(-2.0, 0.0);
  EXPECT_LE(r.f_tangent.dot(Vec2(0.3, 0.0)), 0.0);
}

TEST(Validation, RejectsBadMaterials) {
  PenaltyMaterial m;
  m.mu = 2.5;
  EXPECT_THROW(m.validate(), ConfigError);
  m = PenaltyMaterial{};
  m.eps_v = 0.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m = PenaltyMaterial{};
  m.k_n = -1.0;
  EXPECT_THROW(m.validate(), ConfigError);

  SmoothedContactParams s;
  s.mu_d = 0.6;
  EXPECT_THROW(s.validate(), ConfigError);
  s = SmoothedContactParams{};
  s.w = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

// Randomized invariants over the penalty law.
TEST(PenaltyProperties, ConeNonAdhesionSlipDirection) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_real_distribution<double> pos(0, 1);
  for (int i = 0; i < 20000; ++i) {
    PenaltyMaterial mat;
    mat.k_n = 1e5 * pos(rng);
    mat.d_n = 1e3 * pos(rng);
    mat.k_t = 1e5 * pos(rng);
    mat.d_t = 1e2 * pos(rng);
    mat.mu = 2.0 * pos(rng);
    const ContactFrame f = build_contact_frame(Vec3(u(rng), u(rng), u(rng) + 1.5));
    const ContactState s = ContactState::from_gap(0.01 * u(rng), u(rng), Vec2(0.01 * u(rng), 0.01 * u(rng)));
    const Vec2 ut(u(rng), u(rng));
    const double un = u(rng);
    const ContactResult r = resolve_penalty(f, s, un, ut, mat);
    ASSERT_GE(r.f_normal, 0.0);
    ASSERT_LE(r.f_tangent.norm(), mat.mu * r.f_normal + 1e-9);
    if (r.regime == Regime::kSlip) {
      ASSERT_LE(r.f_tangent.dot(ut), 0.0);
      const double expected = -mat.mu * r.f_normal * ut.squaredNorm() / std::max(ut.norm(), mat.eps_v);
      ASSERT_NEAR(r.f_tangent.dot(ut), expected, 1e-9 * (1.0 + std::abs(expected)));
    }
    if (r.regime == Regime::kSeparated) {
      ASSERT_EQ(r.world_force, Vec3::Zero());
    }
  }
}

TEST(SmoothedProperties, ConeAndDissipation) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1, 1);
  SmoothedContactParams p;
  const ContactFrame f = build_contact_frame(Vec3(0, 0, 1));
  for (int i = 0; i < 20000; ++i) {
    const double d = 3e-3 * u(rng);
    const Vec2 ut(0.01 * u(rng), 0.01 * u(rng));
    const ContactResult r = resolve_smoothed(f, d, u(rng), ut, p);
    ASSERT_GE(r.f_normal, 0.0);
    ASSERT_LE(r.f_tangent.norm(), p.mu_s * r.f_normal + 1e-9);
    ASSERT_LE(r.f_tangent.dot(ut), 0.0);
  }
}
