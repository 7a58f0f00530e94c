#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>

#include "doctest.h"
#include "risloc/channel.hpp"
#include "risloc/errors.hpp"
#include "risloc/geometry.hpp"

using namespace risloc;

namespace {

Scene paper_scene(int rows = 8, int cols = 8) {
  Scene s;
  s.bs_position = {40.0, -40.0, -10.0};
  s.ris_position = {0.0, 0.0, 0.0};
  s.ue_region.center = {20.0, 0.0, -20.0};
  s.ue_region.half_extent = {15.0, 35.0, 0.0};
  s.ris_rows = rows;
  s.ris_cols = cols;
  s.spacing_factor = 1.0;
  s.rician_factor = 10.0;
  s.pathloss_direct = {32.6, 36.7};
  s.pathloss_reflected = {30.0, 22.0};
  s.noise_power = 1.0;
  return s;
}

}  // namespace

TEST_CASE("angles_from_positions matches hand-evaluated direction cosines") {
  const Eigen::Vector3d ris(0, 0, 0);
  const AnglePair a = angles_from_positions({20, 0, -20}, ris);
  CHECK(a.sin_az_cos_el == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(a.sin_el == doctest::Approx(-0.70711).epsilon(1e-5));
  CHECK((Eigen::Vector3d(20, 0, -20) - ris).norm() ==
        doctest::Approx(28.28427).epsilon(1e-6));

  const AnglePair below = angles_from_positions({0, 0, -5}, ris);
  CHECK(below.sin_az_cos_el == doctest::Approx(0.0));
  CHECK(below.sin_el == doctest::Approx(-1.0));

  const AnglePair yaxis = angles_from_positions({0, 7, 0}, ris);
  CHECK(yaxis.sin_az_cos_el == doctest::Approx(1.0));
  CHECK(yaxis.sin_el == doctest::Approx(0.0));
}

TEST_CASE("angles_from_positions rejects zero distance") {
  CHECK_THROWS_AS(angles_from_positions({1, 2, 3}, {1, 2, 3}),
                  DegenerateGeometryError);
}

TEST_CASE("angles from geometry stay on the unit disc") {
  Rng rng(11, 0, StreamRole::kGraphGen);
  const Eigen::Vector3d ris(1.0, -2.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d p(rng.uniform(-50, 50), rng.uniform(-50, 50),
                            rng.uniform(-50, 50));
    if ((p - ris).norm() < 1e-6) continue;
    CHECK(angles_from_positions(p, ris).is_unit_direction());
  }
}

TEST_CASE("steering_vector enumerated example and unit modulus") {
  Scene s = paper_scene(2, 2);  // N=4, N_c=2
  s.spacing_factor = 1.0;
  const Eigen::VectorXcd a = steering_vector({M_PI / 2.0, 0.0}, s);
  REQUIRE(a.size() == 4);
  CHECK(std::abs(a[0] - std::complex<double>(1, 0)) < 1e-12);
  CHECK(std::abs(a[1] - std::complex<double>(0, 1)) < 1e-12);
  CHECK(std::abs(a[2] - std::complex<double>(1, 0)) < 1e-12);
  CHECK(std::abs(a[3] - std::complex<double>(0, 1)) < 1e-12);

  const Eigen::VectorXcd ones = steering_vector({0.0, 0.0}, s);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(ones[i] - 1.0) < 1e-15);

  Scene big = paper_scene(8, 8);
  Rng rng(3, 0, StreamRole::kGraphGen);
  for (int trial = 0; trial < 50; ++trial) {
    const double az = rng.uniform(0, 2 * M_PI);
    const double el = rng.uniform(-M_PI / 2, M_PI / 2);
    const AnglePair angles{std::sin(az) * std::cos(el), std::sin(el)};
    const Eigen::VectorXcd v = steering_vector(angles, big);
    for (int i = 0; i < v.size(); ++i)
      CHECK(std::abs(std::abs(v[i]) - 1.0) <= 1e-12);
  }
}

TEST_CASE("pathloss_amplitude hand-evaluated values") {
  CHECK(pathloss_amplitude(1.0, {30.0, 22.0}) ==
        doctest::Approx(0.031623).epsilon(1e-4));
  CHECK(pathloss_amplitude(45.8258, {32.6, 36.7}) ==
        doctest::Approx(2.098e-5).epsilon(1e-3));
  CHECK(pathloss_amplitude(10.0, {30.0, 22.0}) ==
        doctest::Approx(2.512e-3).epsilon(1e-3));
  CHECK_THROWS_AS(pathloss_amplitude(0.0, {30.0, 22.0}),
                  DegenerateGeometryError);
  CHECK_THROWS_AS(pathloss_amplitude(-1.0, {30.0, 22.0}),
                  DegenerateGeometryError);
}

TEST_CASE("snr_to_power") {
  CHECK(snr_to_power(0.0) == doctest::Approx(1.0));
  CHECK(snr_to_power(20.0) == doctest::Approx(100.0));
  CHECK(snr_to_power(13.0) == doctest::Approx(19.953).epsilon(1e-4));
}

TEST_CASE("sample_channel LOS limit reproduces the steering vector") {
  Scene s = paper_scene(4, 4);
  s.rician_factor = 1e12;
  const Eigen::Vector3d ue(20, 0, -20);
  const ChannelRealization ch = sample_channel(s, ue, {42, 0});
  const double kappa =
      pathloss_amplitude((ue - s.ris_position).norm(), s.pathloss_reflected);
  const Eigen::VectorXcd a =
      steering_vector(angles_from_positions(ue, s.ris_position), s);
  for (int i = 0; i < ch.h_r.size(); ++i)
    CHECK(std::abs(ch.h_r[i] - kappa * a[i]) / (kappa * std::abs(a[i])) <=
          1e-5);
}

TEST_CASE("sample_channel cascade is the element-wise product") {
  Scene s = paper_scene(4, 4);
  const ChannelRealization ch = sample_channel(s, {25, 10, -20}, {7, 3});
  for (int i = 0; i < ch.v_r.size(); ++i)
    CHECK(ch.v_r[i] == ch.h_r[i] * ch.g_r[i]);
}

TEST_CASE("sample_channel second moments at the paper Rician factor") {
  Scene s = paper_scene(2, 2);
  const Eigen::Vector3d ue(25, 5, -20);
  const double kappa =
      pathloss_amplitude((ue - s.ris_position).norm(), s.pathloss_reflected);
  const double rho =
      pathloss_amplitude((ue - s.bs_position).norm(), s.pathloss_direct);

  const int m = 20000;
  double sum_hr = 0.0, sum_hr_sq = 0.0;
  double sum_hd = 0.0, sum_hd_sq = 0.0;
  for (int i = 0; i < m; ++i) {
    const ChannelRealization ch =
        sample_channel(s, ue, {99, static_cast<std::uint64_t>(i)});
    const double p_hr = std::norm(ch.h_r[0]);
    const double p_hd = std::norm(ch.h_d);
    sum_hr += p_hr;
    sum_hr_sq += p_hr * p_hr;
    sum_hd += p_hd;
    sum_hd_sq += p_hd * p_hd;
  }
  const double mean_hr = sum_hr / m;
  const double se_hr =
      std::sqrt((sum_hr_sq / m - mean_hr * mean_hr) / m);
  CHECK(std::abs(mean_hr - kappa * kappa) <= 3.0 * se_hr);

  const double mean_hd = sum_hd / m;
  const double se_hd = std::sqrt((sum_hd_sq / m - mean_hd * mean_hd) / m);
  CHECK(std::abs(mean_hd - rho * rho) <= 3.0 * se_hd);
}

TEST_CASE("sample_channel pure NLOS mean vanishes") {
  Scene s = paper_scene(2, 2);
  s.rician_factor = 0.0;
  const Eigen::Vector3d ue(25, 5, -20);
  const double rho =
      pathloss_amplitude((ue - s.bs_position).norm(), s.pathloss_direct);
  const int m = 20000;
  std::complex<double> mean(0, 0);
  for (int i = 0; i < m; ++i)
    mean += sample_channel(s, ue, {5, static_cast<std::uint64_t>(i)}).h_d;
  mean /= static_cast<double>(m);
  // |h_d| has std rho; the complex mean over m draws has std rho/sqrt(m).
  CHECK(std::abs(mean) <= 3.0 * rho / std::sqrt(static_cast<double>(m)));
}

TEST_CASE("sample_channel rejects degenerate UE placement") {
  Scene s = paper_scene(2, 2);
  CHECK_THROWS_AS(sample_channel(s, s.ris_position, {1, 1}),
                  DegenerateGeometryError);
  CHECK_THROWS_AS(sample_channel(s, s.bs_position, {1, 1}),
                  DegenerateGeometryError);
}

TEST_CASE("sample_channel is bit-identical for a key regardless of order") {
  Scene s = paper_scene(4, 4);
  const Eigen::Vector3d ue(25, 5, -20);
  // Draw sample 17 cold, then again after drawing unrelated samples.
  const ChannelRealization a = sample_channel(s, ue, {123, 17});
  for (int i = 0; i < 5; ++i)
    (void)sample_channel(s, ue, {123, static_cast<std::uint64_t>(i)});
  const ChannelRealization b = sample_channel(s, ue, {123, 17});
  CHECK(a.h_d == b.h_d);
  for (int i = 0; i < a.h_r.size(); ++i) {
    CHECK(a.h_r[i] == b.h_r[i]);
    CHECK(a.g_r[i] == b.g_r[i]);
    CHECK(a.v_r[i] == b.v_r[i]);
  }
}

TEST_CASE("measure single-term cascade and direct-only cases") {
  ChannelRealization ch;
  ch.h_d = 0.0;
  ch.v_r = Eigen::VectorXcd::Zero(3);
  ch.v_r[0] = 1.0;
  ch.h_r = ch.g_r = Eigen::VectorXcd::Zero(3);
  PilotParams pilot;
  pilot.power = 1.0;
  Rng rng(0, 0, StreamRole::kNoise);
  const Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(3);
  CHECK(std::abs(measure(ch, ones, pilot, 0.0, rng) -
                 std::complex<double>(1, 0)) < 1e-15);

  ch.h_d = 1.0;
  ch.v_r.setZero();
  pilot.power = 4.0;
  CHECK(std::abs(measure(ch, ones, pilot, 0.0, rng) -
                 std::complex<double>(2, 0)) < 1e-15);
}

TEST_CASE("measure equals the brute-force dot product, and superposes") {
  Rng gen(77, 0, StreamRole::kGraphGen);
  const int n = 6;
  ChannelRealization ch;
  ch.h_d = {gen.normal(), gen.normal()};
  ch.v_r.resize(n);
  ch.h_r = ch.g_r = Eigen::VectorXcd::Zero(n);
  Eigen::VectorXcd theta1(n), theta2(n);
  for (int i = 0; i < n; ++i) {
    ch.v_r[i] = {gen.normal(), gen.normal()};
    theta1[i] = std::polar(1.0, gen.uniform(0, 2 * M_PI));
    theta2[i] = std::polar(1.0, gen.uniform(0, 2 * M_PI));
  }
  PilotParams pilot;
  pilot.power = 2.5;
  Rng rng(0, 0, StreamRole::kNoise);

  std::complex<double> dot(0, 0);
  for (int i = 0; i < n; ++i) dot += ch.v_r[i] * theta1[i];
  const std::complex<double> expect = std::sqrt(2.5) * (ch.h_d + dot);
  CHECK(std::abs(measure(ch, theta1, pilot, 0.0, rng) - expect) < 1e-12);

  // Linear in theta on the reflected term: y(t1+t2) + y(0) == y(t1) + y(t2).
  const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(n);
  const auto y = [&](const Eigen::VectorXcd& th) {
    Rng r(0, 0, StreamRole::kNoise);
    return measure(ch, th, pilot, 0.0, r);
  };
  CHECK(std::abs(y(theta1 + theta2) + y(zero) - y(theta1) - y(theta2)) <
        1e-12);
}

TEST_CASE("scene JSON round-trip and validation") {
  const Scene s = paper_scene();
  const Scene back = Scene::from_json(s.to_json());
  CHECK(back.to_json() == s.to_json());
  CHECK(back.fingerprint() == s.fingerprint());

  Scene bad = paper_scene();
  bad.noise_power = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = paper_scene();
  bad.rician_factor = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  CHECK_THROWS_WITH_AS(Scene::from_json("{}"),
                       doctest::Contains("bs_position"), ConfigError);
}

TEST_CASE("pilot params validation") {
  PilotParams p;
  p.power = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.power = 1.0;
  p.pilot_symbol = {0.5, 0.0};
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.pilot_symbol = {M_SQRT1_2, M_SQRT1_2};
  p.frames = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p.frames = 3;
  CHECK_NOTHROW(p.validate());
}
