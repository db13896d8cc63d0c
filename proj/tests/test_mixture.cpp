#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sievemix/errors.hpp"
#include "sievemix/mixture.hpp"

using namespace sievemix;

namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

MixtureParams two_normal(double mu2 = 4.0, double s2 = 1.0) {
  auto n = ComponentFamily::normal();
  return MixtureParams::full({Component::make(0.5, n, 0.0, 1.0), Component::make(0.5, n, mu2, s2)});
}

// Width-parameterized uniforms: U(a, b) has center (a+b)/2 and width b - a.
Component box(double alpha, double a, double b) {
  return Component::make(alpha, ComponentFamily::uniform(), 0.5 * (a + b), b - a);
}

MixtureParams uniform_first() { return MixtureParams::full({box(1.0 / 3, -1, 1), box(2.0 / 3, -2, 2)}); }
MixtureParams uniform_second() { return MixtureParams::full({box(0.5, -2, 1), box(0.5, -1, 2)}); }

// Independent oracle: midpoint rule on a dense grid.
double riemann_l1(const MixtureParams& a, const MixtureParams& b, double lo, double hi, std::size_t cells) {
  double h = (hi - lo) / static_cast<double>(cells);
  double acc = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    double x = lo + (static_cast<double>(i) + 0.5) * h;
    acc += std::abs(mix_density(a, x) - mix_density(b, x)) * h;
  }
  return acc;
}

MixtureParams random_normal_mixture(std::mt19937_64& rng, std::size_t M) {
  std::uniform_real_distribution<double> loc(-5, 5), scale(0.2, 3), w(0.05, 1.0);
  std::vector<double> ws;
  double total = 0;
  for (std::size_t m = 0; m < M; ++m) total += ws.emplace_back(w(rng));
  std::vector<Component> comps;
  for (std::size_t m = 0; m < M; ++m) {
    comps.push_back(Component::make(ws[m] / total, ComponentFamily::normal(), loc(rng), scale(rng)));
  }
  return MixtureParams::full(std::move(comps));
}

}  // namespace

TEST_CASE("validation of weights and scales") {
  auto n = ComponentFamily::normal();
  CHECK_THROWS_AS(MixtureParams::full({Component::make(0.4, n, 0, 1), Component::make(0.4, n, 1, 1)}),
                  ValidationError);
  CHECK_THROWS_AS(MixtureParams::full({}), ValidationError);
  CHECK_THROWS_AS(Component::make(0.5, n, 0, 0), ValidationError);
  CHECK_THROWS_AS(MixtureParams::full({Component::make(-0.1, n, 0, 1), Component::make(1.1, n, 0, 1)}), ValidationError);
  CHECK_NOTHROW(MixtureParams::sub_probability({Component::make(0.4, n, 0, 1)}));
  CHECK(MixtureParams::sub_probability({}).size() == 0);
  CHECK_THROWS_AS(MixtureParams::sub_probability({Component::make(0.7, n, 0, 1), Component::make(0.4, n, 0, 1)}),
                  ValidationError);
  // within tolerance: renormalized to exactly one
  auto near = MixtureParams::full({Component::make(0.5 + 4e-13, n, 0, 1), Component::make(0.5, n, 1, 1)});
  CHECK(near.weight_sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("mix_density examples") {
  auto n = ComponentFamily::normal();
  auto dup = MixtureParams::full({Component::make(0.5, n, 0, 1), Component::make(0.5, n, 0, 1)});
  CHECK(mix_density(dup, 0.0) == doctest::Approx(kInvSqrt2Pi).epsilon(1e-14));
  auto single_box = MixtureParams::full({Component::make(1.0, ComponentFamily::uniform(), 0.0, 2.0)});
  CHECK(mix_density(single_box, 0.9) == doctest::Approx(0.5));
  CHECK(mix_density(uniform_first(), 1.5) == doctest::Approx(2.0 / 3.0 * 0.25));
}

TEST_CASE("log_likelihood examples") {
  auto n = ComponentFamily::normal();
  auto single = MixtureParams::full({Component::make(1.0, n, 0, 1)});
  std::vector<double> zero{0.0};
  CHECK(log_likelihood(single, zero) == doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  auto box1 = MixtureParams::full({Component::make(1.0, ComponentFamily::uniform(), 0.0, 2.0)});
  std::vector<double> five{5.0};
  CHECK(log_likelihood(box1, five) == -std::numeric_limits<double>::infinity());
  std::vector<double> two{0.0, 4.0};
  double expected = 2.0 * std::log(0.5 * kInvSqrt2Pi + 0.5 * kInvSqrt2Pi * std::exp(-8.0));
  CHECK(log_likelihood(two_normal(), two) == doctest::Approx(expected).epsilon(1e-13));
  // 0.5 phi(0) (1 + e^-8) = 0.199537
  CHECK(expected == doctest::Approx(-3.2235).epsilon(1e-4));
  std::vector<double> none;
  CHECK_THROWS_AS(log_likelihood(single, none), ValidationError);
}

TEST_CASE("log density agrees with density and survives tiny scales") {
  auto theta = two_normal();
  for (double x : {-3.0, 0.0, 1.7, 4.0, 9.0}) {
    CHECK(std::exp(mix_log_density(theta, x)) == doctest::Approx(mix_density(theta, x)).epsilon(1e-13));
  }
  auto n = ComponentFamily::normal();
  auto spike = MixtureParams::full({Component::with_log_scale(0.1, n, 0.5, -800.0), Component::make(0.9, n, 0, 1)});
  CHECK(spike[0].sigma == 0.0);
  CHECK(mix_log_density(spike, 0.5) == doctest::Approx(std::log(0.1 * kInvSqrt2Pi) + 800.0));
  CHECK(std::isfinite(mix_log_density(spike, 2.0)));
}

TEST_CASE("sub-mixtures") {
  auto theta = two_normal();
  CHECK(sub_density(theta, SubMixtureSelector({0}, 2), 0.0) == doctest::Approx(0.5 * kInvSqrt2Pi));
  CHECK(sub_density(theta, SubMixtureSelector::all(2), 1.3) == doctest::Approx(mix_density(theta, 1.3)));
  CHECK(sub_density(uniform_first(), SubMixtureSelector({1}, 2), 0.0) == doctest::Approx(2.0 / 3.0 * 0.25));
  CHECK_THROWS_AS(SubMixtureSelector({}, 2), ValidationError);
  CHECK_THROWS_AS(SubMixtureSelector({2}, 2), ValidationError);
  CHECK_THROWS_AS(SubMixtureSelector({0, 0}, 2), ValidationError);
  auto r = restrict_to(theta, SubMixtureSelector({1}, 2));
  CHECK(r.is_sub_probability());
  CHECK(r.weight_sum() == doctest::Approx(0.5));
}

TEST_CASE("local_sup_density") {
  auto single = MixtureParams::full({Component::make(1.0, ComponentFamily::normal(), 0, 1)});
  double v = local_sup_density(single, 0.1, 0.0);
  CHECK(v >= kInvSqrt2Pi / 0.9);
  CHECK(local_sup_density(single, 1e-7, 0.7) - mix_density(single, 0.7) <= 1e-6);
  CHECK_THROWS_AS(local_sup_density(single, 0.0, 0.0), ValidationError);
}

TEST_CASE("l1_distance examples") {
  auto theta = two_normal();
  CHECK(l1_distance(theta, theta).value <= 1e-10);
  CHECK(l1_distance(uniform_first(), uniform_second()).value <= 1e-6);
  auto far_a = MixtureParams::full({Component::make(1.0, ComponentFamily::uniform(), -10, 1)});
  auto far_b = MixtureParams::full({Component::make(1.0, ComponentFamily::uniform(), 10, 1)});
  CHECK(l1_distance(far_a, far_b).value == doctest::Approx(2.0).epsilon(1e-9));
  auto custom = ComponentFamily::custom("bump", [](double z) { return std::abs(z) < 1 ? 0.75 * (1 - z * z) : 0.0; });
  auto bad = MixtureParams::full({Component::make(1.0, custom, 0, 1)});
  CHECK_THROWS_AS(l1_distance(bad, theta), ValidationError);
}

TEST_CASE("l1_distance against a Riemann oracle") {
  auto a = two_normal();
  auto b = two_normal(3.0, 2.0);
  IntegralEstimate est = l1_distance(a, b);
  double oracle = riemann_l1(a, b, -30, 40, 700000);
  CHECK(est.value == doctest::Approx(oracle).epsilon(1e-6));
  CHECK(est.error < 1e-6);
}

TEST_CASE("param_set_distance examples") {
  auto theta = two_normal();
  std::vector<MixtureParams> self{theta};
  CHECK(param_set_distance(theta, self) == 0.0);

  auto n = ComponentFamily::normal();
  auto swapped = MixtureParams::full({Component::make(0.5, n, 4, 1), Component::make(0.5, n, 0, 1)});
  CHECK(param_set_distance(swapped, self) == 0.0);

  auto single = MixtureParams::full({Component::make(1.0, n, 0, 1), Component::make(0.0, n, 0, 1)});
  auto zero_elsewhere = MixtureParams::full({Component::make(1.0, n, 0, 1), Component::make(0.0, n, 37, 0.01)});
  std::vector<MixtureParams> single_set{single};
  CHECK(param_set_distance(zero_elsewhere, single_set) == 0.0);

  // Only the second uniform parameterization as a representative.
  std::vector<MixtureParams> second{uniform_second()};
  double expected = std::sqrt(2.0 * (1.0 / 36 + 0.25 + 1.0));
  CHECK(param_set_distance(uniform_first(), second) == doctest::Approx(expected).epsilon(1e-14));
  std::vector<MixtureParams> both{uniform_first(), uniform_second()};
  CHECK(param_set_distance(uniform_first(), both) == 0.0);
  CHECK(param_set_distance(uniform_second(), both) == 0.0);

  std::vector<MixtureParams> mismatched{MixtureParams::full({Component::make(1.0, n, 0, 1)})};
  CHECK_THROWS_AS(param_set_distance(theta, mismatched), ValidationError);
}

TEST_CASE("param_set_distance only permutes same-kind components") {
  auto n = ComponentFamily::normal();
  auto t = ComponentFamily::student_t(4.0);
  auto a = MixtureParams::full({Component::make(0.5, n, 0, 1), Component::make(0.5, t, 3, 1)});
  auto b = MixtureParams::full({Component::make(0.5, n, 3, 1), Component::make(0.5, t, 0, 1)});
  std::vector<MixtureParams> set{b};
  CHECK(param_set_distance(a, set) == doctest::Approx(std::sqrt(18.0)));
}

TEST_CASE("property: density is affine in the weights") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0), xs(-8, 8);
  auto base = random_normal_mixture(rng, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w1(3), w2(3);
    double s1 = 0, s2 = 0;
    for (int m = 0; m < 3; ++m) s1 += w1[m] = u(rng), s2 += w2[m] = u(rng);
    auto with = [&](const std::vector<double>& w, double s) {
      std::vector<Component> comps;
      for (int m = 0; m < 3; ++m) {
        Component c = base[m];
        c.alpha = w[m] / s;
        comps.push_back(c);
      }
      return MixtureParams::full(std::move(comps));
    };
    std::vector<double> avg(3);
    for (int m = 0; m < 3; ++m) avg[m] = 0.5 * (w1[m] / s1 + w2[m] / s2);
    auto a = with(w1, s1), b = with(w2, s2), c = with(avg, 1.0);
    double x = xs(rng);
    CHECK(std::abs(mix_density(c, x) - 0.5 * (mix_density(a, x) + mix_density(b, x))) <= 1e-14);
  }
}

TEST_CASE("property: l1 symmetry and triangle inequality") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 12; ++trial) {
    auto a = random_normal_mixture(rng, 2), b = random_normal_mixture(rng, 3), c = random_normal_mixture(rng, 2);
    auto ab = l1_distance(a, b), ba = l1_distance(b, a), bc = l1_distance(b, c), ac = l1_distance(a, c);
    CHECK(std::abs(ab.value - ba.value) <= 1e-12);
    CHECK(ac.value <= ab.value + bc.value + ab.error + bc.error + ac.error);
    CHECK(ab.value >= 0.0);
    CHECK(ab.value <= 2.0);
  }
}

TEST_CASE("property: log-likelihood adds over concatenated data") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g(1.0, 3.0);
  auto theta = random_normal_mixture(rng, 3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(1 + trial), b(7 + 2 * trial);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng);
    std::vector<double> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    double whole = log_likelihood(theta, ab);
    double parts = log_likelihood(theta, a) + log_likelihood(theta, b);
    CHECK(std::abs(whole - parts) <= 1e-12 * std::abs(whole));
  }
}

TEST_CASE("property: sub_density never exceeds mix_density") {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> xs(-10, 10);
  for (int trial = 0; trial < 100; ++trial) {
    auto theta = random_normal_mixture(rng, 4);
    std::vector<std::size_t> idx;
    for (std::size_t m = 0; m < 4; ++m) {
      if (rng() % 2) idx.push_back(m);
    }
    if (idx.empty()) idx.push_back(rng() % 4);
    double x = xs(rng);
    CHECK(sub_density(theta, SubMixtureSelector(idx, 4), x) <= mix_density(theta, x));
  }
}

TEST_CASE("property: local sup dominates the point value") {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> xs(-6, 6), rhos(1e-4, 0.5);
  for (int trial = 0; trial < 40; ++trial) {
    auto theta = random_normal_mixture(rng, 2);
    double x = xs(rng), rho = rhos(rng);
    CHECK(local_sup_density(theta, rho, x) >= mix_density(theta, x));
  }
}
