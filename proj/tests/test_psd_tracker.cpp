#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "cetk/psd_tracker.hpp"
#include "util.hpp"

using cetk::PairSet;
using cetk::PsdTracker;
using cetk::TfTensor;

namespace {

TfTensor random_frame_tensor(std::mt19937_64& gen, int channels, int frames, int bins) {
  std::normal_distribution<double> d;
  TfTensor tf(channels, frames, bins);
  for (auto& v : tf.values) v = {d(gen), d(gen)};
  return tf;
}

}  // namespace

TEST_CASE("constructor validation", "[psd]") {
  REQUIRE_THROWS_AS(PsdTracker(2, 16, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(PsdTracker(2, 16, -0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(PsdTracker(0, 16, 0.5), std::invalid_argument);
  PairSet bad;
  bad.pairs = {{1, 1}};
  REQUIRE_THROWS_AS(PsdTracker(2, 16, 0.5, bad), std::invalid_argument);
  REQUIRE_THROWS_AS(PsdTracker(2, 16, 0.5, PairSet{}), std::invalid_argument);
}

TEST_CASE("lambda zero collapses to the instantaneous outer product", "[psd]") {
  auto gen = testutil::rng(11);
  auto tf = random_frame_tensor(gen, 3, 4, 8);
  PsdTracker t(3, 8, 0.0);
  for (int l = 0; l < 4; ++l) {
    t.update(tf, l);
    for (int c = 0; c < 3; ++c)
      for (int f = 0; f < 8; ++f)
        REQUIRE_THAT(t.auto_psd(c, f),
                     Catch::Matchers::WithinRel(std::norm(tf.at(c, l, f)), 1e-12));
    int i = 0;
    for (auto [p, q] : t.pairs().pairs) {
      for (int f = 0; f < 8; ++f) {
        const auto expected = tf.at(p, l, f) * std::conj(tf.at(q, l, f));
        REQUIRE(std::abs(t.cross_psd(i, f) - expected) < 1e-12 * (1 + std::abs(expected)));
      }
      ++i;
    }
  }
}

TEST_CASE("constant frames converge geometrically with ratio lambda", "[psd]") {
  auto gen = testutil::rng(12);
  auto tf = random_frame_tensor(gen, 2, 1, 4);
  const double lambda = 0.68;
  PsdTracker t(2, 4, lambda);
  const double target = std::norm(tf.at(0, 0, 2));
  double prev_err = target;  // error before the first update: psd starts at 0
  for (int l = 0; l < 30; ++l) {
    t.update(tf, 0);
    const double err = std::abs(t.auto_psd(0, 2) - target);
    REQUIRE_THAT(err, Catch::Matchers::WithinRel(prev_err * lambda, 1e-9));
    prev_err = err;
  }
}

TEST_CASE("zero frames keep all PSDs at zero and flag low energy", "[psd]") {
  TfTensor zeros(2, 1, 4);
  PsdTracker t(2, 4, 0.68);
  for (int i = 0; i < 10; ++i) t.update(zeros, 0);
  for (int f = 0; f < 4; ++f) {
    REQUIRE(t.auto_psd(0, f) == 0.0);
    REQUIRE(t.auto_psd(1, f) == 0.0);
    auto c = t.coherence(0, f, {0.25, 0.0});
    REQUIRE(c.low_energy);
    REQUIRE(c.value == std::complex<double>(0.25, 0.0));
  }
}

TEST_CASE("identical channels clamp to unit-magnitude zero-phase coherence", "[psd]") {
  auto gen = testutil::rng(13);
  TfTensor tf = random_frame_tensor(gen, 1, 6, 8);
  TfTensor two(2, 6, 8);
  for (int l = 0; l < 6; ++l)
    for (int f = 0; f < 8; ++f) two.at(0, l, f) = two.at(1, l, f) = tf.at(0, l, f);
  PsdTracker t(2, 8, 0.5);
  for (int l = 0; l < 6; ++l) t.update(two, l);
  for (int f = 0; f < 8; ++f) {
    auto c = t.coherence(0, f);
    REQUIRE_FALSE(c.low_energy);
    REQUIRE_THAT(std::abs(c.value),
                 Catch::Matchers::WithinAbs(1.0 - PsdTracker::kCoherenceEps, 1e-12));
    REQUIRE_THAT(std::arg(c.value), Catch::Matchers::WithinAbs(0.0, 1e-12));
  }
}

TEST_CASE("lambda zero gives rank-one unit-magnitude coherence pre-clamp", "[psd]") {
  auto gen = testutil::rng(14);
  auto tf = random_frame_tensor(gen, 2, 1, 8);
  PsdTracker t(2, 8, 0.0);
  t.update(tf, 0);
  for (int f = 0; f < 8; ++f) {
    auto c = t.coherence(0, f);
    // |cross| / sqrt(auto_p auto_q) == 1 exactly for a single frame; the
    // tracker clamps it to 1 - eps.
    REQUIRE_THAT(std::abs(c.value),
                 Catch::Matchers::WithinAbs(1.0 - PsdTracker::kCoherenceEps, 1e-12));
  }
}

TEST_CASE("cross-PSD magnitude never exceeds the auto-PSD bound", "[psd]") {
  auto gen = testutil::rng(15);
  PsdTracker t(3, 16, 0.9);
  for (int l = 0; l < 200; ++l) {
    auto tf = random_frame_tensor(gen, 3, 1, 16);
    t.update(tf, 0);
    int i = 0;
    for (auto [p, q] : t.pairs().pairs) {
      for (int f = 0; f < 16; ++f) {
        const double bound = std::sqrt(t.auto_psd(p, f) * t.auto_psd(q, f));
        REQUIRE(std::abs(t.cross_psd(i, f)) <= bound * (1.0 + 1e-12));
      }
      ++i;
    }
  }
}

TEST_CASE("independent white noise decorrelates under averaging", "[psd]") {
  // Monte-Carlo oracle: with lambda = 0.95 the mean coherence magnitude of
  // independent channels settles well below 0.25.
  auto gen = testutil::rng(16);
  double mag_sum = 0.0;
  long mag_count = 0;
  for (int run = 0; run < 20; ++run) {
    PsdTracker t(2, 8, 0.95);
    TfTensor tf(2, 1, 8);
    std::normal_distribution<double> d;
    for (int l = 0; l < 2000; ++l) {
      for (auto& v : tf.values) v = {d(gen), d(gen)};
      t.update(tf, 0);
    }
    for (int f = 0; f < 8; ++f) {
      mag_sum += std::abs(t.coherence(0, f).value);
      ++mag_count;
    }
  }
  REQUIRE(mag_sum / mag_count < 0.25);
}

TEST_CASE("stationary coherent mixtures recover the true coherence", "[psd]") {
  // Two channels sharing a common component: true coherence = a^2/(a^2+1)
  // with unit-variance shared and private parts.
  auto gen = testutil::rng(17);
  std::normal_distribution<double> d;
  const double a = 1.0;
  const double expected = a * a / (a * a + 1.0);
  double est_sum = 0.0;
  int est_count = 0;
  for (int run = 0; run < 10; ++run) {
    PsdTracker t(2, 4, 0.99);
    TfTensor tf(2, 1, 4);
    for (int l = 0; l < 5000; ++l) {
      for (int f = 0; f < 4; ++f) {
        const std::complex<double> shared{d(gen), d(gen)};
        tf.at(0, 0, f) = a * shared + std::complex<double>{d(gen), d(gen)};
        tf.at(1, 0, f) = a * shared + std::complex<double>{d(gen), d(gen)};
      }
      t.update(tf, 0);
    }
    for (int f = 0; f < 4; ++f) {
      est_sum += t.coherence(0, f).value.real();
      ++est_count;
    }
  }
  REQUIRE_THAT(est_sum / est_count, Catch::Matchers::WithinAbs(expected, 0.05));
}

TEST_CASE("hermitian symmetry of the pair coherence", "[psd]") {
  // Swapping the pair conjugates the cross-PSD; verify via a mirrored tracker.
  auto gen = testutil::rng(18);
  PairSet fwd, rev;
  fwd.pairs = {{0, 1}};
  rev.pairs = {{0, 1}};
  PsdTracker a(2, 8, 0.8, fwd), b(2, 8, 0.8, rev);
  TfTensor tf(2, 1, 8), swapped(2, 1, 8);
  std::normal_distribution<double> d;
  for (int l = 0; l < 50; ++l) {
    for (int f = 0; f < 8; ++f) {
      tf.at(0, 0, f) = {d(gen), d(gen)};
      tf.at(1, 0, f) = {d(gen), d(gen)};
      swapped.at(0, 0, f) = tf.at(1, 0, f);
      swapped.at(1, 0, f) = tf.at(0, 0, f);
    }
    a.update(tf, 0);
    b.update(swapped, 0);
  }
  for (int f = 0; f < 8; ++f) {
    const auto ca = a.coherence(0, f).value, cb = b.coherence(0, f).value;
    REQUIRE(std::abs(ca - std::conj(cb)) < 1e-12);
  }
}

TEST_CASE("warmup window and update validation", "[psd]") {
  PsdTracker t(2, 4, 0.68);
  REQUIRE(t.in_warmup());
  TfTensor tf(2, 1, 4);
  tf.values.assign(tf.values.size(), {1.0, 0.0});
  for (int l = 0; l < 5; ++l) {
    t.update(tf, 0);
    REQUIRE(t.in_warmup());
  }
  t.update(tf, 0);
  REQUIRE_FALSE(t.in_warmup());

  TfTensor wrong(3, 1, 4);
  REQUIRE_THROWS_AS(t.update(wrong, 0), std::invalid_argument);
}
