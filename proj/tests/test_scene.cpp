#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include "cetk/scene.hpp"
#include "util.hpp"

using cetk::ArrayGeometry;
using cetk::Doa;

namespace {

ArrayGeometry two_mics(double d) {
  ArrayGeometry g;
  g.positions = {{0, 0, 0}, {d, 0, 0}};
  return g;
}

}  // namespace

TEST_CASE("diffuse field matches the sinc coherence model", "[scene]") {
  const double fs = 16000.0, d = 0.1;
  auto g = two_mics(d);
  auto field = cetk::synthesize_diffuse(g, static_cast<size_t>(30 * fs), fs, 99);
  REQUIRE(field.size() == 2);

  const int seg = 512;
  auto coh = testutil::welch_coherence(field[0], field[1], seg);

  // spot frequencies from the examples: 1 kHz (sinc ~ 0.5276) and the sinc
  // zero at c/(2d)
  auto coh_at = [&](double hz) { return coh[static_cast<int>(std::round(hz * seg / fs))]; };
  REQUIRE_THAT(coh_at(1000.0).real(), Catch::Matchers::WithinAbs(0.5276, 0.1));
  REQUIRE_THAT(coh_at(343.0 / (2 * d)).real(), Catch::Matchers::WithinAbs(0.0, 0.1));

  // whole-band check up to the spatial aliasing limit
  for (int k = 2; k < seg / 2; ++k) {
    const double hz = k * fs / seg;
    if (hz > 4000.0) break;
    const double model = cetk::diffuse_coherence(d, hz, g.speed_of_sound);
    CAPTURE(hz, model);
    REQUIRE_THAT(coh[k].real(), Catch::Matchers::WithinAbs(model, 0.1));
  }
}

TEST_CASE("diffuse field is stationary across halves", "[scene]") {
  const double fs = 16000.0;
  auto g = two_mics(0.08);
  auto field = cetk::synthesize_diffuse(g, static_cast<size_t>(20 * fs), fs, 7);
  const size_t half = field[0].size() / 2;

  const int seg = 512;
  auto first = testutil::welch_coherence({field[0].data(), half}, {field[1].data(), half}, seg);
  auto second = testutil::welch_coherence({field[0].data() + half, half},
                                          {field[1].data() + half, half}, seg);
  for (int k = 2; k < seg / 2; ++k) {
    if (k * fs / seg > 6000.0) break;
    REQUIRE_THAT(first[k].real(), Catch::Matchers::WithinAbs(second[k].real(), 0.2));
  }
}

TEST_CASE("single microphone degenerates to plain noise", "[scene]") {
  ArrayGeometry g;
  g.positions = {{0, 0, 0}};
  auto field = cetk::synthesize_diffuse(g, 16000, 16000.0, 3);
  REQUIRE(field.size() == 1);
  const double e = testutil::energy(field[0]) / field[0].size();
  REQUIRE_THAT(e, Catch::Matchers::WithinAbs(1.0, 0.2));  // ~unit variance
}

TEST_CASE("scene components add exactly and hit the target DDR", "[scene]") {
  const double fs = 16000.0;
  auto g = two_mics(0.1);
  auto src = cetk::speech_shaped_noise(static_cast<size_t>(5 * fs), fs, 11);
  Doa doa{0.4, std::numbers::pi / 2};

  for (double ddr : {-10.0, 0.0, 20.0}) {
    auto scene = cetk::synthesize_scene(g, doa, src, ddr, 5, fs);
    // bit-level additivity
    for (int c = 0; c < 2; ++c)
      for (size_t i = 0; i < scene.num_samples(); ++i)
        REQUIRE(scene.mixture[c][i] == scene.direct[c][i] + scene.diffuse[c][i]);

    double pd = 0.0, pn = 0.0;
    for (int c = 0; c < 2; ++c) {
      pd += testutil::energy(scene.direct[c]);
      pn += testutil::energy(scene.diffuse[c]);
    }
    REQUIRE_THAT(testutil::db10(pd / pn), Catch::Matchers::WithinAbs(ddr, 0.1));
  }

  REQUIRE_THROWS_AS(cetk::synthesize_scene(g, doa, std::vector<double>(100, 0.0), 0.0, 1, fs),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(cetk::synthesize_scene(g, doa, {}, 0.0, 1, fs), std::invalid_argument);
}

TEST_CASE("direct component phase matches the plane-wave model", "[scene]") {
  const double fs = 16000.0;
  auto g = two_mics(0.1);
  Doa doa{0.0, std::numbers::pi / 2};  // endfire: tau difference = -d/c
  auto gen = testutil::rng(12);
  auto src = testutil::white_noise(static_cast<size_t>(10 * fs), gen);
  auto direct = cetk::steer_direct(g, doa, src, fs);

  const int seg = 512;
  auto coh = testutil::welch_coherence(direct[0], direct[1], seg);
  const double dt = cetk::tdoa(g, doa, 0) - cetk::tdoa(g, doa, 1);
  for (int k = 4; k < seg / 2; ++k) {
    const double hz = k * fs / seg;
    if (hz > 0.8 * g.speed_of_sound / (2 * 0.1)) break;  // below aliasing
    REQUIRE(std::abs(coh[k]) > 0.98);
    const auto model = std::polar(1.0, 2.0 * std::numbers::pi * hz * dt);
    REQUIRE(std::abs(std::arg(coh[k] * std::conj(model))) < 0.05);
  }
}

TEST_CASE("extreme DDR reproduces the limiting coherence models", "[scene]") {
  const double fs = 16000.0, d = 0.1;
  auto g = two_mics(d);
  auto src = cetk::speech_shaped_noise(static_cast<size_t>(20 * fs), fs, 21);
  Doa broadside{std::numbers::pi / 2, std::numbers::pi / 2};

  const int seg = 512;
  auto run = [&](double ddr) {
    auto scene = cetk::synthesize_scene(g, broadside, src, ddr, 2, fs);
    return testutil::welch_coherence(scene.mixture[0], scene.mixture[1], seg);
  };

  auto coherent = run(60.0);
  auto diffuse = run(-60.0);
  int checked = 0;
  for (int k = 8; k < seg / 2; ++k) {
    const double hz = k * fs / seg;
    if (hz < 300.0 || hz > 4000.0) continue;
    // +60 dB: direct model (broadside: unity); -60 dB: sinc model
    REQUIRE_THAT(coherent[k].real(), Catch::Matchers::WithinAbs(1.0, 0.1));
    REQUIRE_THAT(diffuse[k].real(),
                 Catch::Matchers::WithinAbs(cetk::diffuse_coherence(d, hz, g.speed_of_sound), 0.12));
    ++checked;
  }
  REQUIRE(checked > 50);
}

TEST_CASE("same seed reproduces the scene bit-exactly", "[scene]") {
  const double fs = 16000.0;
  auto g = two_mics(0.06);
  auto src = cetk::speech_shaped_noise(16000, fs, 31);
  Doa doa{0.7, 1.1};
  auto a = cetk::synthesize_scene(g, doa, src, 3.0, 1234, fs);
  auto b = cetk::synthesize_scene(g, doa, src, 3.0, 1234, fs);
  REQUIRE(a.mixture == b.mixture);
  REQUIRE(a.direct == b.direct);
  REQUIRE(a.diffuse == b.diffuse);

  auto c = cetk::synthesize_scene(g, doa, src, 3.0, 1235, fs);
  REQUIRE(a.diffuse != c.diffuse);
}

TEST_CASE("scene round trips through WAV files and sidecar", "[scene]") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "cetk_scene_test";
  fs::create_directories(dir);
  const std::string prefix = (dir / "s1").string();

  const double rate = 16000.0;
  auto g = two_mics(0.1);
  auto src = cetk::speech_shaped_noise(8000, rate, 41);
  Doa doa{0.25, 1.3};
  auto scene = cetk::synthesize_scene(g, doa, src, -5.0, 77, rate);
  cetk::write_scene(prefix, scene, g);

  auto loaded = cetk::load_scene(prefix + "_scene.json");
  REQUIRE(loaded.mixture.num_channels() == 2);
  REQUIRE(loaded.mixture.num_samples() == scene.num_samples());
  REQUIRE(loaded.ddr_db == -5.0);
  REQUIRE(loaded.seed == 77);
  REQUIRE(loaded.geometry.num_channels() == 2);
  REQUIRE_THAT(loaded.true_doa.azimuth_rad, Catch::Matchers::WithinAbs(0.25, 1e-9));
  // float32 quantization only
  for (size_t i = 0; i < 100; ++i)
    REQUIRE_THAT(loaded.mixture.channels[0][i],
                 Catch::Matchers::WithinAbs(scene.mixture[0][i], 1e-6));

  REQUIRE_THROWS_AS(cetk::load_scene((dir / "missing_scene.json").string()),
                    std::runtime_error);
  fs::remove_all(dir);
}
