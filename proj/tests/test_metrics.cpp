// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "aecref/metrics.hpp"
#include "aecref/speech_like.hpp"
#include "oracles.hpp"

using namespace aecref;
using namespace aecref::metrics;
using Catch::Approx;

namespace {

TimeSignal noise(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  TimeSignal s = TimeSignal::zeros(n);
  for (double& v : s.samples) v = gaussian(rng);
  return s;
}

/// b minus its projection on a, so <a, b'> = 0 exactly up to round-off.
TimeSignal orthogonalized(const TimeSignal& a, const TimeSignal& b) {
  double ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i];
  return added(b, scaled(a, -ab / a.energy()));
}

TimeSignal zero_mean(TimeSignal s) {
  double m = 0.0;
  for (double v : s.samples) m += v;
  m /= static_cast<double>(s.size());
  for (double& v : s.samples) v -= m;
  return s;
}

}  // namespace

TEST_CASE("erle fixed points", "[metrics]") {
  const auto y = noise(1, 1000);
  CHECK(erle(y, y) == 0.0);
  CHECK(erle(y, TimeSignal::zeros(1000)) == kCapDb);
  CHECK(erle(y, scaled(y, std::sqrt(0.5))) == Approx(10.0 * std::log10(2.0)).epsilon(1e-9));
  CHECK(erle(y, scaled(y, std::sqrt(0.5))) == Approx(3.0103).margin(1e-4));
  CHECK_THROWS_AS(erle(y, noise(2, 999)), ShapeError);
  // Silence in, silence out: floor keeps it finite.
  CHECK(erle(TimeSignal::zeros(10), TimeSignal::zeros(10)) == 0.0);
}

TEST_CASE("sdr fixed points", "[metrics]") {
  const auto s = noise(3, 2000);
  CHECK(sdr(s, s) == kCapDb);
  CHECK(sdr(s, TimeSignal::zeros(2000)) == 0.0);
  auto n = orthogonalized(s, noise(4, 2000));
  n = scaled(n, std::sqrt(0.01 * s.energy() / n.energy()));
  CHECK(sdr(s, added(s, n)) == Approx(20.0).epsilon(1e-9));
}

TEST_CASE("s_sisnr fixed points", "[metrics]") {
  const auto s = zero_mean(noise(5, 1500));
  CHECK(s_sisnr(s, scaled(s, 2.0)) == kCapDb);
  CHECK(s_sisnr(s, scaled(s, -1.0)) == -kCapDb);
  const auto o = orthogonalized(s, zero_mean(noise(6, 1500)));
  CHECK(std::abs(s_sisnr(s, o)) <= 1e-12);
  // Hand value: cos b = 0.5 gives 10 log10(3).
  const TimeSignal a(std::vector<double>{1.0, -1.0, 0.0, 0.0});
  const TimeSignal b(std::vector<double>{1.0, 0.0, -1.0, 0.0});
  CHECK(s_sisnr(a, b) == Approx(10.0 * std::log10(3.0)).epsilon(1e-12));
  CHECK_THROWS(s_sisnr(s, TimeSignal::zeros(1500)));
}

TEST_CASE("s_sisnr is exactly scale invariant", "[metrics][property]") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = noise(100 + trial, 256);
    const auto e = added(t, scaled(noise(400 + trial, 256), uniform(rng, 0.1, 3.0)));
    const double base = s_sisnr(t, e);
    // Powers of two keep the scaling exact in floating point.
    for (double g : {0.25, 2.0, 1024.0}) REQUIRE(s_sisnr(t, scaled(e, g)) == base);
    const double g = uniform(rng, 0.01, 100.0);
    REQUIRE(s_sisnr(t, scaled(e, g)) == Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("erle and sdr are invariant under joint scaling", "[metrics][property]") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = noise(600 + trial, 300), b = noise(900 + trial, 300);
    const double g = uniform(rng, 0.5, 20.0);
    REQUIRE(erle(scaled(a, g), scaled(b, g)) == Approx(erle(a, b)).margin(1e-9));
    REQUIRE(sdr(scaled(a, g), scaled(b, g)) == Approx(sdr(a, b)).margin(1e-9));
  }
}

TEST_CASE("ri_mag_loss hand values and properties", "[metrics]") {
  const auto cfg = oracle::tiny_config(2);
  Spectrogram S(1, cfg), Z(1, cfg);
  S(0, 0) = 1.0;
  CHECK(ri_mag_loss(S, Z, 0.5) == Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(ri_mag_loss(S, Z, 0.5) - 2.0) <= 1e-12);

  // |4|^0.5 = 2 against |1|^0.5 = 1 in opposite phase: RI 9, Mag 1.
  Spectrogram A(1, cfg), B(1, cfg);
  A(0, 1) = 4.0;
  B(0, 1) = -1.0;
  CHECK(ri_mag_loss(A, B, 0.5) == Approx(10.0).epsilon(1e-12));

  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto P = oracle::random_spectrogram(rng, 7, oracle::tiny_config(5));
    const auto Q = oracle::random_spectrogram(rng, 7, oracle::tiny_config(5));
    REQUIRE(ri_mag_loss(P, P) == 0.0);
    REQUIRE(ri_mag_loss(P, Q) >= 0.0);
    REQUIRE(ri_mag_loss(P, Q) == ri_mag_loss(Q, P));
  }
  CHECK_THROWS(ri_mag_loss(S, Z, 0.0));
  CHECK_THROWS_AS(ri_mag_loss(S, Spectrogram(2, cfg)), ShapeError);
}

TEST_CASE("combined loss composition", "[metrics]") {
  const auto s = speech_like::generate(3, 4000);
  const auto S = stft_forward(s);
  CHECK(combined_loss(S, S, s, s) == Approx(-1.0).epsilon(1e-12));
  const auto e = added(s, scaled(noise(10, 4000), 0.05));
  const auto E = stft_forward(e);
  CHECK(combined_loss(S, E, s, e, 0.0) == ri_mag_loss(S, E));
  const double l0 = combined_loss(S, E, s, e, 0.0);
  const double l1 = combined_loss(S, E, s, e, 0.01);
  const double l2 = combined_loss(S, E, s, e, 0.02);
  CHECK(l2 - l1 == Approx(l1 - l0).epsilon(1e-9));
}

TEST_CASE("scenario-dependent evaluation", "[metrics]") {
  const auto sd = speech_like::generate(1, 8000);
  const auto echo = scaled(speech_like::generate(2, 8000), 0.5);
  const auto reverb = scaled(noise(11, 8000), 0.01);
  const auto s = added(sd, reverb);

  const auto fe = evaluate(Scenario::FarEndSingleTalk, echo, TimeSignal::zeros(8000),
                           TimeSignal::zeros(8000));
  CHECK(fe.erle_db == kCapDb);
  CHECK_FALSE(fe.sdr_db.has_value());

  const auto y = added(s, echo);
  const auto dt = evaluate(Scenario::DoubleTalk, y, sd, sd);
  CHECK(dt.sdr_db == kCapDb);
  CHECK(dt.s_sisnr_db == kCapDb);
  CHECK(dt.ri_mag_loss == 0.0);
  CHECK_FALSE(dt.erle_db.has_value());

  const auto ne = evaluate(Scenario::NearEndSingleTalk, s, sd, s);
  CHECK(ne.sdr_db == sdr(sd, s));

  CHECK(infer_scenario(true, true) == Scenario::DoubleTalk);
  CHECK(infer_scenario(true, false) == Scenario::NearEndSingleTalk);
  CHECK(infer_scenario(false, true) == Scenario::FarEndSingleTalk);
  CHECK_THROWS(infer_scenario(false, false));
  for (auto sc : {Scenario::DoubleTalk, Scenario::NearEndSingleTalk, Scenario::FarEndSingleTalk})
    CHECK(scenario_from_string(to_string(sc)) == sc);
}

TEST_CASE("evaluate_scene infers the scenario from the scene", "[metrics]") {
  room::RoomSpec r;
  const room::SceneGeometry g;
  room::SceneOptions opts;
  opts.length = 8000;
  const auto x = speech_like::generate(4, 8000), v = speech_like::generate(5, 8000);
  const auto fe = room::synthesize_scene(r, g, TimeSignal::zeros(8000), x, {}, 0.0, 1, opts);
  const auto rep = evaluate_scene(fe, TimeSignal::zeros(8000));
  CHECK(rep.scenario == Scenario::FarEndSingleTalk);
  CHECK(rep.erle_db == kCapDb);

  const auto dt = room::synthesize_scene(r, g, v, x, {}, 0.0, 1, opts);
  const auto rd = evaluate_scene(dt, dt.s_direct);
  CHECK(rd.scenario == Scenario::DoubleTalk);
  CHECK(rd.sdr_db == kCapDb);

  const auto ne = room::synthesize_scene(r, g, v, TimeSignal::zeros(8000), {}, 0.0, 1, opts);
  const auto rn = evaluate_scene(ne, ne.y);
  CHECK(rn.scenario == Scenario::NearEndSingleTalk);
  CHECK(rn.sdr_db == sdr(ne.s_direct, ne.s));

  const auto silent = room::synthesize_scene(r, g, TimeSignal::zeros(8000),
                                             TimeSignal::zeros(8000), {}, 0.0, 1, opts);
  CHECK_THROWS(evaluate_scene(silent, silent.y));
}
