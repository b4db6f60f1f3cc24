// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "stagex/error.hpp"
#include "stagex/signal.hpp"

using namespace stagex;

namespace {

std::vector<double> RandomVector(std::mt19937_64 &rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double &x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_CASE("si_sdr hand cases") {
  std::vector<double> s{1, 0}, est{1, 1};
  CHECK(SiSdr(est, s) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(SiSdrLoss(Waveform(est), Waveform(s)) == doctest::Approx(0.0).epsilon(1e-12));

  std::vector<double> twice{2, 0};
  CHECK(SiSdr(twice, s) == 60.0);
  std::vector<double> ortho{0, 1};
  CHECK(SiSdr(ortho, s) == -60.0);
  CHECK(SiSdrLoss(Waveform(s), Waveform(s)) == -60.0);
}

TEST_CASE("si_sdr rejects mismatched or silent references") {
  std::vector<double> a{1, 2, 3}, b{1, 2};
  CHECK_THROWS_AS(SiSdr(a, b), ArgumentError);
  std::vector<double> zero{0, 0, 0};
  CHECK_THROWS_AS(SiSdr(a, zero), ArgumentError);
  CHECK_THROWS_AS(Sdr(a, zero), ArgumentError);
}

TEST_CASE("metrics match the brute-force oracle on random vectors") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(2, 64);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(len(rng));
    auto s = RandomVector(rng, n), est = RandomVector(rng, n), mix = RandomVector(rng, n);
    for (std::size_t i = 0; i < n; ++i) est[i] += 0.5 * s[i];
    worst = std::max(worst, std::abs(SiSdr(est, s) - oracle::SiSdr(est, s)));
    worst = std::max(worst, std::abs(Sdr(est, s) - oracle::Sdr(est, s)));
    Improvement imp = ComputeImprovement(Waveform(est), Waveform(mix), Waveform(s));
    worst = std::max(worst, std::abs(imp.si_sdri - (oracle::SiSdr(est, s) - oracle::SiSdr(mix, s))));
    worst = std::max(worst, std::abs(imp.sdri - (oracle::Sdr(est, s) - oracle::Sdr(mix, s))));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("si_sdr is scale invariant") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = RandomVector(rng, 32), est = RandomVector(rng, 32);
    const double base = SiSdr(est, s);
    for (double a : {0.1, 3.0, 10.0}) {
      std::vector<double> scaled(est);
      for (double &x : scaled) x *= a;
      CHECK(std::abs(SiSdr(scaled, s) - base) < 1e-4);
    }
  }
}

TEST_CASE("improvement definitions") {
  std::mt19937_64 rng(3);
  auto s = RandomVector(rng, 50), n = RandomVector(rng, 50);
  std::vector<double> mix(50);
  for (int i = 0; i < 50; ++i) mix[i] = s[i] + n[i];
  Improvement none = ComputeImprovement(Waveform(mix), Waveform(mix), Waveform(s));
  CHECK(none.sdri == 0.0);
  CHECK(none.si_sdri == 0.0);
  Improvement perfect = ComputeImprovement(Waveform(s), Waveform(mix), Waveform(s));
  CHECK(perfect.si_sdri == doctest::Approx(60.0 - SiSdr(mix, s)).epsilon(1e-12));
  CHECK(perfect.sdri == doctest::Approx(60.0 - Sdr(mix, s)).epsilon(1e-12));

  // Two-sample case evaluated by hand: s = [1, 0], mixture = [1, 1],
  // estimate = [1, 0.5]. SI-SDR(mix) = 0 dB; alpha = 1 for the estimate, so
  // SI-SDR = 20 log10(1 / 0.5) = 6.0206 dB. SDR values coincide here.
  std::vector<double> s2{1, 0}, m2{1, 1}, e2{1, 0.5};
  Improvement hand = ComputeImprovement(Waveform(e2), Waveform(m2), Waveform(s2));
  CHECK(std::abs(hand.si_sdri - 20.0 * std::log10(2.0)) < 1e-6);
  CHECK(std::abs(hand.sdri - 20.0 * std::log10(2.0)) < 1e-6);
}

TEST_CASE("si_sdr loss gradient matches central differences") {
  auto check = [](std::vector<double> est, const std::vector<double> &ref, double h, double tol) {
    LossWithGrad lg = SiSdrLossGrad(est, ref);
    CHECK(lg.value == doctest::Approx(-SiSdr(est, ref)).epsilon(1e-12));
    for (std::size_t i = 0; i < est.size(); ++i) {
      const double saved = est[i];
      est[i] = saved + h;
      const double up = -SiSdr(est, ref);
      est[i] = saved - h;
      const double down = -SiSdr(est, ref);
      est[i] = saved;
      const double fd = (up - down) / (2 * h);
      const double rel = std::abs(fd - lg.grad[i]) / std::max({std::abs(fd), std::abs(lg.grad[i]), 1e-7});
      CHECK(rel < tol);
    }
  };
  check({1, 1}, {1, 0}, 1e-6, 1e-4);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto ref = RandomVector(rng, 64), est = RandomVector(rng, 64);
    check(est, ref, 1e-4, 1e-3);
  }
}

TEST_CASE("si_sdr loss gradient is zero under the clamp") {
  std::vector<double> s{1, 2, 3};
  LossWithGrad lg = SiSdrLossGrad(s, s);
  CHECK(lg.value == -60.0);
  for (double g : lg.grad) CHECK(g == 0.0);
}

TEST_CASE("fusion hand cases") {
  Waveform s(std::vector<double>{0.3, -1.2, 2.5, 0.0});
  Waveform same = FuseSignals({s, s, s}, FusionWeights{0.8, 0.1, 0.1});
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(same.samples[i] == doctest::Approx(s.samples[i]).epsilon(1e-15));
  }

  Waveform a(std::vector<double>{1, 2}), b(std::vector<double>{5, 6}), c(std::vector<double>{7, 8});
  Waveform sel = FuseSignals({a, b, c}, FusionWeights{1, 0, 0});
  CHECK(sel.samples == a.samples);

  Waveform w = FuseSignals({Waveform({1, 1}), Waveform({2, 0}), Waveform({0, 2})},
                           FusionWeights{0.5, 0.25, 0.25});
  CHECK(w.samples[0] == 1.0);
  CHECK(w.samples[1] == 1.0);
}

TEST_CASE("fusion is linear and its weight gradient matches differences") {
  std::mt19937_64 rng(9);
  std::array<std::vector<double>, 3> a, b;
  for (int i = 0; i < 3; ++i) {
    a[i] = RandomVector(rng, 16);
    b[i] = RandomVector(rng, 16);
  }
  FusionWeights w{1.18, 0.32, 0.11};
  auto fuse = [&](const std::array<std::vector<double>, 3> &e, const FusionWeights &fw) {
    return FuseSignals({Waveform(e[0]), Waveform(e[1]), Waveform(e[2])}, fw).samples;
  };
  std::array<std::vector<double>, 3> ab;
  for (int i = 0; i < 3; ++i) {
    ab[i].resize(16);
    for (int t = 0; t < 16; ++t) ab[i][t] = a[i][t] + b[i][t];
  }
  auto fa = fuse(a, w), fb = fuse(b, w), fab = fuse(ab, w);
  for (int t = 0; t < 16; ++t) CHECK(fab[t] == doctest::Approx(fa[t] + fb[t]).epsilon(1e-14));

  // d/dw_i of L = <fuse(e, w), u> is <e_i, u>.
  auto u = RandomVector(rng, 16);
  auto vjp = FuseWeightsVjp({a[0], a[1], a[2]}, u);
  auto loss = [&](const FusionWeights &fw) {
    auto f = fuse(a, fw);
    double l = 0;
    for (int t = 0; t < 16; ++t) l += f[t] * u[t];
    return l;
  };
  const double h = 1e-4;
  for (int i = 0; i < 3; ++i) {
    FusionWeights up = w, down = w;
    double *pu[] = {&up.w1, &up.w2, &up.w3}, *pd[] = {&down.w1, &down.w2, &down.w3};
    *pu[i] += h;
    *pd[i] -= h;
    const double fd = (loss(up) - loss(down)) / (2 * h);
    CHECK(std::abs(fd - vjp[i]) / std::max(std::abs(fd), 1e-7) < 1e-3);
  }
}

TEST_CASE("mix_at_snr gains and round trip") {
  std::vector<double> t(1000), n(1000);
  for (int i = 0; i < 1000; ++i) {
    t[i] = 0.2 * std::sin(0.05 * i);
    n[i] = 0.2 * std::cos(0.031 * i + 0.4);
  }
  // Equalise to unit power.
  auto unit = [](std::vector<double> v) {
    double p = Power(v);
    for (double &x : v) x /= std::sqrt(p);
    return v;
  };
  Waveform ut(unit(t)), un(unit(n));
  CHECK(MixAtSnr(ut, un, 0.0).interferer_gain == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(MixAtSnr(ut, un, 10 * std::log10(4.0)).interferer_gain ==
        doctest::Approx(0.5).epsilon(1e-12));

  for (double snr : {0.0, 2.5, 5.0}) {
    MixResult r = MixAtSnr(Waveform(t), Waveform(n), snr);
    CHECK(std::abs(SnrDb(r.target.view(), r.scaled_interferer.view()) - snr) < 1e-6);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(r.mixture.samples[i] ==
            doctest::Approx(r.target.samples[i] + r.scaled_interferer.samples[i]).epsilon(1e-12));
    }
  }
  // Loud inputs are peak-normalised jointly, keeping the SNR.
  MixResult loud = MixAtSnr(ut, un, 5.0);
  CHECK(loud.peak_gain < 1.0);
  double peak = 0.0;
  for (double x : loud.mixture.samples) peak = std::max(peak, std::abs(x));
  CHECK(peak <= 1.0 + 1e-12);
  CHECK(std::abs(SnrDb(loud.target.view(), loud.scaled_interferer.view()) - 5.0) < 1e-6);
}

TEST_CASE("waveform validation") {
  Waveform w(std::vector<double>{0.0, NAN});
  CHECK_THROWS_AS(w.Validate(), ArgumentError);
  Waveform r(std::vector<double>{0.0}, 0);
  CHECK_THROWS_AS(r.Validate(), ArgumentError);
  Waveform ok(std::vector<double>{0.0, 0.5});
  CHECK_NOTHROW(ok.Validate());
}
