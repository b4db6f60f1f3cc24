// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stagex/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "stagex/error.hpp"

namespace stagex {

namespace {

double Dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void CheckSameLength(std::size_t a, std::size_t b, const char *what) {
  if (a != b) {
    throw ArgumentError(std::string(what) + ": length mismatch (" +
                        std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

double ClampedDb(double num, double den) {
  double db = 20.0 * std::log10((num + kMetricEps) / (den + kMetricEps));
  return std::clamp(db, -kMetricClampDb, kMetricClampDb);
}

struct Projection {
  double alpha = 0.0;
  double ref_energy = 0.0;
  double target_norm = 0.0;  // ||alpha * s||
  double error_norm = 0.0;   // ||alpha * s - est||
};

Projection Project(std::span<const double> est, std::span<const double> ref) {
  Projection p;
  p.ref_energy = Dot(ref, ref);
  if (!(p.ref_energy > 0.0)) {
    throw ArgumentError("si_sdr: reference has zero energy");
  }
  p.alpha = Dot(est, ref) / p.ref_energy;
  double err = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    double e = p.alpha * ref[i] - est[i];
    err += e * e;
  }
  p.target_norm = std::abs(p.alpha) * std::sqrt(p.ref_energy);
  p.error_norm = std::sqrt(err);
  return p;
}

}  // namespace

void Waveform::Validate() const {
  if (sample_rate <= 0) {
    throw ArgumentError("waveform: sample_rate must be positive, got " +
                        std::to_string(sample_rate));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw ArgumentError("waveform: non-finite sample at index " +
                          std::to_string(i));
    }
  }
}

bool FusionWeights::finite() const {
  return std::isfinite(w1) && std::isfinite(w2) && std::isfinite(w3);
}

double Energy(std::span<const double> x) { return Dot(x, x); }

double Power(std::span<const double> x) {
  return x.empty() ? 0.0 : Energy(x) / static_cast<double>(x.size());
}

double SiSdr(std::span<const double> estimate, std::span<const double> reference) {
  CheckSameLength(estimate.size(), reference.size(), "si_sdr");
  Projection p = Project(estimate, reference);
  return ClampedDb(p.target_norm, p.error_norm);
}

double SiSdr(const Waveform &estimate, const Waveform &reference) {
  return SiSdr(estimate.view(), reference.view());
}

double SiSdrLoss(const Waveform &estimate, const Waveform &reference) {
  return -SiSdr(estimate, reference);
}

LossWithGrad SiSdrLossGrad(std::span<const double> estimate,
                           std::span<const double> reference) {
  CheckSameLength(estimate.size(), reference.size(), "si_sdr_loss");
  Projection p = Project(estimate, reference);
  double raw = 20.0 * std::log10((p.target_norm + kMetricEps) /
                                 (p.error_norm + kMetricEps));
  LossWithGrad out;
  out.value = -std::clamp(raw, -kMetricClampDb, kMetricClampDb);
  out.grad.assign(estimate.size(), 0.0);
  if (raw <= -kMetricClampDb || raw >= kMetricClampDb) return out;

  // d||a s|| / d est = sign(a) s / ||s||;  d||e|| / d est = -e / ||e||.
  const double scale = 20.0 / std::numbers::ln10;
  const double ref_norm = std::sqrt(p.ref_energy);
  const double sign = p.alpha > 0.0 ? 1.0 : (p.alpha < 0.0 ? -1.0 : 0.0);
  const double c_target = sign / (ref_norm * (p.target_norm + kMetricEps));
  const double c_error =
      p.error_norm > 0.0 ? 1.0 / (p.error_norm * (p.error_norm + kMetricEps))
                         : 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    double e = p.alpha * reference[i] - estimate[i];
    out.grad[i] = -scale * (c_target * reference[i] + c_error * e);
  }
  return out;
}

double Sdr(std::span<const double> estimate, std::span<const double> reference) {
  CheckSameLength(estimate.size(), reference.size(), "sdr");
  double ref_energy = Energy(reference);
  if (!(ref_energy > 0.0)) {
    throw ArgumentError("sdr: reference has zero energy");
  }
  double err = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    double e = reference[i] - estimate[i];
    err += e * e;
  }
  return ClampedDb(std::sqrt(ref_energy), std::sqrt(err));
}

void FuseInto(const std::array<std::span<const double>, 3> &estimates,
              const std::array<double, 3> &weights, std::span<double> out) {
  for (const auto &e : estimates) {
    CheckSameLength(e.size(), out.size(), "fuse_signals");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = weights[0] * estimates[0][i] + weights[1] * estimates[1][i] +
             weights[2] * estimates[2][i];
  }
}

Waveform MatchPeak(const Waveform &estimate, const Waveform &like) {
  double peak = 0.0, target = 0.0;
  for (double x : estimate.samples) peak = std::max(peak, std::abs(x));
  for (double x : like.samples) target = std::max(target, std::abs(x));
  Waveform out = estimate;
  if (peak == 0.0) return out;
  for (double &x : out.samples) x *= target / peak;
  return out;
}

Waveform FuseSignals(const std::array<Waveform, 3> &estimates,
                     const FusionWeights &weights) {
  const int rate = estimates[0].sample_rate;
  for (const auto &e : estimates) {
    if (e.sample_rate != rate) {
      throw ArgumentError("fuse_signals: sample rate mismatch");
    }
  }
  Waveform out(std::vector<double>(estimates[0].size()), rate);
  FuseInto({estimates[0].view(), estimates[1].view(), estimates[2].view()},
           weights.as_array(), out.samples);
  return out;
}

std::array<double, 3> FuseWeightsVjp(
    const std::array<std::span<const double>, 3> &estimates,
    std::span<const double> upstream) {
  std::array<double, 3> g{};
  for (int i = 0; i < 3; ++i) {
    CheckSameLength(estimates[i].size(), upstream.size(), "fuse_signals");
    g[i] = Dot(estimates[i], upstream);
  }
  return g;
}

MixResult MixAtSnr(const Waveform &target, const Waveform &interferer,
                   double snr_db) {
  CheckSameLength(target.size(), interferer.size(), "mix_at_snr");
  const double pt = Power(target.view());
  const double pi = Power(interferer.view());
  if (!(pt > 0.0) || !(pi > 0.0)) {
    throw ArgumentError("mix_at_snr: zero-energy input");
  }
  MixResult r;
  r.interferer_gain = std::sqrt(pt / (pi * std::pow(10.0, snr_db / 10.0)));
  r.target = target;
  r.scaled_interferer = interferer;
  r.mixture = Waveform(std::vector<double>(target.size()), target.sample_rate);
  double peak = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    r.scaled_interferer.samples[i] *= r.interferer_gain;
    r.mixture.samples[i] = target.samples[i] + r.scaled_interferer.samples[i];
    peak = std::max(peak, std::abs(r.mixture.samples[i]));
  }
  if (peak > 1.0) {
    r.peak_gain = 1.0 / peak;
    for (auto *w : {&r.mixture, &r.target, &r.scaled_interferer}) {
      for (double &x : w->samples) x *= r.peak_gain;
    }
  }
  return r;
}

double SnrDb(std::span<const double> signal, std::span<const double> noise) {
  return 10.0 * std::log10(Energy(signal) / Energy(noise));
}

Improvement ComputeImprovement(const Waveform &estimate, const Waveform &mixture,
                               const Waveform &target) {
  CheckSameLength(estimate.size(), target.size(), "improvement");
  CheckSameLength(mixture.size(), target.size(), "improvement");
  Improvement imp;
  imp.si_sdri = SiSdr(estimate.view(), target.view()) -
                SiSdr(mixture.view(), target.view());
  imp.sdri = Sdr(estimate.view(), target.view()) -
             Sdr(mixture.view(), target.view());
  return imp;
}

}  // namespace stagex
