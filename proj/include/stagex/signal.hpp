// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Signal mathematics shared by data simulation, training and evaluation:
// scale-invariant SDR and its gradient, plain SDR, SNR-controlled mixing and
// weighted fusion of the three per-scale estimates.

#ifndef STAGEX_SIGNAL_HPP_
#define STAGEX_SIGNAL_HPP_

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace stagex {

inline constexpr int kSampleRate = 8000;

// Norm guard and dB clamp used by every ratio metric below.
inline constexpr double kMetricEps = 1e-8;
inline constexpr double kMetricClampDb = 60.0;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  Waveform() = default;
  explicit Waveform(std::vector<double> s, int rate = kSampleRate)
      : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::span<const double> view() const { return samples; }
  double seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  // Throws ArgumentError if the rate is non-positive or any sample is not
  // finite.
  void Validate() const;
};

struct FusionWeights {
  double w1 = 0.8;
  double w2 = 0.1;
  double w3 = 0.1;

  std::array<double, 3> as_array() const { return {w1, w2, w3}; }
  bool finite() const;
};

double Energy(std::span<const double> x);
double Power(std::span<const double> x);

// 20*log10(||a*s|| / ||a*s - est||) with a = <est,s>/<s,s>; eps on both norms,
// result clamped to +-60 dB.
double SiSdr(std::span<const double> estimate, std::span<const double> reference);
double SiSdr(const Waveform &estimate, const Waveform &reference);

double SiSdrLoss(const Waveform &estimate, const Waveform &reference);

struct LossWithGrad {
  double value = 0.0;
  std::vector<double> grad;  // d value / d estimate
};

// Value and analytic gradient of -SiSdr with respect to the estimate. The
// gradient is zero wherever the clamp is active.
LossWithGrad SiSdrLossGrad(std::span<const double> estimate,
                           std::span<const double> reference);

// Plain SDR, 20*log10(||s|| / ||s - est||), same eps / clamp policy.
double Sdr(std::span<const double> estimate, std::span<const double> reference);

// Rescales estimate so its peak magnitude equals that of like. A silent
// estimate is returned unchanged.
Waveform MatchPeak(const Waveform &estimate, const Waveform &like);

// w1*e1 + w2*e2 + w3*e3 sample-wise.
Waveform FuseSignals(const std::array<Waveform, 3> &estimates,
                     const FusionWeights &weights);
void FuseInto(const std::array<std::span<const double>, 3> &estimates,
              const std::array<double, 3> &weights, std::span<double> out);

// Vector-Jacobian product of the fusion with respect to its weights:
// d/dw_i = <estimate_i, upstream>. The gradient with respect to estimate_i is
// simply w_i * upstream.
std::array<double, 3> FuseWeightsVjp(
    const std::array<std::span<const double>, 3> &estimates,
    std::span<const double> upstream);

struct MixResult {
  Waveform mixture;
  Waveform target;             // target after any peak normalisation
  Waveform scaled_interferer;  // interferer after SNR scaling and peak norm
  double interferer_gain = 1.0;  // SNR gain applied to the interferer
  double peak_gain = 1.0;        // common gain applied when the sum clips
};

MixResult MixAtSnr(const Waveform &target, const Waveform &interferer,
                   double snr_db);

// 10*log10(P(signal) / P(noise)).
double SnrDb(std::span<const double> signal, std::span<const double> noise);

struct Improvement {
  double sdri = 0.0;
  double si_sdri = 0.0;
};

Improvement ComputeImprovement(const Waveform &estimate, const Waveform &mixture,
                               const Waveform &target);

}  // namespace stagex

#endif  // STAGEX_SIGNAL_HPP_
