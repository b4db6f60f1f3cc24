// Copyright 2026 The stagex Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Independent reference computations used by the tests. Written directly from
// the metric definitions in long double, sharing no code with the library.

#ifndef STAGEX_TESTS_ORACLES_HPP_
#define STAGEX_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

inline double ClampDb(long double ratio_num, long double ratio_den) {
  long double db = 20.0L * std::log10((ratio_num + 1e-8L) / (ratio_den + 1e-8L));
  return static_cast<double>(std::clamp(db, -60.0L, 60.0L));
}

inline long double Norm(const std::vector<long double> &v) {
  long double s = 0;
  for (long double x : v) s += x * x;
  return std::sqrt(s);
}

// s_target = (<est, s> / <s, s>) s ; e = s_target - est.
inline double SiSdr(const std::vector<double> &est, const std::vector<double> &ref) {
  long double dot = 0, ss = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    dot += static_cast<long double>(est[i]) * ref[i];
    ss += static_cast<long double>(ref[i]) * ref[i];
  }
  std::vector<long double> target(ref.size()), err(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    target[i] = dot / ss * ref[i];
    err[i] = target[i] - est[i];
  }
  return ClampDb(Norm(target), Norm(err));
}

inline double Sdr(const std::vector<double> &est, const std::vector<double> &ref) {
  std::vector<long double> s(ref.begin(), ref.end()), err(ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) err[i] = static_cast<long double>(ref[i]) - est[i];
  return ClampDb(Norm(s), Norm(err));
}

// floor((len - L1) / (L1 / 2)) + 1
inline long FrameCount(long len, long l1) { return (len - l1) / (l1 / 2) + 1; }

}  // namespace oracle

#endif  // STAGEX_TESTS_ORACLES_HPP_
