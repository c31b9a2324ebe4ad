#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace persearch {

// Unit-norm feature vector; the currency of the whole system.
using Embedding = std::vector<double>;

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline double dot(const Embedding& a, const Embedding& b) {
  check(a.size() == b.size(), "dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const Embedding& v) { return std::sqrt(dot(v, v)); }

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// In-place L2 normalization; zero vectors are rejected.
inline void normalize(Embedding& v) {
  const double n = l2_norm(v);
  check(n > 1e-12, "normalize: vector norm too small");
  for (double& x : v) x /= n;
}

inline Embedding normalized(Embedding v) {
  normalize(v);
  return v;
}

/// Cosine similarities of a unit-norm anchor against unit-norm entries;
/// element i is dot(anchor, entries[i]).
inline std::vector<double> cosine_similarities(const Embedding& anchor,
                                               const std::vector<Embedding>& entries) {
  std::vector<double> sims;
  sims.reserve(entries.size());
  for (const Embedding& e : entries) {
    check(e.size() == anchor.size(), "cosine_similarities: dimension mismatch");
    sims.push_back(dot(anchor, e));
  }
  return sims;
}

}  // namespace persearch
