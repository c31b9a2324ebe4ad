#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "persearch/embedding.hpp"
#include "persearch/memory_bank.hpp"

namespace persearch {

/// Anchor-vs-memory cosine similarities split into K positives and J
/// negatives, plus the scale factor applied inside the exponent.
struct SimilarityPairSet {
  std::vector<double> s_p;
  std::vector<double> s_n;
  double gamma = 16.0;
};

struct LossResult {
  double value = 0.0;
  std::vector<double> grad_s_p;  // entries <= 0
  std::vector<double> grad_s_n;  // entries >= 0
};

/// Pairwise metric loss over all K*J (positive, negative) similarity pairs:
///
///   value = log(1 + sum_i sum_j exp(gamma * (s_n[j] - s_p[i])))
///
/// Evaluated as a max-shifted log-sum-exp over the K*J terms plus the
/// implicit exp(0) term, so it stays finite for gamma*(s_n - s_p) up to
/// +-1e4. Gradients are the exact partials:
///
///   d/ds_n[j] =  gamma * sum_i w_ij,   d/ds_p[i] = -gamma * sum_j w_ij,
///   w_ij = exp(gamma (s_n[j] - s_p[i])) / (1 + sum exp(...)).
///
/// An empty double sum (K*J == 0) yields value 0 with zero gradients.
inline LossResult pairwise_loss(const SimilarityPairSet& pairs) {
  const std::size_t k = pairs.s_p.size();
  const std::size_t j = pairs.s_n.size();
  check(pairs.gamma > 0.0, "pairwise_loss: gamma must be > 0");
  for (double s : pairs.s_p) check(!std::isnan(s), "pairwise_loss: NaN positive similarity");
  for (double s : pairs.s_n) check(!std::isnan(s), "pairwise_loss: NaN negative similarity");

  LossResult out;
  out.grad_s_p.assign(k, 0.0);
  out.grad_s_n.assign(j, 0.0);
  if (k == 0 || j == 0) return out;

  const double g = pairs.gamma;
  double max_term = 0.0;  // the implicit "1 +" contributes exp(0)
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t n = 0; n < j; ++n)
      max_term = std::max(max_term, g * (pairs.s_n[n] - pairs.s_p[i]));

  double denom = std::exp(-max_term);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t n = 0; n < j; ++n)
      denom += std::exp(g * (pairs.s_n[n] - pairs.s_p[i]) - max_term);
  out.value = max_term + std::log(denom);

  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t n = 0; n < j; ++n) {
      const double w = std::exp(g * (pairs.s_n[n] - pairs.s_p[i]) - max_term) / denom;
      out.grad_s_p[i] -= g * w;
      out.grad_s_n[n] += g * w;
    }
  }
  return out;
}

/// Chain rule through s = dot(anchor, entry): the loss gradient with respect
/// to the anchor embedding. Memory entries are constants; no gradient flows
/// into the bank.
inline Embedding anchor_gradient(const LossResult& loss, const std::vector<Embedding>& positives,
                                 const std::vector<Embedding>& negatives) {
  check(positives.size() == loss.grad_s_p.size(), "anchor_gradient: positive count mismatch");
  check(negatives.size() == loss.grad_s_n.size(), "anchor_gradient: negative count mismatch");
  std::size_t dim = 0;
  if (!positives.empty())
    dim = positives.front().size();
  else if (!negatives.empty())
    dim = negatives.front().size();
  Embedding grad(dim, 0.0);
  for (std::size_t i = 0; i < positives.size(); ++i) {
    check(positives[i].size() == dim, "anchor_gradient: dimension mismatch");
    for (std::size_t c = 0; c < dim; ++c) grad[c] += loss.grad_s_p[i] * positives[i][c];
  }
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    check(negatives[i].size() == dim, "anchor_gradient: dimension mismatch");
    for (std::size_t c = 0; c < dim; ++c) grad[c] += loss.grad_s_n[i] * negatives[i][c];
  }
  return grad;
}

struct OimLossResult {
  double value = 0.0;
  Embedding anchor_grad;
};

/// Look-up-table baseline loss: softmax cross-entropy over the logits
/// {dot(anchor, proxy_c) / tau} for every identity in the table plus
/// {dot(anchor, u_k) / tau} for the unlabeled queue entries, with the target
/// identity as the label. Proxies and queue entries are constants; only the
/// anchor receives a gradient.
inline OimLossResult oim_loss(const Embedding& anchor, const LookupTable& table,
                              const std::vector<Embedding>& unlabeled_queue, int target,
                              double temperature) {
  check(temperature > 0.0, "oim_loss: temperature must be > 0");
  check(table.proxies.count(target) > 0, "oim_loss: unknown target identity");
  check(anchor.size() == table.dim, "oim_loss: anchor dimension mismatch");

  const std::size_t n_id = table.proxies.size();
  std::vector<double> logits;
  std::vector<const Embedding*> refs;
  logits.reserve(n_id + unlabeled_queue.size());
  refs.reserve(n_id + unlabeled_queue.size());
  std::size_t target_index = 0;
  for (const auto& [id, proxy] : table.proxies) {
    if (id == target) target_index = logits.size();
    logits.push_back(dot(anchor, proxy) / temperature);
    refs.push_back(&proxy);
  }
  for (const Embedding& u : unlabeled_queue) {
    check(u.size() == anchor.size(), "oim_loss: queue entry dimension mismatch");
    logits.push_back(dot(anchor, u) / temperature);
    refs.push_back(&u);
  }

  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - max_logit);
  const double log_z = max_logit + std::log(z);

  OimLossResult out;
  out.value = log_z - logits[target_index];
  out.anchor_grad.assign(anchor.size(), 0.0);
  for (std::size_t c = 0; c < logits.size(); ++c) {
    const double p = std::exp(logits[c] - log_z);
    const double coeff = (p - (c == target_index ? 1.0 : 0.0)) / temperature;
    const Embedding& v = *refs[c];
    for (std::size_t d = 0; d < anchor.size(); ++d) out.anchor_grad[d] += coeff * v[d];
  }
  return out;
}

}  // namespace persearch
