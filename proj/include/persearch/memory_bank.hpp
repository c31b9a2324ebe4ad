#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "persearch/embedding.hpp"

namespace persearch {

// |norm - 1| within this tolerance is silently re-normalized on ingest;
// beyond it the entry is rejected.
inline constexpr double kNormIngestTolerance = 1e-4;

struct FeatureEntry {
  Embedding embedding;
  std::optional<int> identity;  // present <=> entry belongs in the labeled queue
  long iteration_tag = 0;
};

/// Fixed-capacity FIFO queues of recently visited instance embeddings:
/// one for labeled persons, one for unlabeled ones.
struct MemoryBank {
  std::size_t labeled_capacity = 0;
  std::size_t unlabeled_capacity = 0;
  std::size_t dim = 0;
  std::deque<FeatureEntry> labeled;
  std::deque<FeatureEntry> unlabeled;
};

inline MemoryBank make_bank(std::size_t labeled_capacity, std::size_t unlabeled_capacity,
                            std::size_t dim) {
  check(dim >= 1, "make_bank: dim must be >= 1");
  MemoryBank b;
  b.labeled_capacity = labeled_capacity;
  b.unlabeled_capacity = unlabeled_capacity;
  b.dim = dim;
  return b;
}

/// Appends entries to the matching queue (labeled/unlabeled by identity
/// presence). Queues below capacity grow; once full, the oldest entries are
/// dropped first. A zero-capacity queue simply discards its entries.
inline void enqueue(MemoryBank& bank, const std::vector<FeatureEntry>& entries) {
  for (const FeatureEntry& e : entries) {
    check(e.embedding.size() == bank.dim, "enqueue: dimension mismatch with bank");
    const double n = l2_norm(e.embedding);
    check(std::abs(n - 1.0) <= kNormIngestTolerance, "enqueue: entry norm outside tolerance");
    FeatureEntry stored = e;
    normalize(stored.embedding);
    if (stored.identity.has_value()) {
      if (bank.labeled_capacity == 0) continue;
      bank.labeled.push_back(std::move(stored));
      while (bank.labeled.size() > bank.labeled_capacity) bank.labeled.pop_front();
    } else {
      if (bank.unlabeled_capacity == 0) continue;
      bank.unlabeled.push_back(std::move(stored));
      while (bank.unlabeled.size() > bank.unlabeled_capacity) bank.unlabeled.pop_front();
    }
  }
}

struct PairSplit {
  std::vector<Embedding> positives;  // labeled entries sharing the anchor identity (K)
  std::vector<Embedding> negatives;  // all other labeled entries plus all unlabeled (J)
};

/// Positive/negative candidate construction for an anchor identity.
/// Positives come only from the labeled queue; unlabeled entries are always
/// negatives. K may be 0 for an identity not currently in the bank.
inline PairSplit split_pairs(const MemoryBank& bank, int anchor_identity) {
  PairSplit out;
  for (const FeatureEntry& e : bank.labeled) {
    if (e.identity.value() == anchor_identity)
      out.positives.push_back(e.embedding);
    else
      out.negatives.push_back(e.embedding);
  }
  for (const FeatureEntry& e : bank.unlabeled) out.negatives.push_back(e.embedding);
  return out;
}

/// Per-identity EMA feature proxies (the look-up-table baseline state).
struct LookupTable {
  std::map<int, Embedding> proxies;
  double proxy_momentum = 0.5;  // lambda
  std::size_t dim = 0;
};

inline LookupTable make_lookup_table(double proxy_momentum, std::size_t dim) {
  check(proxy_momentum >= 0.0 && proxy_momentum <= 1.0,
        "make_lookup_table: proxy momentum must be in [0,1]");
  check(dim >= 1, "make_lookup_table: dim must be >= 1");
  return LookupTable{{}, proxy_momentum, dim};
}

/// proxy <- normalize(lambda * proxy + (1 - lambda) * feature); an unseen
/// identity gets its proxy initialized to the feature itself.
inline void lut_update(LookupTable& table, int identity, const Embedding& feature) {
  check(feature.size() == table.dim, "lut_update: dimension mismatch");
  const double n = l2_norm(feature);
  check(std::abs(n - 1.0) <= kNormIngestTolerance, "lut_update: feature norm outside tolerance");
  auto it = table.proxies.find(identity);
  if (it == table.proxies.end()) {
    table.proxies.emplace(identity, normalized(feature));
    return;
  }
  Embedding& proxy = it->second;
  const double lambda = table.proxy_momentum;
  for (std::size_t i = 0; i < proxy.size(); ++i)
    proxy[i] = lambda * proxy[i] + (1.0 - lambda) * feature[i];
  normalize(proxy);
}

}  // namespace persearch
