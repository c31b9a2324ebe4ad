#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include "persearch/dataset.hpp"
#include "persearch/embedding.hpp"
#include "persearch/rng.hpp"
#include "persearch/roi.hpp"

namespace persearch {

struct EvalConfig {
  double iou_threshold = 0.5;           // a match counts only if IoU is strictly larger
  std::vector<int> cmc_ks = {1, 5, 10};
  std::vector<int> gallery_sizes = {50, 100, 500, 1000, 2000, 4000};
};

inline void validate(const EvalConfig& cfg) {
  check(cfg.iou_threshold > 0.0 && cfg.iou_threshold < 1.0, "eval: iou_threshold must be in (0,1)");
  for (std::size_t i = 1; i < cfg.gallery_sizes.size(); ++i)
    check(cfg.gallery_sizes[i] > cfg.gallery_sizes[i - 1], "eval: gallery sizes must ascend");
  for (int s : cfg.gallery_sizes) check(s > 0, "eval: gallery sizes must be positive");
  for (int k : cfg.cmc_ks) check(k > 0, "eval: cmc ranks must be positive");
}

inline double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = box_area(a) + box_area(b) - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

/// Non-interpolated average precision: the sum of precision@k over the ranks
/// k holding true positives, divided by total_positives. `ranked` must
/// already be sorted by descending score.
inline double average_precision(const std::vector<std::pair<double, bool>>& ranked,
                                int total_positives) {
  check(total_positives >= 1, "average_precision: total_positives must be >= 1");
  double ap = 0.0;
  int tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (ranked[k].second) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
  }
  return ap / total_positives;
}

// Per-scene model outputs consumed by the protocol.
struct GalleryFeatures {
  int scene_id = 0;
  std::vector<Detection> detections;
  std::vector<Embedding> features;  // parallel to detections
};

struct QueryFeature {
  int query_index = 0;
  int identity = 0;
  int gallery_scene_id = 0;  // scene the probe box came from; excluded from its gallery
  Embedding feature;
};

struct QueryResult {
  int query_index = 0;
  int identity = 0;
  double ap = 0.0;
  int first_tp_rank = -1;  // 1-based; -1 when no true positive was retrieved
  int total_positives = 0;
  bool excluded = false;  // identity absent from the evaluated gallery
};

struct EvalReport {
  double map = 0.0;
  std::map<int, double> cmc;
  std::vector<QueryResult> per_query;
  int gallery_size = -1;  // -1 = full gallery
  int n_excluded = 0;
};

namespace detail {

/// Rank one query against a set of gallery scenes. A detection is a true
/// positive iff its scene contains the query identity, its IoU with that
/// identity's ground-truth box exceeds the threshold, and no higher-ranked
/// detection already claimed that box (greedy one-to-one matching).
inline QueryResult evaluate_query(const QueryFeature& query,
                                  const std::vector<const GalleryFeatures*>& gallery,
                                  const std::vector<const SceneImage*>& scenes,
                                  const EvalConfig& cfg) {
  struct Candidate {
    double sim;
    int scene_id;
    int box_index;
    int scene_pos;
  };
  std::vector<Candidate> cands;
  std::vector<const Box*> gt_box(gallery.size(), nullptr);
  int total_positives = 0;
  for (std::size_t s = 0; s < gallery.size(); ++s) {
    for (const Annotation& a : scenes[s]->annotations) {
      if (a.identity.has_value() && *a.identity == query.identity) {
        gt_box[s] = &a.box;
        ++total_positives;
        break;  // at most one instance per identity per scene
      }
    }
    for (std::size_t b = 0; b < gallery[s]->detections.size(); ++b) {
      cands.push_back(Candidate{dot(query.feature, gallery[s]->features[b]),
                                gallery[s]->scene_id, static_cast<int>(b),
                                static_cast<int>(s)});
    }
  }

  QueryResult res;
  res.query_index = query.query_index;
  res.identity = query.identity;
  res.total_positives = total_positives;
  if (total_positives == 0) {
    res.excluded = true;
    return res;
  }

  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    if (a.scene_id != b.scene_id) return a.scene_id < b.scene_id;
    return a.box_index < b.box_index;
  });

  std::vector<bool> matched(gallery.size(), false);
  std::vector<std::pair<double, bool>> ranked;
  ranked.reserve(cands.size());
  for (std::size_t k = 0; k < cands.size(); ++k) {
    const Candidate& c = cands[k];
    bool tp = false;
    if (gt_box[c.scene_pos] != nullptr && !matched[c.scene_pos] &&
        iou(gallery[c.scene_pos]->detections[c.box_index].box, *gt_box[c.scene_pos]) >
            cfg.iou_threshold) {
      tp = true;
      matched[c.scene_pos] = true;
      if (res.first_tp_rank < 0) res.first_tp_rank = static_cast<int>(k) + 1;
    }
    ranked.emplace_back(c.sim, tp);
  }
  res.ap = average_precision(ranked, total_positives);
  return res;
}

inline EvalReport reduce_report(std::vector<QueryResult> results, const EvalConfig& cfg,
                                int gallery_size) {
  EvalReport rep;
  rep.gallery_size = gallery_size;
  double sum_ap = 0.0;
  int n_included = 0;
  for (const QueryResult& r : results) {
    if (r.excluded) {
      ++rep.n_excluded;
      continue;
    }
    sum_ap += r.ap;
    ++n_included;
  }
  rep.map = n_included > 0 ? sum_ap / n_included : 0.0;
  for (int k : cfg.cmc_ks) {
    int hits = 0;
    for (const QueryResult& r : results)
      if (!r.excluded && r.first_tp_rank > 0 && r.first_tp_rank <= k) ++hits;
    rep.cmc[k] = n_included > 0 ? static_cast<double>(hits) / n_included : 0.0;
  }
  rep.per_query = std::move(results);
  return rep;
}

}  // namespace detail

/// Full-gallery evaluation: every query is ranked against all gallery scenes
/// except the one its probe box came from.
inline EvalReport evaluate(const std::vector<QueryFeature>& queries,
                           const std::vector<GalleryFeatures>& gallery,
                           const std::vector<SceneImage>& gallery_scenes, const EvalConfig& cfg) {
  validate(cfg);
  check(gallery.size() == gallery_scenes.size(), "evaluate: gallery/scene count mismatch");
  std::vector<QueryResult> results;
  for (const QueryFeature& q : queries) {
    std::vector<const GalleryFeatures*> gal;
    std::vector<const SceneImage*> scn;
    for (std::size_t s = 0; s < gallery.size(); ++s) {
      if (gallery[s].scene_id == q.gallery_scene_id) continue;
      gal.push_back(&gallery[s]);
      scn.push_back(&gallery_scenes[s]);
    }
    results.push_back(detail::evaluate_query(q, gal, scn, cfg));
  }
  return detail::reduce_report(std::move(results), cfg, -1);
}

/// Gallery-size sweep. For each query, scenes containing the query identity
/// are always included; the remainder of the budget is filled from a seeded
/// per-query permutation of distractor scenes, so the per-size galleries are
/// nested and mAP cannot increase with size.
inline std::vector<EvalReport> gallery_sweep(const std::vector<QueryFeature>& queries,
                                             const std::vector<GalleryFeatures>& gallery,
                                             const std::vector<SceneImage>& gallery_scenes,
                                             const std::vector<int>& sizes, std::uint64_t seed,
                                             const EvalConfig& cfg) {
  validate(cfg);
  check(gallery.size() == gallery_scenes.size(), "gallery_sweep: gallery/scene count mismatch");
  for (int size : sizes)
    check(size <= static_cast<int>(gallery.size()) - 1,
          "gallery_sweep: size exceeds available scenes");

  std::vector<EvalReport> reports;
  for (int size : sizes) {
    std::vector<QueryResult> results;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      const QueryFeature& q = queries[qi];
      std::vector<std::size_t> tp_scenes, other_scenes;
      for (std::size_t s = 0; s < gallery.size(); ++s) {
        if (gallery[s].scene_id == q.gallery_scene_id) continue;
        bool has_id = false;
        for (const Annotation& a : gallery_scenes[s].annotations)
          if (a.identity.has_value() && *a.identity == q.identity) {
            has_id = true;
            break;
          }
        (has_id ? tp_scenes : other_scenes).push_back(s);
      }
      Rng rng(mix_seed(seed, 0xa11ce, static_cast<std::uint64_t>(qi)));
      rng.shuffle(other_scenes);
      std::vector<std::size_t> included = tp_scenes;
      for (std::size_t i = 0; i < other_scenes.size() && included.size() < static_cast<std::size_t>(size); ++i)
        included.push_back(other_scenes[i]);

      std::vector<const GalleryFeatures*> gal;
      std::vector<const SceneImage*> scn;
      for (std::size_t s : included) {
        gal.push_back(&gallery[s]);
        scn.push_back(&gallery_scenes[s]);
      }
      results.push_back(detail::evaluate_query(q, gal, scn, cfg));
    }
    reports.push_back(detail::reduce_report(std::move(results), cfg, size));
  }
  return reports;
}

}  // namespace persearch
