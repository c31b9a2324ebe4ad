#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "persearch/embedding.hpp"
#include "persearch/rng.hpp"
#include "persearch/roi.hpp"

namespace persearch {

enum class IdentitySplit { train, query, gallery_only };

struct IdentitySpec {
  int id = 0;
  std::vector<double> latent;  // unit-norm appearance code
  IdentitySplit split = IdentitySplit::train;
};

/// Synthetic person-search dataset description. Counts and sizes are the
/// contract knobs; the renderer fields (box size, latent dimension, slot
/// probability) have defaults that match the desk-scale profile.
struct DatasetSpec {
  int n_identities = 200;
  int n_unlabeled_distractors = 150;
  int n_scenes = 400;
  int persons_per_scene = 4;
  int image_h = 64;
  int image_w = 64;
  int channels = 1;
  double appearance_sigma = 0.35;
  std::uint64_t seed = 7;
  // renderer knobs
  int box_h = 16;
  int box_w = 16;
  int latent_dim = 16;
  double train_identity_fraction = 0.5;
  double train_scene_fraction = 0.5;
  double labeled_slot_prob = 0.75;
};

struct DetectionNoise {
  double sigma_box = 0.0;          // gaussian jitter (pixels) on each coordinate
  double miss_rate = 0.0;          // probability a true box is dropped
  double false_positive_rate = 0.0;  // expected spurious boxes per scene
  std::uint64_t seed = 0;
};

struct Detection {
  Box box;
  double score = 1.0;  // in (0, 1]
};

struct Query {
  int gallery_index = 0;  // scene the query box was drawn from
  Box box;
  int identity = 0;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<IdentitySpec> identities;
  std::vector<std::vector<double>> distractor_latents;
  std::vector<SceneImage> train_scenes;
  std::vector<SceneImage> gallery_scenes;
  std::vector<Query> queries;
  int n_train_identities = 0;
};

namespace detail {

// Pixel content of a person instance: a fixed random linear map from the
// (noised) latent code into the box, centered at 0.5 and clamped to [0,1].
inline void render_person(Image& img, const Box& box, const std::vector<double>& latent,
                          double sigma, const std::vector<double>& pixel_map, int box_h, int box_w,
                          Rng& rng) {
  const int latent_dim = static_cast<int>(latent.size());
  std::vector<double> a(latent);
  for (double& v : a) v += sigma * rng.gaussian();
  const int y0 = static_cast<int>(box.y1), x0 = static_cast<int>(box.x1);
  for (int y = 0; y < box_h; ++y) {
    for (int x = 0; x < box_w; ++x) {
      for (int ch = 0; ch < img.c; ++ch) {
        const std::size_t p = (static_cast<std::size_t>(y) * box_w + x) * img.c + ch;
        double v = 0.5;
        const double* row = &pixel_map[p * latent_dim];
        for (int l = 0; l < latent_dim; ++l) v += row[l] * a[l];
        img.at(y0 + y, x0 + x, ch) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
}

}  // namespace detail

/// Deterministic synthetic dataset: identities split into train and query
/// pools, scenes split into train and gallery, every query identity placed in
/// at least two gallery scenes (one becomes the query occurrence, the rest
/// are retrieval targets), unlabeled distractors mixed in everywhere.
inline Dataset gen_dataset(const DatasetSpec& spec) {
  check(spec.n_identities >= 2, "gen_dataset: need at least 2 identities");
  check(spec.n_unlabeled_distractors >= 0, "gen_dataset: distractor count must be >= 0");
  check(spec.n_scenes >= 3, "gen_dataset: need at least 3 scenes");
  check(spec.persons_per_scene >= 1, "gen_dataset: persons_per_scene must be >= 1");
  check(spec.appearance_sigma >= 0.0, "gen_dataset: sigma must be >= 0");
  check(spec.latent_dim >= 2, "gen_dataset: latent_dim must be >= 2");
  check(spec.channels >= 1, "gen_dataset: channels must be >= 1");
  check(spec.train_identity_fraction > 0.0 && spec.train_identity_fraction < 1.0,
        "gen_dataset: train_identity_fraction must be in (0,1)");
  check(spec.train_scene_fraction > 0.0 && spec.train_scene_fraction < 1.0,
        "gen_dataset: train_scene_fraction must be in (0,1)");
  check(spec.labeled_slot_prob >= 0.0 && spec.labeled_slot_prob <= 1.0,
        "gen_dataset: labeled_slot_prob must be in [0,1]");

  const int cells_y = spec.image_h / spec.box_h;
  const int cells_x = spec.image_w / spec.box_w;
  check(cells_y * cells_x >= spec.persons_per_scene,
        "gen_dataset: infeasible spec, more persons per scene than fit");

  Dataset ds;
  ds.spec = spec;

  const int n_train_ids =
      std::clamp(static_cast<int>(std::lround(spec.n_identities * spec.train_identity_fraction)), 1,
                 spec.n_identities - 1);
  const int n_query_ids = spec.n_identities - n_train_ids;
  ds.n_train_identities = n_train_ids;

  const int n_train_scenes =
      std::clamp(static_cast<int>(std::lround(spec.n_scenes * spec.train_scene_fraction)), 1,
                 spec.n_scenes - 2);
  const int n_gallery = spec.n_scenes - n_train_scenes;
  check(n_gallery >= 2, "gen_dataset: need at least 2 gallery scenes");
  check(2 * n_query_ids <= n_gallery * spec.persons_per_scene,
        "gen_dataset: infeasible spec, gallery cannot hold two occurrences per query identity");

  Rng latent_rng(mix_seed(spec.seed, 1));
  for (int i = 0; i < spec.n_identities; ++i) {
    IdentitySpec id;
    id.id = i;
    id.latent.resize(spec.latent_dim);
    for (double& v : id.latent) v = latent_rng.gaussian();
    normalize(id.latent);
    id.split = i < n_train_ids ? IdentitySplit::train : IdentitySplit::query;
    ds.identities.push_back(std::move(id));
  }

  Rng distractor_rng(mix_seed(spec.seed, 2));
  for (int i = 0; i < spec.n_unlabeled_distractors; ++i) {
    std::vector<double> latent(spec.latent_dim);
    for (double& v : latent) v = distractor_rng.gaussian();
    normalize(latent);
    ds.distractor_latents.push_back(std::move(latent));
  }

  // One fixed linear map latent -> box pixels shared by every instance.
  Rng map_rng(mix_seed(spec.seed, 3));
  const std::size_t n_box_pixels =
      static_cast<std::size_t>(spec.box_h) * spec.box_w * spec.channels;
  std::vector<double> pixel_map(n_box_pixels * spec.latent_dim);
  const double map_scale = 0.6 / std::sqrt(static_cast<double>(spec.latent_dim));
  for (double& v : pixel_map) v = map_scale * map_rng.gaussian();

  // Pre-assign two gallery occurrences per query identity, round-robin.
  std::vector<std::vector<int>> gallery_preassigned(n_gallery);
  for (int q = 0; q < n_query_ids; ++q) {
    const int id = n_train_ids + q;
    gallery_preassigned[(2 * q) % n_gallery].push_back(id);
    gallery_preassigned[(2 * q + 1) % n_gallery].push_back(id);
  }
  for (const auto& pre : gallery_preassigned)
    check(static_cast<int>(pre.size()) <= spec.persons_per_scene,
          "gen_dataset: infeasible spec, pre-assigned query occurrences exceed scene capacity");

  auto build_scene = [&](int global_index, bool is_train, const std::vector<int>& preassigned,
                         int scene_id) {
    Rng rng(mix_seed(spec.seed, 16, static_cast<std::uint64_t>(global_index)));
    SceneImage scene;
    scene.scene_id = scene_id;
    scene.pixels = Image(spec.image_h, spec.image_w, spec.channels);
    for (double& v : scene.pixels.data) v = rng.uniform(0.0, 0.08);

    // Pick distinct grid cells for this scene's persons.
    std::vector<int> cells(static_cast<std::size_t>(cells_y) * cells_x);
    std::iota(cells.begin(), cells.end(), 0);
    rng.shuffle(cells);

    const int pool_lo = is_train ? 0 : n_train_ids;
    const int pool_hi = is_train ? n_train_ids : spec.n_identities;
    std::vector<bool> used(spec.n_identities, false);
    for (int id : preassigned) used[id] = true;

    std::vector<std::optional<int>> members;  // identity or nullopt for a distractor instance
    std::vector<int> distractor_choice;
    for (int id : preassigned) members.emplace_back(id);
    while (static_cast<int>(members.size()) < spec.persons_per_scene) {
      bool labeled = rng.uniform() < spec.labeled_slot_prob;
      if (spec.n_unlabeled_distractors == 0) labeled = true;
      int chosen = -1;
      if (labeled) {
        // up to a few draws to find an identity not already in the scene
        for (int attempt = 0; attempt < 8 && chosen < 0; ++attempt) {
          const int cand = pool_lo + static_cast<int>(rng.uniform_int(pool_hi - pool_lo));
          if (!used[cand]) chosen = cand;
        }
      }
      if (chosen >= 0) {
        used[chosen] = true;
        members.emplace_back(chosen);
      } else if (spec.n_unlabeled_distractors > 0) {
        members.emplace_back(std::nullopt);
      } else {
        break;  // tiny identity pool exhausted; scene stays short
      }
    }
    for (const auto& m : members)
      if (!m.has_value())
        distractor_choice.push_back(static_cast<int>(rng.uniform_int(spec.n_unlabeled_distractors)));

    std::size_t d_next = 0;
    for (std::size_t k = 0; k < members.size(); ++k) {
      const int cell = cells[k];
      Box box;
      box.x1 = static_cast<double>((cell % cells_x) * spec.box_w);
      box.y1 = static_cast<double>((cell / cells_x) * spec.box_h);
      box.x2 = box.x1 + spec.box_w;
      box.y2 = box.y1 + spec.box_h;
      const std::vector<double>& latent = members[k].has_value()
                                              ? ds.identities[*members[k]].latent
                                              : ds.distractor_latents[distractor_choice[d_next++]];
      detail::render_person(scene.pixels, box, latent, spec.appearance_sigma, pixel_map, spec.box_h,
                            spec.box_w, rng);
      scene.annotations.push_back(Annotation{box, members[k]});
    }
    return scene;
  };

  for (int i = 0; i < n_train_scenes; ++i)
    ds.train_scenes.push_back(build_scene(i, true, {}, i));
  for (int i = 0; i < n_gallery; ++i)
    ds.gallery_scenes.push_back(build_scene(n_train_scenes + i, false, gallery_preassigned[i], i));

  // The first pre-assigned occurrence of each query identity is the probe.
  for (int q = 0; q < n_query_ids; ++q) {
    const int id = n_train_ids + q;
    const int scene_idx = (2 * q) % n_gallery;
    for (const Annotation& a : ds.gallery_scenes[scene_idx].annotations) {
      if (a.identity == id) {
        ds.queries.push_back(Query{scene_idx, a.box, id});
        break;
      }
    }
  }
  return ds;
}

/// Detector stub: each ground-truth box is dropped with miss_rate, otherwise
/// jittered by per-coordinate gaussian noise and clipped; spurious boxes are
/// added at a Poisson rate per scene. Scores are uniform in (0, 1].
inline std::vector<Detection> simulate_detections(const SceneImage& scene,
                                                  const DetectionNoise& noise) {
  check(noise.miss_rate >= 0.0 && noise.miss_rate <= 1.0,
        "simulate_detections: miss_rate must be in [0,1]");
  check(noise.sigma_box >= 0.0, "simulate_detections: sigma_box must be >= 0");
  check(noise.false_positive_rate >= 0.0, "simulate_detections: fp rate must be >= 0");

  Rng rng(mix_seed(noise.seed, 0xdecaf, static_cast<std::uint64_t>(scene.scene_id)));
  const int w = scene.pixels.w, h = scene.pixels.h;
  std::vector<Detection> out;
  for (const Annotation& a : scene.annotations) {
    if (noise.miss_rate > 0.0 && rng.uniform() < noise.miss_rate) continue;
    Box b = a.box;
    if (noise.sigma_box > 0.0) {
      b.x1 += noise.sigma_box * rng.gaussian();
      b.y1 += noise.sigma_box * rng.gaussian();
      b.x2 += noise.sigma_box * rng.gaussian();
      b.y2 += noise.sigma_box * rng.gaussian();
    }
    b = clip_box(b, w, h);
    if (box_width(b) < 1.0 || box_height(b) < 1.0) continue;
    const double score = 1.0 - rng.uniform(0.0, 0.5);
    out.push_back(Detection{b, score});
  }
  const int n_fp = rng.poisson(noise.false_positive_rate);
  for (int i = 0; i < n_fp; ++i) {
    const double bw = rng.uniform(0.5, 1.5) * (w / 4.0);
    const double bh = rng.uniform(0.5, 1.5) * (h / 4.0);
    const double x1 = rng.uniform(0.0, std::max(1.0, w - bw));
    const double y1 = rng.uniform(0.0, std::max(1.0, h - bh));
    Box b = clip_box(Box{x1, y1, x1 + bw, y1 + bh}, w, h);
    if (box_width(b) < 1.0 || box_height(b) < 1.0) continue;
    out.push_back(Detection{b, 1.0 - rng.uniform(0.0, 0.7)});
  }
  return out;
}

}  // namespace persearch
