#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "t2v/corpus.hpp"

namespace t2v::synthetic {

// Per-axis planted distortion strengths.
struct Magnitudes {
  double quality = 0.0;   // blur + noise
  double realness = 0.0;  // teleporting / disappearing object
  double mismatch = 0.0;  // rendered scene contradicts the prompt
};

struct SyntheticSpec {
  int n_clips = 64;
  int64_t t = 8, h = 64, w = 64;
  // Upper bounds for the per-clip magnitudes drawn on each axis.
  Magnitudes distortion_levels{1.0, 1.0, 1.0};
  uint64_t seed = 0;
  int n_models = 4;
  double fps = 8.0;

  void validate() const;
};

// Ground truth per subjective dimension, all in [0, 1].
struct PlantedScores {
  double overall = 1.0;
  double consistency = 1.0;
  double realness = 1.0;
  double quality = 1.0;
  double aesthetic = 1.0;
};

// The fixed monotone score functions. Pure; every score is non-increasing
// in every magnitude, and overall is a positive-weight blend of the three
// axis scores.
PlantedScores planted_scores(const Magnitudes& m);

struct SyntheticCorpus {
  corpus::Manifest manifest;
  std::map<std::string, PlantedScores> truth;           // by video_id
  std::map<std::string, Magnitudes> magnitudes;         // by video_id
};

// Deterministic in (spec, spec.seed). Renders moving-shape scenes with the
// planted distortions and writes clips + manifest under out_dir. When
// out_dir is empty nothing touches disk and manifest uris stay blank
// (in-memory studies and tests).
SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec,
                                          const std::filesystem::path& out_dir);

// Renders one clip without touching disk; used by detection pretraining
// and paired-comparison tests.
struct SceneParams {
  int color = 0;      // palette index
  int shape = 0;      // 0 square, 1 circle, 2 triangle
  int direction = 0;  // 0 right, 1 left, 2 up, 3 down
};

corpus::VideoClip render_clip(const SceneParams& scene, const Magnitudes& m,
                              int64_t t, int64_t h, int64_t w, uint64_t seed);

std::string prompt_text(const SceneParams& scene);

// Balanced clean-vs-corrupted set for the generated-video detection task.
struct LabeledClip {
  corpus::VideoClip clip;
  int label = 0;  // 1 = generated (corrupted), 0 = real (clean)
};
std::vector<LabeledClip> make_detection_set(int n_per_class, int64_t t, int64_t h,
                                            int64_t w, uint64_t seed);

// Clean clips labeled by shape class; the generic-pretraining stand-in.
struct ShapeClip {
  corpus::VideoClip clip;
  int shape_class = 0;
};
std::vector<ShapeClip> make_shape_classification_set(int n, int64_t t, int64_t h,
                                                     int64_t w, uint64_t seed);

}  // namespace t2v::synthetic
