#include "t2v/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "t2v/error.hpp"
#include "t2v/rng.hpp"

namespace t2v::synthetic {

namespace {

struct Rgb {
  double r, g, b;
};

constexpr int kNumColors = 6;
const char* kColorNames[kNumColors] = {"red", "green", "blue", "yellow", "magenta", "cyan"};
const Rgb kPalette[kNumColors] = {
    {0.85, 0.16, 0.16}, {0.18, 0.78, 0.22}, {0.20, 0.35, 0.88},
    {0.88, 0.82, 0.18}, {0.82, 0.22, 0.80}, {0.20, 0.80, 0.82},
};
// A contradicting color per palette entry (its rough complement).
const int kContradiction[kNumColors] = {5, 4, 3, 2, 1, 0};

const char* kShapeNames[3] = {"square", "circle", "triangle"};
const char* kDirectionNames[4] = {"right", "left", "up", "down"};

double direction_angle(int dir) {
  switch (dir) {
    case 0: return 0.0;                 // right
    case 1: return std::numbers::pi;    // left
    case 2: return -std::numbers::pi / 2;  // up (screen y grows downward)
    default: return std::numbers::pi / 2;  // down
  }
}

// Signed distance-ish function; <= 0 inside, grows linearly outside.
double shape_distance(int shape, double dx, double dy, double radius) {
  switch (shape) {
    case 0:  // square
      return std::max(std::abs(dx), std::abs(dy)) - radius;
    case 1:  // circle
      return std::sqrt(dx * dx + dy * dy) - radius;
    default: {  // triangle, apex up
      const double g1 = dy - 0.5 * radius;
      const double g2 = -0.866 * dx - 0.5 * dy - 0.5 * radius;
      const double g3 = 0.866 * dx - 0.5 * dy - 0.5 * radius;
      return std::max({g1, g2, g3});
    }
  }
}

void gaussian_blur_frame(corpus::VideoClip& clip, int64_t ti, double sigma) {
  if (sigma < 0.05) return;
  const int radius = static_cast<int>(std::ceil(2.5 * sigma));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<size_t>(i + radius)];
  }
  for (auto& v : k) v /= sum;
  const int64_t h = clip.h(), w = clip.w();
  std::vector<double> tmp(static_cast<size_t>(h * w * 3));
  auto tix = [&](int64_t y, int64_t x, int64_t c) {
    return static_cast<size_t>((y * w + x) * 3 + c);
  };
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int64_t xx = std::clamp<int64_t>(x + i, 0, w - 1);
          acc += k[static_cast<size_t>(i + radius)] * clip.at(ti, y, xx, c);
        }
        tmp[tix(y, x, c)] = acc;
      }
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int64_t yy = std::clamp<int64_t>(y + i, 0, h - 1);
          acc += k[static_cast<size_t>(i + radius)] * tmp[tix(yy, x, c)];
        }
        clip.at(ti, y, x, c) = acc;
      }
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_clips < 1) throw ValidationError("synthetic spec: n_clips must be >= 1");
  if (t < 1 || h < 16 || w < 16)
    throw ValidationError("synthetic spec: need t >= 1 and h, w >= 16");
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(distortion_levels.quality) || !in01(distortion_levels.realness) ||
      !in01(distortion_levels.mismatch))
    throw ValidationError("synthetic spec: distortion levels must lie in [0, 1]");
  if (n_models < 1) throw ValidationError("synthetic spec: n_models must be >= 1");
  if (fps <= 0.0) throw ValidationError("synthetic spec: fps must be > 0");
}

PlantedScores planted_scores(const Magnitudes& m) {
  PlantedScores s;
  s.quality = 1.0 - 0.8 * m.quality;
  s.realness = 1.0 - 0.8 * m.realness;
  s.consistency = 1.0 - 0.8 * m.mismatch;
  s.aesthetic = 1.0 - 0.6 * m.quality - 0.2 * m.realness;
  s.overall = 0.3 * s.quality + 0.3 * s.realness + 0.4 * s.consistency;
  return s;
}

std::string prompt_text(const SceneParams& scene) {
  std::string t = "a ";
  t += kColorNames[scene.color];
  t += " ";
  t += kShapeNames[scene.shape];
  t += " moving ";
  t += kDirectionNames[scene.direction];
  t += " across a dark background";
  return t;
}

corpus::VideoClip render_clip(const SceneParams& scene, const Magnitudes& m, int64_t t,
                              int64_t h, int64_t w, uint64_t seed) {
  Rng base(seed);
  Rng rng_traj = base.fork(1);
  Rng rng_noise = base.fork(2);

  corpus::VideoClip clip;
  clip.fps = 8.0;
  clip.frames = Tensor({t, h, w, 3});

  // Attributes actually rendered; mismatch pulls them away from the prompt.
  const Rgb pc = kPalette[scene.color];
  const Rgb cc = kPalette[kContradiction[scene.color]];
  const Rgb color{pc.r + (cc.r - pc.r) * m.mismatch, pc.g + (cc.g - pc.g) * m.mismatch,
                  pc.b + (cc.b - pc.b) * m.mismatch};
  const double angle = direction_angle(scene.direction) + m.mismatch * std::numbers::pi;
  const int shape = m.mismatch > 0.5 ? (scene.shape + 1) % 3 : scene.shape;

  const double span = static_cast<double>(std::min(h, w));
  const double radius = 0.16 * span;
  const double travel = 0.55 * span;
  const double cx0 = 0.5 * static_cast<double>(w) - 0.5 * travel * std::cos(angle) +
                     rng_traj.uniform(-0.05, 0.05) * span;
  const double cy0 = 0.5 * static_cast<double>(h) - 0.5 * travel * std::sin(angle) +
                     rng_traj.uniform(-0.05, 0.05) * span;

  for (int64_t ti = 0; ti < t; ++ti) {
    const double progress = t > 1 ? static_cast<double>(ti) / static_cast<double>(t - 1)
                                  : 0.0;
    double cx = cx0 + travel * progress * std::cos(angle);
    double cy = cy0 + travel * progress * std::sin(angle);

    // Realness violations. The draws happen every frame regardless of the
    // magnitude so clips rendered from the same seed stay frame-aligned
    // across magnitude variants.
    const double u_tele = rng_traj.uniform();
    const double jx = rng_traj.uniform(0.2, 0.8) * static_cast<double>(w);
    const double jy = rng_traj.uniform(0.2, 0.8) * static_cast<double>(h);
    const double u_gone = rng_traj.uniform();
    bool visible = true;
    if (ti > 0 && u_tele < 0.6 * m.realness) {
      cx = jx;
      cy = jy;
    }
    if (ti > 0 && u_gone < 0.25 * m.realness) visible = false;

    for (int64_t y = 0; y < h; ++y) {
      const double bg = 0.10 + 0.08 * static_cast<double>(y) / static_cast<double>(h);
      for (int64_t x = 0; x < w; ++x) {
        double r = bg, g = bg + 0.01, b = bg + 0.03;
        if (visible) {
          const double d = shape_distance(shape, static_cast<double>(x) - cx,
                                          static_cast<double>(y) - cy, radius);
          const double cov = std::clamp(0.5 - d / 1.5, 0.0, 1.0);
          if (cov > 0.0) {
            r += cov * (color.r - r);
            g += cov * (color.g - g);
            b += cov * (color.b - b);
          }
        }
        clip.at(ti, y, x, 0) = r;
        clip.at(ti, y, x, 1) = g;
        clip.at(ti, y, x, 2) = b;
      }
    }

    gaussian_blur_frame(clip, ti, m.quality * span / 24.0);

    const double noise_std = 0.16 * m.quality;
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        for (int64_t c = 0; c < 3; ++c) {
          const double n = rng_noise.normal(0.0, 1.0);
          if (noise_std > 0.0)
            clip.at(ti, y, x, c) =
                std::clamp(clip.at(ti, y, x, c) + noise_std * n, 0.0, 1.0);
        }
  }
  return clip;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec,
                                          const std::filesystem::path& out_dir) {
  spec.validate();
  SyntheticCorpus out;
  Rng root(spec.seed);

  const int n_prompts = (spec.n_clips + spec.n_models - 1) / spec.n_models;
  for (int i = 0; i < n_prompts; ++i) {
    Rng pr = root.fork(0x1000 + static_cast<uint64_t>(i));
    SceneParams scene;
    scene.color = pr.index(kNumColors);
    scene.shape = pr.index(3);
    scene.direction = pr.index(4);
    corpus::PromptRecord rec;
    char id[16];
    std::snprintf(id, sizeof id, "p%04d", i);
    rec.prompt_id = id;
    rec.text = prompt_text(scene);
    rec.category = static_cast<corpus::PromptCategory>(i % 4);
    rec.source = corpus::PromptSource::curated;
    out.manifest.prompts.push_back(std::move(rec));
  }

  for (int j = 0; j < spec.n_models; ++j) {
    corpus::GeneratorModel g;
    g.name = "synthgen-" + std::string(1, static_cast<char>('a' + j));
    g.fps = spec.fps;
    g.duration_s = static_cast<double>(spec.t) / spec.fps;
    g.width = static_cast<int>(spec.w);
    g.height = static_cast<int>(spec.h);
    g.abilities = {"T2V"};
    out.manifest.models.push_back(std::move(g));
  }

  for (int k = 0; k < spec.n_clips; ++k) {
    const int pi = k / spec.n_models;
    const int mj = k % spec.n_models;
    // Planted per-model offset: later models draw from a wider magnitude
    // range, so the model ranking order is the model index order.
    const double scale =
        spec.n_models > 1
            ? 0.4 + 0.6 * static_cast<double>(mj) / static_cast<double>(spec.n_models - 1)
            : 1.0;
    Rng cr = root.fork(0x2000 + static_cast<uint64_t>(k));
    Magnitudes m;
    m.quality = cr.uniform() * spec.distortion_levels.quality * scale;
    m.realness = cr.uniform() * spec.distortion_levels.realness * scale;
    m.mismatch = cr.uniform() * spec.distortion_levels.mismatch * scale;

    Rng pr = root.fork(0x1000 + static_cast<uint64_t>(pi));
    SceneParams scene;
    scene.color = pr.index(kNumColors);
    scene.shape = pr.index(3);
    scene.direction = pr.index(4);

    corpus::VideoRecord v;
    char id[16];
    std::snprintf(id, sizeof id, "v%05d", k);
    v.video_id = id;
    v.model_name = out.manifest.models[static_cast<size_t>(mj)].name;
    v.prompt_id = out.manifest.prompts[static_cast<size_t>(pi)].prompt_id;
    v.n_frames = static_cast<int>(spec.t);
    v.fps = spec.fps;
    v.width = static_cast<int>(spec.w);
    v.height = static_cast<int>(spec.h);

    if (!out_dir.empty()) {
      const auto clip_dir = out_dir / "clips" / v.video_id;
      const corpus::VideoClip clip =
          render_clip(scene, m, spec.t, spec.h, spec.w, cr.fork(7).next_u64());
      corpus::write_clip(clip, clip_dir);
      v.uri = clip_dir.string();
    }

    out.truth[v.video_id] = planted_scores(m);
    out.magnitudes[v.video_id] = m;
    out.manifest.videos.push_back(std::move(v));
  }

  if (!out_dir.empty())
    corpus::save_manifest(out.manifest, out_dir / "manifest.jsonl");
  return out;
}

std::vector<LabeledClip> make_detection_set(int n_per_class, int64_t t, int64_t h,
                                            int64_t w, uint64_t seed) {
  if (n_per_class < 1) throw ValidationError("detection set: n_per_class must be >= 1");
  Rng root(seed);
  std::vector<LabeledClip> out;
  out.reserve(static_cast<size_t>(2 * n_per_class));
  for (int i = 0; i < 2 * n_per_class; ++i) {
    Rng cr = root.fork(static_cast<uint64_t>(i));
    SceneParams scene;
    scene.color = cr.index(kNumColors);
    scene.shape = cr.index(3);
    scene.direction = cr.index(4);
    const int label = i % 2;
    Magnitudes m;
    if (label == 1) m.realness = cr.uniform(0.6, 1.0);
    LabeledClip lc;
    lc.label = label;
    lc.clip = render_clip(scene, m, t, h, w, cr.fork(7).next_u64());
    out.push_back(std::move(lc));
  }
  return out;
}

std::vector<ShapeClip> make_shape_classification_set(int n, int64_t t, int64_t h,
                                                     int64_t w, uint64_t seed) {
  Rng root(seed);
  std::vector<ShapeClip> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng cr = root.fork(static_cast<uint64_t>(i));
    SceneParams scene;
    scene.color = cr.index(kNumColors);
    scene.shape = i % 3;
    scene.direction = cr.index(4);
    ShapeClip sc;
    sc.shape_class = scene.shape;
    sc.clip = render_clip(scene, Magnitudes{}, t, h, w, cr.fork(7).next_u64());
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace t2v::synthetic
