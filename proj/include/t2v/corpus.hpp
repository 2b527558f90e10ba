#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "t2v/tensor.hpp"

namespace t2v::corpus {

enum class PromptCategory { humans, animals, landscapes, surreal };
enum class PromptSource { curated, sora_public };

std::string to_string(PromptCategory c);
PromptCategory prompt_category_from(const std::string& s);
std::string to_string(PromptSource s);
PromptSource prompt_source_from(const std::string& s);

struct PromptRecord {
  std::string prompt_id;
  std::string text;  // at most 50 words
  PromptCategory category = PromptCategory::surreal;
  PromptSource source = PromptSource::curated;

  bool operator==(const PromptRecord&) const = default;
};

struct GeneratorModel {
  std::string name;
  double fps = 0.0;
  double duration_s = 0.0;
  int width = 0, height = 0;
  std::set<std::string> abilities;  // subset of {T2V, I2V, V2V}

  bool operator==(const GeneratorModel&) const = default;
};

struct VideoRecord {
  std::string video_id;
  std::string model_name;
  std::string prompt_id;
  std::string uri;  // directory of numbered PNG frames plus clip.meta
  int n_frames = 0;
  double fps = 0.0;
  int width = 0, height = 0;

  bool operator==(const VideoRecord&) const = default;
};

struct Manifest {
  std::vector<PromptRecord> prompts;
  std::vector<GeneratorModel> models;
  std::vector<VideoRecord> videos;

  const PromptRecord* find_prompt(const std::string& id) const;
  const VideoRecord* find_video(const std::string& id) const;

  bool operator==(const Manifest&) const = default;
};

// JSON-lines manifest: a header line, then one record per line with a
// "kind" discriminator in {prompt, model, video}. Load validates every
// cross-reference and rejects duplicates.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& m, const std::filesystem::path& path);

// Decoded pixels. frames has shape [T, H, W, 3] with values in [0, 1].
struct VideoClip {
  Tensor frames;
  double fps = 0.0;

  int64_t t() const { return frames.shape()[0]; }
  int64_t h() const { return frames.shape()[1]; }
  int64_t w() const { return frames.shape()[2]; }
  double& at(int64_t ti, int64_t y, int64_t x, int64_t c) {
    return frames[((ti * h() + y) * w() + x) * 3 + c];
  }
  double at(int64_t ti, int64_t y, int64_t x, int64_t c) const {
    return frames[((ti * h() + y) * w() + x) * 3 + c];
  }
  // Rank-2 view [T*H*W x 3] for the encoders.
  Tensor tokens() const { return frames.reshaped({t() * h() * w(), 3}); }
};

// Uniform frame-index selection: floor(i*(N-1)/(n-1)) in exact integer
// arithmetic; first and last source frames always included for n >= 2.
std::vector<int64_t> sample_indices(int64_t source_frames, int64_t n_frames);

// Reads the clip directory behind `rec`, picks n_frames uniformly and
// bilinearly resizes each to size x size.
VideoClip sample_clip(const VideoRecord& rec, int n_frames, int size);

// Writes a clip as numbered PNGs plus a one-line metadata file; returns the
// number of frames written.
int write_clip(const VideoClip& clip, const std::filesystem::path& dir);

VideoClip resize_clip(const VideoClip& clip, int size);

// Decode cache: in-memory always, plus an on-disk tier rooted at the
// T2VEVAL_CACHE directory when that environment variable is set.
class ClipCache {
 public:
  std::shared_ptr<const VideoClip> get(const VideoRecord& rec, int n_frames, int size);

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const VideoClip>> mem_;
};

}  // namespace t2v::corpus
