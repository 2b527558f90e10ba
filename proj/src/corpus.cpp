#include "t2v/corpus.hpp"

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "t2v/error.hpp"
#include "t2v/rng.hpp"

namespace t2v::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(PromptCategory c) {
  switch (c) {
    case PromptCategory::humans: return "humans";
    case PromptCategory::animals: return "animals";
    case PromptCategory::landscapes: return "landscapes";
    case PromptCategory::surreal: return "surreal";
  }
  throw ValidationError("bad prompt category");
}

PromptCategory prompt_category_from(const std::string& s) {
  if (s == "humans") return PromptCategory::humans;
  if (s == "animals") return PromptCategory::animals;
  if (s == "landscapes") return PromptCategory::landscapes;
  if (s == "surreal") return PromptCategory::surreal;
  throw ParseError("unknown prompt category '" + s + "'");
}

std::string to_string(PromptSource s) {
  return s == PromptSource::curated ? "curated" : "sora_public";
}

PromptSource prompt_source_from(const std::string& s) {
  if (s == "curated") return PromptSource::curated;
  if (s == "sora_public") return PromptSource::sora_public;
  throw ParseError("unknown prompt source '" + s + "'");
}

const PromptRecord* Manifest::find_prompt(const std::string& id) const {
  for (const auto& p : prompts)
    if (p.prompt_id == id) return &p;
  return nullptr;
}

const VideoRecord* Manifest::find_video(const std::string& id) const {
  for (const auto& v : videos)
    if (v.video_id == id) return &v;
  return nullptr;
}

namespace {
int count_words(const std::string& text) {
  std::istringstream is(text);
  std::string w;
  int n = 0;
  while (is >> w) ++n;
  return n;
}

[[noreturn]] void parse_fail(const fs::path& path, int line, const std::string& what) {
  throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}
}  // namespace

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  Manifest m;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  std::set<std::string> prompt_ids, model_names, video_ids;
  std::set<std::pair<std::string, std::string>> model_prompt_pairs;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      parse_fail(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    try {
      const std::string kind = j.at("kind").get<std::string>();
      if (!header_seen) {
        if (kind != "header" || j.at("format").get<std::string>() != "t2v-manifest")
          parse_fail(path, lineno, "first record must be a t2v-manifest header");
        header_seen = true;
        continue;
      }
      if (kind == "prompt") {
        PromptRecord p;
        p.prompt_id = j.at("prompt_id").get<std::string>();
        p.text = j.at("text").get<std::string>();
        p.category = prompt_category_from(j.at("category").get<std::string>());
        p.source = prompt_source_from(j.at("source").get<std::string>());
        if (p.prompt_id.empty()) parse_fail(path, lineno, "empty prompt_id");
        if (count_words(p.text) > 50) parse_fail(path, lineno, "prompt text exceeds 50 words");
        if (!prompt_ids.insert(p.prompt_id).second)
          parse_fail(path, lineno, "duplicate prompt_id '" + p.prompt_id + "'");
        m.prompts.push_back(std::move(p));
      } else if (kind == "model") {
        GeneratorModel g;
        g.name = j.at("name").get<std::string>();
        g.fps = j.at("fps").get<double>();
        g.duration_s = j.at("duration_s").get<double>();
        g.width = j.at("width").get<int>();
        g.height = j.at("height").get<int>();
        for (const auto& a : j.at("abilities")) {
          const std::string s = a.get<std::string>();
          if (s != "T2V" && s != "I2V" && s != "V2V")
            parse_fail(path, lineno, "unknown ability '" + s + "'");
          g.abilities.insert(s);
        }
        if (g.fps <= 0.0) parse_fail(path, lineno, "fps must be > 0");
        if (g.duration_s <= 0.0) parse_fail(path, lineno, "duration_s must be > 0");
        if (!model_names.insert(g.name).second)
          parse_fail(path, lineno, "duplicate model '" + g.name + "'");
        m.models.push_back(std::move(g));
      } else if (kind == "video") {
        VideoRecord v;
        v.video_id = j.at("video_id").get<std::string>();
        v.model_name = j.at("model_name").get<std::string>();
        v.prompt_id = j.at("prompt_id").get<std::string>();
        v.uri = j.at("uri").get<std::string>();
        v.n_frames = j.at("n_frames").get<int>();
        v.fps = j.at("fps").get<double>();
        v.width = j.at("width").get<int>();
        v.height = j.at("height").get<int>();
        if (!video_ids.insert(v.video_id).second)
          parse_fail(path, lineno, "duplicate video_id '" + v.video_id + "'");
        if (!model_prompt_pairs.insert({v.model_name, v.prompt_id}).second)
          parse_fail(path, lineno, "duplicate (model, prompt) pair (" + v.model_name +
                                       ", " + v.prompt_id + ")");
        m.videos.push_back(std::move(v));
      } else {
        parse_fail(path, lineno, "unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      parse_fail(path, lineno, std::string("missing or mistyped field: ") + e.what());
    }
  }
  if (!header_seen)
    throw ParseError(path.string() + ": missing t2v-manifest header line");
  // Referential integrity.
  for (const auto& v : m.videos) {
    if (!prompt_ids.count(v.prompt_id))
      throw IntegrityError("video '" + v.video_id + "' references unknown prompt '" +
                           v.prompt_id + "'");
    if (!model_names.count(v.model_name))
      throw IntegrityError("video '" + v.video_id + "' references unknown model '" +
                           v.model_name + "'");
  }
  return m;
}

void save_manifest(const Manifest& m, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << json{{"kind", "header"}, {"format", "t2v-manifest"}, {"version", 1}}.dump()
      << "\n";
  for (const auto& p : m.prompts)
    out << json{{"kind", "prompt"},
                {"prompt_id", p.prompt_id},
                {"text", p.text},
                {"category", to_string(p.category)},
                {"source", to_string(p.source)}}
               .dump()
        << "\n";
  for (const auto& g : m.models)
    out << json{{"kind", "model"},   {"name", g.name},
                {"fps", g.fps},      {"duration_s", g.duration_s},
                {"width", g.width},  {"height", g.height},
                {"abilities", g.abilities}}
               .dump()
        << "\n";
  for (const auto& v : m.videos)
    out << json{{"kind", "video"},       {"video_id", v.video_id},
                {"model_name", v.model_name}, {"prompt_id", v.prompt_id},
                {"uri", v.uri},          {"n_frames", v.n_frames},
                {"fps", v.fps},          {"width", v.width},
                {"height", v.height}}
               .dump()
        << "\n";
}

std::vector<int64_t> sample_indices(int64_t source_frames, int64_t n_frames) {
  if (source_frames < 1) throw ValidationError("empty video: no frames to sample");
  if (n_frames < 1) throw ValidationError("n_frames must be >= 1");
  std::vector<int64_t> idx(static_cast<size_t>(n_frames));
  if (n_frames == 1) {
    idx[0] = 0;
    return idx;
  }
  for (int64_t i = 0; i < n_frames; ++i)
    idx[static_cast<size_t>(i)] = (i * (source_frames - 1)) / (n_frames - 1);
  return idx;
}

namespace {
std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05d.png", i);
  return buf;
}

// Half-pixel-center bilinear, no aspect preservation.
void resize_frame(const VideoClip& src, int64_t ti, int size, VideoClip& dst,
                  int64_t dst_ti) {
  const int64_t sh = src.h(), sw = src.w();
  const double sy = static_cast<double>(sh) / size, sx = static_cast<double>(sw) / size;
  for (int64_t y = 0; y < size; ++y) {
    double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(sh - 1));
    const int64_t y0 = static_cast<int64_t>(fy);
    const int64_t y1 = std::min(y0 + 1, sh - 1);
    const double wy = fy - static_cast<double>(y0);
    for (int64_t x = 0; x < size; ++x) {
      double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(sw - 1));
      const int64_t x0 = static_cast<int64_t>(fx);
      const int64_t x1 = std::min(x0 + 1, sw - 1);
      const double wx = fx - static_cast<double>(x0);
      for (int64_t c = 0; c < 3; ++c) {
        const double v00 = src.at(ti, y0, x0, c), v01 = src.at(ti, y0, x1, c);
        const double v10 = src.at(ti, y1, x0, c), v11 = src.at(ti, y1, x1, c);
        dst.at(dst_ti, y, x, c) =
            (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
      }
    }
  }
}

struct ClipMeta {
  double fps = 0.0;
  int n_frames = 0;
};

ClipMeta read_meta(const fs::path& dir) {
  std::ifstream in(dir / "clip.meta");
  if (!in) throw IoError("missing clip metadata: " + (dir / "clip.meta").string());
  std::string line;
  std::getline(in, line);
  try {
    const json j = json::parse(line);
    return {j.at("fps").get<double>(), j.at("n_frames").get<int>()};
  } catch (const json::exception& e) {
    throw ParseError("bad clip metadata in " + dir.string() + ": " + e.what());
  }
}
}  // namespace

VideoClip sample_clip(const VideoRecord& rec, int n_frames, int size) {
  const fs::path dir(rec.uri);
  const ClipMeta meta = read_meta(dir);
  if (meta.n_frames < 1) throw ValidationError("empty video '" + rec.video_id + "'");
  const auto idx = sample_indices(meta.n_frames, n_frames);

  VideoClip out;
  out.fps = meta.fps;
  out.frames = Tensor({n_frames, size, size, 3});

  // Decode each distinct source frame once.
  std::map<int64_t, VideoClip> decoded;
  for (int64_t src_i : idx) {
    if (decoded.count(src_i)) continue;
    const fs::path fp = dir / frame_name(static_cast<int>(src_i));
    cv::Mat img = cv::imread(fp.string(), cv::IMREAD_COLOR);
    if (img.empty()) throw IoError("decode error: cannot read frame " + fp.string());
    VideoClip one;
    one.frames = Tensor({1, img.rows, img.cols, 3});
    for (int y = 0; y < img.rows; ++y) {
      const cv::Vec3b* row = img.ptr<cv::Vec3b>(y);
      for (int x = 0; x < img.cols; ++x) {
        // BGR to RGB
        one.at(0, y, x, 0) = row[x][2] / 255.0;
        one.at(0, y, x, 1) = row[x][1] / 255.0;
        one.at(0, y, x, 2) = row[x][0] / 255.0;
      }
    }
    decoded.emplace(src_i, std::move(one));
  }
  for (size_t i = 0; i < idx.size(); ++i)
    resize_frame(decoded.at(idx[i]), 0, size, out, static_cast<int64_t>(i));
  return out;
}

int write_clip(const VideoClip& clip, const fs::path& dir) {
  fs::create_directories(dir);
  const int64_t T = clip.t(), H = clip.h(), W = clip.w();
  for (int64_t ti = 0; ti < T; ++ti) {
    cv::Mat img(static_cast<int>(H), static_cast<int>(W), CV_8UC3);
    for (int64_t y = 0; y < H; ++y) {
      cv::Vec3b* row = img.ptr<cv::Vec3b>(static_cast<int>(y));
      for (int64_t x = 0; x < W; ++x) {
        auto q = [&](int64_t c) {
          const double v = std::clamp(clip.at(ti, y, x, c), 0.0, 1.0);
          return static_cast<unsigned char>(std::lround(v * 255.0));
        };
        row[x] = cv::Vec3b(q(2), q(1), q(0));  // RGB to BGR
      }
    }
    const fs::path fp = dir / frame_name(static_cast<int>(ti));
    if (!cv::imwrite(fp.string(), img))
      throw IoError("cannot write frame " + fp.string());
  }
  std::ofstream meta(dir / "clip.meta");
  meta << nlohmann::json{{"fps", clip.fps}, {"n_frames", T}}.dump() << "\n";
  return static_cast<int>(T);
}

VideoClip resize_clip(const VideoClip& clip, int size) {
  VideoClip out;
  out.fps = clip.fps;
  out.frames = Tensor({clip.t(), size, size, 3});
  for (int64_t ti = 0; ti < clip.t(); ++ti) resize_frame(clip, ti, size, out, ti);
  return out;
}

namespace {
fs::path disk_cache_dir() {
  const char* env = std::getenv("T2VEVAL_CACHE");
  return env && *env ? fs::path(env) : fs::path();
}

std::string cache_key(const VideoRecord& rec, int n_frames, int size) {
  std::ostringstream os;
  os << rec.video_id << "|" << rec.uri << "|" << n_frames << "|" << size;
  return os.str();
}
}  // namespace

std::shared_ptr<const VideoClip> ClipCache::get(const VideoRecord& rec, int n_frames,
                                                int size) {
  const std::string key = cache_key(rec, n_frames, size);
  {
    std::lock_guard lock(mu_);
    auto it = mem_.find(key);
    if (it != mem_.end()) return it->second;
  }
  const fs::path cache_root = disk_cache_dir();
  fs::path disk_file;
  if (!cache_root.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(key)));
    disk_file = cache_root / (std::string(buf) + ".clip");
    std::ifstream in(disk_file, std::ios::binary);
    if (in) {
      int64_t t = 0, hw = 0;
      double fps = 0.0;
      in.read(reinterpret_cast<char*>(&t), sizeof t);
      in.read(reinterpret_cast<char*>(&hw), sizeof hw);
      in.read(reinterpret_cast<char*>(&fps), sizeof fps);
      if (in && t == n_frames && hw == size) {
        auto clip = std::make_shared<VideoClip>();
        clip->fps = fps;
        clip->frames = Tensor({t, hw, hw, 3});
        in.read(reinterpret_cast<char*>(clip->frames.data()),
                static_cast<std::streamsize>(sizeof(double) * clip->frames.size()));
        if (in) {
          std::lock_guard lock(mu_);
          mem_[key] = clip;
          return clip;
        }
      }
    }
  }
  auto clip = std::make_shared<VideoClip>(sample_clip(rec, n_frames, size));
  if (!cache_root.empty()) {
    std::error_code ec;
    fs::create_directories(cache_root, ec);
    std::ofstream out(disk_file, std::ios::binary);
    if (out) {
      const int64_t t = clip->t(), hw = clip->h();
      out.write(reinterpret_cast<const char*>(&t), sizeof t);
      out.write(reinterpret_cast<const char*>(&hw), sizeof hw);
      out.write(reinterpret_cast<const char*>(&clip->fps), sizeof clip->fps);
      out.write(reinterpret_cast<const char*>(clip->frames.data()),
                static_cast<std::streamsize>(sizeof(double) * clip->frames.size()));
    }
  }
  std::lock_guard lock(mu_);
  mem_[key] = clip;
  return clip;
}

}  // namespace t2v::corpus
