#include "t2v/subjective.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "t2v/error.hpp"
#include "t2v/nn.hpp"
#include "t2v/rng.hpp"

namespace t2v::subjective {

using nlohmann::json;

std::string to_string(Dimension d) {
  switch (d) {
    case Dimension::overall: return "overall";
    case Dimension::consistency: return "consistency";
    case Dimension::realness: return "realness";
    case Dimension::quality: return "quality";
    case Dimension::aesthetic: return "aesthetic";
  }
  throw ValidationError("bad dimension");
}

Dimension dimension_from(const std::string& s) {
  for (Dimension d : kAllDimensions)
    if (to_string(d) == s) return d;
  throw ParseError("unknown dimension '" + s + "'");
}

std::vector<RatingRecord> load_ratings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ratings: " + path.string());
  std::vector<RatingRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      RatingRecord r;
      r.rater_id = j.at("rater_id").get<std::string>();
      r.video_id = j.at("video_id").get<std::string>();
      r.dimension = dimension_from(j.at("dimension").get<std::string>());
      r.raw_score = j.at("raw_score").get<double>();
      r.timestamp = j.value("timestamp", int64_t{0});
      if (r.raw_score < 0.0 || r.raw_score > 5.0)
        throw ParseError("raw_score out of [0, 5]");
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void append_ratings(const std::vector<RatingRecord>& ratings,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot write ratings: " + path.string());
  for (const auto& r : ratings)
    out << json{{"rater_id", r.rater_id},
                {"video_id", r.video_id},
                {"dimension", to_string(r.dimension)},
                {"raw_score", r.raw_score},
                {"timestamp", r.timestamp}}
               .dump()
        << "\n";
}

std::vector<MOSEntry> load_mos(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open MOS file: " + path.string());
  std::vector<MOSEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      MOSEntry e;
      e.video_id = j.at("video_id").get<std::string>();
      e.dimension = dimension_from(j.at("dimension").get<std::string>());
      e.mos = j.at("mos").get<double>();
      e.n_valid = j.at("n_valid").get<int>();
      out.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_mos(const std::vector<MOSEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write MOS file: " + path.string());
  for (const auto& e : entries)
    out << json{{"video_id", e.video_id},
                {"dimension", to_string(e.dimension)},
                {"mos", e.mos},
                {"n_valid", e.n_valid}}
               .dump()
        << "\n";
}

OutlierResult reject_outliers(const std::vector<double>& scores, int min_keep) {
  if (scores.empty()) throw ValidationError("reject_outliers: empty score list");
  const size_t n = scores.size();
  double mu = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(n);
  double sigma = 0.0;
  if (n > 1) {
    double ss = 0.0;
    for (double v : scores) ss += (v - mu) * (v - mu);
    sigma = std::sqrt(ss / static_cast<double>(n - 1));
  }
  const double lo = mu - 2.0 * sigma, hi = mu + 2.0 * sigma;

  std::vector<bool> keep(n, true);
  size_t kept_count = 0;
  for (size_t i = 0; i < n; ++i) {
    keep[i] = scores[i] >= lo && scores[i] <= hi;
    kept_count += keep[i] ? 1u : 0u;
  }

  const size_t want = std::min<size_t>(static_cast<size_t>(min_keep), n);
  if (kept_count < want) {
    // Retain the `want` values closest to mu instead (stable on ties).
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return std::abs(scores[a] - mu) < std::abs(scores[b] - mu);
    });
    std::fill(keep.begin(), keep.end(), false);
    for (size_t i = 0; i < want; ++i) keep[order[i]] = true;
  }

  OutlierResult out;
  for (size_t i = 0; i < n; ++i)
    (keep[i] ? out.kept : out.removed).push_back(scores[i]);
  return out;
}

std::vector<MOSEntry> compute_mos(const std::vector<RatingRecord>& ratings,
                                  const corpus::Manifest& corpus) {
  std::map<std::pair<std::string, Dimension>, std::vector<double>> groups;
  for (const auto& r : ratings) {
    if (!corpus.find_video(r.video_id))
      throw IntegrityError("rating references unknown video '" + r.video_id + "'");
    groups[{r.video_id, r.dimension}].push_back(r.raw_score);
  }
  std::vector<MOSEntry> out;
  out.reserve(groups.size());
  for (const auto& [key, scores] : groups) {
    if (scores.size() < 5)
      throw CoverageError("fewer than 5 ratings for video '" + key.first +
                          "' dimension '" + to_string(key.second) + "'");
    const OutlierResult r = reject_outliers(scores, 5);
    MOSEntry e;
    e.video_id = key.first;
    e.dimension = key.second;
    e.n_valid = static_cast<int>(r.kept.size());
    e.mos = std::accumulate(r.kept.begin(), r.kept.end(), 0.0) /
            static_cast<double>(r.kept.size()) / 5.0;
    out.push_back(std::move(e));
  }
  return out;
}

RankingTable model_rankings(const std::vector<MOSEntry>& mos,
                            const corpus::Manifest& corpus) {
  std::map<std::string, std::string> video_model;
  for (const auto& v : corpus.videos) video_model[v.video_id] = v.model_name;

  // model -> dimension -> accumulated (sum, count)
  std::map<std::string, std::array<std::pair<double, int>, kNumDimensions>> acc;
  for (const auto& e : mos) {
    const auto it = video_model.find(e.video_id);
    if (it == video_model.end())
      throw IntegrityError("MOS entry references unknown video '" + e.video_id + "'");
    auto& cell = acc[it->second][static_cast<size_t>(e.dimension)];
    cell.first += e.mos;
    cell.second += 1;
  }

  RankingTable table;
  for (const auto& m : corpus.models) {
    table.models.push_back(m.name);
    std::array<double, kNumDimensions> row{};
    for (Dimension d : kAllDimensions) {
      const auto& cell = acc[m.name][static_cast<size_t>(d)];
      if (cell.second == 0)
        throw CoverageError("model '" + m.name + "' has no scored videos in dimension '" +
                            to_string(d) + "'");
      row[static_cast<size_t>(d)] = cell.first / cell.second;
    }
    table.cells.push_back(row);
  }

  for (int d = 0; d < kNumDimensions; ++d) {
    size_t best = 0, second = 0, worst = 0;
    for (size_t i = 1; i < table.models.size(); ++i) {
      if (table.cells[i][static_cast<size_t>(d)] > table.cells[best][static_cast<size_t>(d)]) best = i;
      if (table.cells[i][static_cast<size_t>(d)] < table.cells[worst][static_cast<size_t>(d)]) worst = i;
    }
    double second_val = -1.0;
    for (size_t i = 0; i < table.models.size(); ++i) {
      if (i == best) continue;
      if (table.cells[i][static_cast<size_t>(d)] > second_val) {
        second_val = table.cells[i][static_cast<size_t>(d)];
        second = i;
      }
    }
    table.best[static_cast<size_t>(d)] = table.models[best];
    table.second[static_cast<size_t>(d)] = table.models.size() > 1 ? table.models[second] : "";
    table.worst[static_cast<size_t>(d)] = table.models[worst];
  }
  return table;
}

void save_ranking_csv(const RankingTable& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ranking table: " + path.string());
  out << "model";
  for (Dimension d : kAllDimensions) out << "," << to_string(d);
  out << "\n";
  char buf[32];
  for (size_t i = 0; i < t.models.size(); ++i) {
    out << t.models[i];
    for (int d = 0; d < kNumDimensions; ++d) {
      std::snprintf(buf, sizeof buf, "%.3f", t.cells[i][static_cast<size_t>(d)]);
      out << "," << buf;
    }
    out << "\n";
  }
}

void save_ranking_annotations(const RankingTable& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ranking annotations: " + path.string());
  out << "dimension,max_model,second_model,min_model\n";
  for (Dimension d : kAllDimensions) {
    const auto i = static_cast<size_t>(d);
    out << to_string(d) << "," << t.best[i] << "," << t.second[i] << "," << t.worst[i]
        << "\n";
  }
}

SensitivityReport sensitivity_analysis(const std::vector<MOSEntry>& mos,
                                       double split_ratio, uint64_t seed) {
  // Collect videos scored on all five dimensions.
  std::map<std::string, std::array<std::pair<bool, double>, kNumDimensions>> by_video;
  for (const auto& e : mos)
    by_video[e.video_id][static_cast<size_t>(e.dimension)] = {true, e.mos};
  std::vector<std::array<double, 5>> rows;  // overall, then the four inputs
  for (const auto& [id, dims] : by_video) {
    bool complete = true;
    for (const auto& [present, _] : dims) complete = complete && present;
    if (!complete) continue;
    rows.push_back({dims[0].second, dims[1].second, dims[2].second, dims[3].second,
                    dims[4].second});
  }
  if (rows.size() < 20)
    throw CoverageError("sensitivity analysis needs >= 20 fully scored videos, have " +
                        std::to_string(rows.size()));

  Rng rng(seed);
  std::vector<size_t> order(rows.size());
  std::iota(order.begin(), order.end(), size_t{0});
  rng.shuffle(order);
  const size_t n_train =
      static_cast<size_t>(std::floor(split_ratio * static_cast<double>(rows.size())));

  const int64_t n_tr = static_cast<int64_t>(n_train);
  const int64_t n_te = static_cast<int64_t>(rows.size() - n_train);
  Tensor xtr({n_tr, 4}), ytr({n_tr, 1}), xte({n_te, 4}), yte({n_te, 1});
  for (int64_t i = 0; i < n_tr; ++i) {
    const auto& r = rows[order[static_cast<size_t>(i)]];
    for (int64_t c = 0; c < 4; ++c) xtr.at(i, c) = r[static_cast<size_t>(c) + 1];
    ytr.at(i, 0) = r[0];
  }
  for (int64_t i = 0; i < n_te; ++i) {
    const auto& r = rows[order[n_train + static_cast<size_t>(i)]];
    for (int64_t c = 0; c < 4; ++c) xte.at(i, c) = r[static_cast<size_t>(c) + 1];
    yte.at(i, 0) = r[0];
  }

  // Small tanh MLP trained full-batch.
  Rng init = rng.fork(1);
  nn::Linear fc1("sens.fc1", 4, 16, init);
  nn::Linear fc2("sens.fc2", 16, 1, init);
  std::vector<nn::Parameter*> params;
  fc1.collect(params);
  fc2.collect(params);
  nn::Adam adam;
  const Tensor target = ytr;
  for (int iter = 0; iter < 4000; ++iter) {
    nn::Graph g(true);
    auto pred = fc2.forward(g, ad::tanh_(fc1.forward(g, ad::constant(xtr))));
    auto loss = ad::mean_all(ad::mul(ad::sub(pred, ad::constant(target)),
                                     ad::sub(pred, ad::constant(target))));
    nn::Adam::zero_grad(params);
    ad::backward(loss);
    nn::accumulate_param_grads(loss);
    adam.step(params, 0.01);
  }

  SensitivityReport report;
  int within = 0;
  std::array<double, 4> grad_acc{};
  for (int64_t i = 0; i < n_te; ++i) {
    Tensor xi({1, 4});
    for (int64_t c = 0; c < 4; ++c) xi.at(0, c) = xte.at(i, c);
    nn::Graph g(true);
    ad::Var input = ad::leaf(xi, true);
    auto pred = fc2.forward(g, ad::tanh_(fc1.forward(g, input)));
    ad::backward(pred);
    const Tensor gin = ad::input_grad(input);
    for (int64_t c = 0; c < 4; ++c)
      grad_acc[static_cast<size_t>(c)] += std::abs(gin.at(0, c));
    if (std::abs(pred.scalar() - yte.at(i, 0)) <= 0.1) ++within;
  }
  double total = 0.0;
  for (double v : grad_acc) total += v;
  if (total <= 0.0) throw DegenerateDataError("sensitivity analysis: zero gradients");
  for (size_t c = 0; c < 4; ++c) report.sensitivity[c] = grad_acc[c] / total;
  report.fit_quality = static_cast<double>(within) / static_cast<double>(n_te);
  return report;
}

Histogram mos_histogram(const std::vector<MOSEntry>& mos, int bins) {
  Histogram h;
  h.bins = bins;
  for (auto& c : h.counts) c.assign(static_cast<size_t>(bins), 0);
  for (const auto& e : mos) {
    int b = static_cast<int>(e.mos * bins);
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[static_cast<size_t>(e.dimension)][static_cast<size_t>(b)];
  }
  return h;
}

}  // namespace t2v::subjective
