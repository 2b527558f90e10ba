#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "t2v/corpus.hpp"

namespace t2v::subjective {

enum class Dimension { overall = 0, consistency, realness, quality, aesthetic };
constexpr int kNumDimensions = 5;
constexpr std::array<Dimension, 5> kAllDimensions = {
    Dimension::overall, Dimension::consistency, Dimension::realness,
    Dimension::quality, Dimension::aesthetic};

std::string to_string(Dimension d);
Dimension dimension_from(const std::string& s);

// One rater's raw score for one video on one dimension, on the 0..5 scale.
struct RatingRecord {
  std::string rater_id;
  std::string video_id;
  Dimension dimension = Dimension::overall;
  double raw_score = 0.0;  // in [0, 5]
  int64_t timestamp = 0;   // seconds since epoch
};

struct MOSEntry {
  std::string video_id;
  Dimension dimension = Dimension::overall;
  double mos = 0.0;  // normalized to [0, 1]
  int n_valid = 0;   // >= 5
};

std::vector<RatingRecord> load_ratings(const std::filesystem::path& path);
void append_ratings(const std::vector<RatingRecord>& ratings,
                    const std::filesystem::path& path);

std::vector<MOSEntry> load_mos(const std::filesystem::path& path);
void save_mos(const std::vector<MOSEntry>& entries, const std::filesystem::path& path);

struct OutlierResult {
  std::vector<double> kept;     // input order preserved
  std::vector<double> removed;  // input order preserved
};

// Scores strictly outside [mu - 2 sigma, mu + 2 sigma] are removed, with mu
// and the sample (n-1) standard deviation computed once on the input. If
// fewer than min_keep values would survive, the min_keep values closest to
// mu are retained instead.
OutlierResult reject_outliers(const std::vector<double>& scores, int min_keep = 5);

// Per (video, dimension) group: outlier rejection, then mos = mean(kept)/5.
// Groups with fewer than 5 raw ratings raise a CoverageError naming the
// group. Ratings for videos absent from the corpus raise IntegrityError.
std::vector<MOSEntry> compute_mos(const std::vector<RatingRecord>& ratings,
                                  const corpus::Manifest& corpus);

struct RankingTable {
  std::vector<std::string> models;                       // corpus order
  std::vector<std::array<double, kNumDimensions>> cells; // per model, per dimension
  // Annotations per dimension, mirroring the published table style.
  std::array<std::string, kNumDimensions> best, second, worst;
};

RankingTable model_rankings(const std::vector<MOSEntry>& mos,
                            const corpus::Manifest& corpus);

void save_ranking_csv(const RankingTable& t, const std::filesystem::path& path);
void save_ranking_annotations(const RankingTable& t, const std::filesystem::path& path);

struct SensitivityReport {
  // Sensitivity of the overall score to each sub-dimension, normalized to
  // sum to one. Indexed consistency, realness, quality, aesthetic.
  std::array<double, 4> sensitivity{};
  double fit_quality = 0.0;  // fraction of test predictions within +-0.1
};

// Fits a small MLP from the four sub-dimension MOS values to the overall
// MOS on an 80/20 video split, then reports the mean absolute input
// gradient over the test side.
SensitivityReport sensitivity_analysis(const std::vector<MOSEntry>& mos,
                                       double split_ratio = 0.8, uint64_t seed = 0);

// Histogram of MOS values per dimension (the score-distribution summary).
struct Histogram {
  int bins = 10;
  std::array<std::vector<int>, kNumDimensions> counts;  // bins per dimension
};
Histogram mos_histogram(const std::vector<MOSEntry>& mos, int bins = 10);

}  // namespace t2v::subjective
