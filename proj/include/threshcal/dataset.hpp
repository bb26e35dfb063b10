#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace threshcal {

enum class Label { FAIL = 0, PASS = 1 };

inline const char* label_name(Label l) { return l == Label::PASS ? "PASS" : "FAIL"; }

// One (score, label) observation. A NaN score marks a missing or
// unparseable value; clean() removes those records.
struct LabeledScoreRecord {
  std::string id;
  double score = std::numeric_limits<double>::quiet_NaN();
  Label label = Label::FAIL;
  std::string source;
  std::map<std::string, std::string> extras;

  bool score_missing() const;
  bool operator==(const LabeledScoreRecord&) const = default;
};

struct ScoreDataset {
  std::vector<LabeledScoreRecord> records;
  std::string metric_name;

  std::size_t size() const { return records.size(); }
  std::size_t count(Label l) const;
  std::vector<double> scores() const;
  std::vector<double> scores(Label l) const;
  std::vector<Label> labels() const;
  bool has_both_labels() const { return count(Label::PASS) > 0 && count(Label::FAIL) > 0; }

  bool operator==(const ScoreDataset&) const = default;
};

struct CleaningReport {
  std::size_t rows_in = 0;
  std::size_t rows_dropped_missing_score = 0;
  std::size_t rows_dropped_bad_label = 0;
  std::size_t rows_out = 0;
};

void to_json(nlohmann::json& j, const CleaningReport& r);

// k-fold assignment of record indices; per-label counts across folds
// differ by at most one.
struct FoldAssignment {
  int k = 0;
  std::vector<int> fold_of;  // record index -> fold in [0, k)
  std::uint64_t seed = 0;
};

enum class FileFormat { CSV, JSONL };

FileFormat parse_format(const std::string& name);

// Field names and label tokens used when reading or writing files. The
// "id" and "source" columns are picked up when present.
struct LoadSpec {
  std::string score_field = "score";
  std::string label_field = "label";
  std::string pass_token = "PASS";
  std::string fail_token = "FAIL";
  std::string id_field = "id";
  std::string source_field = "source";
  std::string metric_name;
};

ScoreDataset load_dataset(const std::filesystem::path& path, FileFormat format,
                          const LoadSpec& spec = {});

void write_dataset(const ScoreDataset& dataset, const std::filesystem::path& path,
                   FileFormat format, const LoadSpec& spec = {});

// Keeps exactly the records with a finite score in [0, 1]; order preserved.
std::pair<ScoreDataset, CleaningReport> clean(const ScoreDataset& dataset);

FoldAssignment stratified_kfold(const ScoreDataset& dataset, int k, std::uint64_t seed);

// Splits into (I1, I2) where I2 holds about calib_fraction of the records.
// Record order within each part follows the input order.
std::pair<ScoreDataset, ScoreDataset> split_holdout(const ScoreDataset& dataset,
                                                    double calib_fraction,
                                                    std::uint64_t seed, bool stratified);

ScoreDataset subset(const ScoreDataset& dataset, const std::vector<std::size_t>& indices);

// Train/test extraction for one fold of an assignment.
std::pair<ScoreDataset, ScoreDataset> fold_split(const ScoreDataset& dataset,
                                                 const FoldAssignment& folds, int fold);

}  // namespace threshcal
