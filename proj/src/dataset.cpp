#include "threshcal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "csv_detail.hpp"
#include "threshcal/errors.hpp"
#include "threshcal/rng.hpp"

namespace threshcal {

using nlohmann::json;

bool LabeledScoreRecord::score_missing() const { return std::isnan(score); }

std::size_t ScoreDataset::count(Label l) const {
  std::size_t n = 0;
  for (const auto& r : records) n += (r.label == l);
  return n;
}

std::vector<double> ScoreDataset::scores() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.score);
  return out;
}

std::vector<double> ScoreDataset::scores(Label l) const {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.label == l) out.push_back(r.score);
  }
  return out;
}

std::vector<Label> ScoreDataset::labels() const {
  std::vector<Label> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

void to_json(json& j, const CleaningReport& r) {
  j = json{{"rows_in", r.rows_in},
           {"rows_dropped_missing_score", r.rows_dropped_missing_score},
           {"rows_dropped_bad_label", r.rows_dropped_bad_label},
           {"rows_out", r.rows_out}};
}

FileFormat parse_format(const std::string& name) {
  if (name == "csv" || name == "CSV") return FileFormat::CSV;
  if (name == "jsonl" || name == "JSONL" || name == "ndjson") return FileFormat::JSONL;
  raise(Errc::ConfigInvalid, "unknown file format '" + name + "' (expected csv or jsonl)");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Unparseable text becomes the missing marker (NaN); "nan"/"inf" parse to
// the corresponding IEEE values and are dropped later by clean().
double parse_score_text(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + s.size()) return std::numeric_limits<double>::quiet_NaN();
  return v;
}

Label map_label(const std::string& value, const LoadSpec& spec, std::size_t row) {
  if (value == spec.pass_token) return Label::PASS;
  if (value == spec.fail_token) return Label::FAIL;
  raise(Errc::LabelUnmapped,
        "row " + std::to_string(row) + ": label '" + value + "' matches neither '" +
            spec.pass_token + "' nor '" + spec.fail_token + "'");
}

ScoreDataset load_csv(const std::filesystem::path& path, const LoadSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto rows = detail::parse_csv(buf.str());
  if (rows.empty()) raise(Errc::MissingField, "empty file: " + path.string());

  const auto& header = rows.front();
  auto col_of = [&](const std::string& name) -> long {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  const long score_col = col_of(spec.score_field);
  const long label_col = col_of(spec.label_field);
  if (score_col < 0) raise(Errc::MissingField, spec.score_field);
  if (label_col < 0) raise(Errc::MissingField, spec.label_field);
  const long id_col = col_of(spec.id_field);
  const long source_col = col_of(spec.source_field);

  ScoreDataset ds;
  ds.metric_name = spec.metric_name;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    auto cell = [&](long c) -> std::string {
      return (c >= 0 && static_cast<std::size_t>(c) < cells.size()) ? cells[c] : "";
    };
    LabeledScoreRecord rec;
    rec.id = id_col >= 0 ? cell(id_col) : std::to_string(r - 1);
    rec.score = parse_score_text(cell(score_col));
    rec.label = map_label(cell(label_col), spec, r);
    rec.source = cell(source_col);
    for (std::size_t c = 0; c < header.size(); ++c) {
      const long lc = static_cast<long>(c);
      if (lc == score_col || lc == label_col || lc == id_col || lc == source_col) continue;
      rec.extras[header[c]] = cell(lc);
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

std::string json_scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

ScoreDataset load_jsonl(const std::filesystem::path& path, const LoadSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  ScoreDataset ds;
  ds.metric_name = spec.metric_name;
  std::string line;
  std::size_t line_no = 0;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      raise(Errc::IoError, "invalid JSON at line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) {
      raise(Errc::IoError, "line " + std::to_string(line_no) + " is not a JSON object");
    }
    if (!obj.contains(spec.label_field)) raise(Errc::MissingField, spec.label_field);

    LabeledScoreRecord rec;
    rec.id = obj.contains(spec.id_field) ? json_scalar_to_string(obj[spec.id_field])
                                         : std::to_string(index);
    if (obj.contains(spec.score_field)) {
      const json& sv = obj[spec.score_field];
      if (sv.is_number()) {
        rec.score = sv.get<double>();
      } else if (sv.is_string()) {
        rec.score = parse_score_text(sv.get<std::string>());
      }  // null / other types stay missing
    }
    rec.label = map_label(json_scalar_to_string(obj[spec.label_field]), spec, line_no);
    if (obj.contains(spec.source_field) && obj[spec.source_field].is_string()) {
      rec.source = obj[spec.source_field].get<std::string>();
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const std::string& key = it.key();
      if (key == spec.score_field || key == spec.label_field || key == spec.id_field ||
          key == spec.source_field) {
        continue;
      }
      rec.extras[key] = json_scalar_to_string(it.value());
    }
    ds.records.push_back(std::move(rec));
    ++index;
  }
  return ds;
}

}  // namespace

ScoreDataset load_dataset(const std::filesystem::path& path, FileFormat format,
                          const LoadSpec& spec) {
  if (!std::filesystem::exists(path)) raise(Errc::FileNotFound, path.string());
  return format == FileFormat::CSV ? load_csv(path, spec) : load_jsonl(path, spec);
}

void write_dataset(const ScoreDataset& dataset, const std::filesystem::path& path,
                   FileFormat format, const LoadSpec& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + path.string() + " for writing");

  const bool any_source = std::any_of(dataset.records.begin(), dataset.records.end(),
                                      [](const auto& r) { return !r.source.empty(); });
  if (format == FileFormat::CSV) {
    std::set<std::string> extra_keys;
    for (const auto& r : dataset.records) {
      for (const auto& [k, v] : r.extras) extra_keys.insert(k);
    }
    out << detail::csv_escape(spec.id_field) << ',' << detail::csv_escape(spec.score_field)
        << ',' << detail::csv_escape(spec.label_field);
    if (any_source) out << ',' << detail::csv_escape(spec.source_field);
    for (const auto& k : extra_keys) out << ',' << detail::csv_escape(k);
    out << '\n';
    for (const auto& r : dataset.records) {
      out << detail::csv_escape(r.id) << ',';
      if (!r.score_missing()) out << detail::format_double(r.score);
      out << ','
          << detail::csv_escape(r.label == Label::PASS ? spec.pass_token : spec.fail_token);
      if (any_source) out << ',' << detail::csv_escape(r.source);
      for (const auto& k : extra_keys) {
        auto it = r.extras.find(k);
        out << ',' << detail::csv_escape(it == r.extras.end() ? "" : it->second);
      }
      out << '\n';
    }
  } else {
    for (const auto& r : dataset.records) {
      json obj;
      obj[spec.id_field] = r.id;
      if (r.score_missing()) {
        obj[spec.score_field] = nullptr;
      } else {
        obj[spec.score_field] = r.score;
      }
      obj[spec.label_field] = r.label == Label::PASS ? spec.pass_token : spec.fail_token;
      if (!r.source.empty()) obj[spec.source_field] = r.source;
      for (const auto& [k, v] : r.extras) {
        if (!obj.contains(k)) obj[k] = v;
      }
      out << obj.dump() << '\n';
    }
  }
  if (!out) raise(Errc::IoError, "write failed: " + path.string());
}

std::pair<ScoreDataset, CleaningReport> clean(const ScoreDataset& dataset) {
  CleaningReport report;
  report.rows_in = dataset.records.size();
  ScoreDataset out;
  out.metric_name = dataset.metric_name;
  for (const auto& r : dataset.records) {
    if (!std::isfinite(r.score) || r.score < 0.0 || r.score > 1.0) {
      ++report.rows_dropped_missing_score;
      continue;
    }
    out.records.push_back(r);
  }
  report.rows_out = out.records.size();
  if (out.records.empty()) {
    raise(Errc::EmptyAfterCleaning, "no records with a valid score in [0,1]");
  }
  return {std::move(out), report};
}

FoldAssignment stratified_kfold(const ScoreDataset& dataset, int k, std::uint64_t seed) {
  if (k < 2) raise(Errc::ConfigInvalid, "k must be at least 2");
  std::vector<std::size_t> fail_idx, pass_idx;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    (dataset.records[i].label == Label::PASS ? pass_idx : fail_idx).push_back(i);
  }
  for (const auto* cls : {&fail_idx, &pass_idx}) {
    if (cls->size() < static_cast<std::size_t>(k)) {
      const Label l = cls == &fail_idx ? Label::FAIL : Label::PASS;
      raise(Errc::TooFewPerClass, std::string(label_name(l)) + " has " +
                                      std::to_string(cls->size()) + " records, need at least " +
                                      std::to_string(k));
    }
  }

  FoldAssignment fa;
  fa.k = k;
  fa.seed = seed;
  fa.fold_of.assign(dataset.records.size(), -1);
  Rng rng(seed);
  // Shuffle within each class, then deal round-robin. The dealing offset
  // carries over between classes so overall fold sizes differ by <= 1.
  int next_fold = 0;
  for (auto* cls : {&fail_idx, &pass_idx}) {
    rng.shuffle(*cls);
    for (std::size_t j = 0; j < cls->size(); ++j) {
      fa.fold_of[(*cls)[j]] = next_fold;
      next_fold = (next_fold + 1) % k;
    }
  }
  return fa;
}

std::pair<ScoreDataset, ScoreDataset> split_holdout(const ScoreDataset& dataset,
                                                    double calib_fraction,
                                                    std::uint64_t seed, bool stratified) {
  if (!(calib_fraction > 0.0 && calib_fraction < 1.0)) {
    raise(Errc::DegenerateSplit, "calib_fraction must lie in (0,1)");
  }
  const std::size_t n = dataset.records.size();
  std::vector<bool> in_calib(n, false);
  Rng rng(seed);
  auto assign = [&](std::vector<std::size_t>& idx) {
    const std::size_t m =
        static_cast<std::size_t>(std::llround(calib_fraction * static_cast<double>(idx.size())));
    rng.shuffle(idx);
    for (std::size_t j = 0; j < m && j < idx.size(); ++j) in_calib[idx[j]] = true;
  };
  if (stratified) {
    std::vector<std::size_t> fail_idx, pass_idx;
    for (std::size_t i = 0; i < n; ++i) {
      (dataset.records[i].label == Label::PASS ? pass_idx : fail_idx).push_back(i);
    }
    assign(fail_idx);
    assign(pass_idx);
  } else {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    assign(idx);
  }

  std::vector<std::size_t> first, second;
  for (std::size_t i = 0; i < n; ++i) {
    (in_calib[i] ? second : first).push_back(i);
  }
  if (first.empty() || second.empty()) {
    raise(Errc::DegenerateSplit, "a split part would be empty at fraction " +
                                     std::to_string(calib_fraction));
  }
  return {subset(dataset, first), subset(dataset, second)};
}

ScoreDataset subset(const ScoreDataset& dataset, const std::vector<std::size_t>& indices) {
  ScoreDataset out;
  out.metric_name = dataset.metric_name;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(dataset.records[i]);
  return out;
}

std::pair<ScoreDataset, ScoreDataset> fold_split(const ScoreDataset& dataset,
                                                 const FoldAssignment& folds, int fold) {
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    (folds.fold_of[i] == fold ? test : train).push_back(i);
  }
  return {subset(dataset, train), subset(dataset, test)};
}

}  // namespace threshcal
