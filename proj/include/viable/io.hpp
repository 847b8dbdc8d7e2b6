#pragma once

// Ranked-list CSV files, JSON reports and curve files.
//
// Ranked-list CSV layout (header row required):
//   [realization_id,]rank,item_id,p_<label>,p_<label>,...
//   [realization_id,]rank,item_id,score
// Ranks within a realization must be exactly 1..n. Class-probability columns
// must sum to 1 within 1e-6 on every row.

#include <openssl/evp.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unistd.h>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "viable/alignment.hpp"
#include "viable/errors.hpp"
#include "viable/scan.hpp"

namespace viable::io {

inline constexpr double kRowSumTolerance = 1e-6;

// Policy for empty `score` cells.
enum class MissingScores { Reject, Zero, Renormalize };

inline std::optional<MissingScorePolicy> to_core_policy(MissingScores m) {
  switch (m) {
    case MissingScores::Reject:
      return std::nullopt;
    case MissingScores::Zero:
      return MissingScorePolicy::Zero;
    case MissingScores::Renormalize:
      return MissingScorePolicy::Renormalize;
  }
  return std::nullopt;
}

// Contents of a ranked-list file, realizations in order of first appearance.
struct RankedListData {
  ClassSpace class_space = ClassSpace::scalar();
  bool has_realization_column = false;
  std::vector<std::string> realization_ids;
  std::vector<std::vector<std::string>> item_ids;
  std::vector<AlignmentVector> lists;
};

// Shortest %.12g rendering; "inf" / "-inf" for infinities.
inline std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.12g", value);
  return buffer;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Writes through a temporary file in the same directory, then renames.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot replace '" + path.string() + "': " + ec.message());
  }
}

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

namespace detail {

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"' && field.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(ch);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  fields.push_back(std::move(field));
  return fields;
}

inline std::string quote_csv(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

inline double parse_real(const std::string& text, std::size_t line_no, const std::string& column) {
  if (text.empty()) throw ParseError("empty value in column '" + column + "'", line_no);
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(value)) {
    throw ParseError("invalid number '" + text + "' in column '" + column + "'", line_no);
  }
  return value;
}

inline std::size_t parse_rank(const std::string& text, std::size_t line_no) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError("rank must be a positive integer, got '" + text + "'", line_no);
  }
  const unsigned long long value = std::strtoull(text.c_str(), nullptr, 10);
  if (value == 0) throw ParseError("rank must be >= 1", line_no);
  return static_cast<std::size_t>(value);
}

struct Row {
  std::size_t line = 0;
  std::string realization_id;
  std::optional<std::size_t> rank;
  std::string item_id;
  AlignmentDistribution alignment = AlignmentDistribution::missing_score();
};

struct ParsedTable {
  ClassSpace class_space = ClassSpace::scalar();
  bool has_realization_column = false;
  std::vector<Row> rows;
};

inline ParsedTable parse_table(std::string_view text, MissingScores missing, bool rank_required) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("file is empty; a header row is required", 1);

  std::string_view header_line = lines.front();
  if (header_line.size() >= 3 && header_line.substr(0, 3) == "\xEF\xBB\xBF") header_line.remove_prefix(3);
  const std::vector<std::string> header = split_csv_line(header_line, 1);

  ParsedTable table;
  std::optional<std::size_t> col_realization, col_rank, col_item, col_score;
  std::vector<std::size_t> class_columns;
  std::vector<std::string> labels;
  std::unordered_set<std::string> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (!seen.insert(name).second) throw ParseError("duplicate column '" + name + "'", 1);
    if (name == "realization_id") {
      col_realization = c;
    } else if (name == "rank") {
      col_rank = c;
    } else if (name == "item_id") {
      col_item = c;
    } else if (name == "score") {
      col_score = c;
    } else if (name.size() > 2 && name.compare(0, 2, "p_") == 0) {
      class_columns.push_back(c);
      labels.push_back(name.substr(2));
    } else {
      throw ParseError("unexpected column '" + name + "'", 1);
    }
  }
  if (rank_required && !col_rank) throw ParseError("missing required column 'rank'", 1);
  if (!col_item) throw ParseError("missing required column 'item_id'", 1);
  if (col_score && !class_columns.empty()) throw ParseError("use either p_<label> columns or 'score', not both", 1);
  if (!col_score && class_columns.empty()) throw ParseError("need p_<label> class columns or a 'score' column", 1);
  if (!col_score && class_columns.size() < 2) throw ParseError("need at least two p_<label> class columns", 1);

  table.class_space = col_score ? ClassSpace::scalar() : ClassSpace::categorical(labels);
  table.has_realization_column = col_realization.has_value();

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (lines[li].empty()) throw ParseError("blank line inside data", line_no);
    const std::vector<std::string> fields = split_csv_line(lines[li], line_no);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    Row row;
    row.line = line_no;
    if (col_realization) row.realization_id = fields[*col_realization];
    if (col_rank) row.rank = parse_rank(fields[*col_rank], line_no);
    row.item_id = fields[*col_item];
    if (col_score) {
      const std::string& cell = fields[*col_score];
      if (cell.empty()) {
        if (missing == MissingScores::Reject) {
          throw ParseError("missing score (pass --missing-score zero|renormalize to accept)", line_no);
        }
        row.alignment = AlignmentDistribution::missing_score();
      } else {
        const double s = parse_real(cell, line_no, "score");
        if (s < -1.0 || s > 1.0) throw ParseError("score " + cell + " outside [-1, 1]", line_no);
        row.alignment = AlignmentDistribution::scalar(s);
      }
    } else {
      std::vector<double> probs;
      double total = 0.0;
      for (std::size_t k = 0; k < class_columns.size(); ++k) {
        const double p = parse_real(fields[class_columns[k]], line_no, header[class_columns[k]]);
        if (p < 0.0 || p > 1.0) throw ParseError("probability " + fields[class_columns[k]] + " outside [0, 1]", line_no);
        probs.push_back(p);
        total += p;
      }
      if (std::abs(total - 1.0) > kRowSumTolerance) {
        throw ParseError("class probabilities sum to " + format_number(total) + ", expected 1", line_no);
      }
      if (std::abs(total - 1.0) > kProbabilityTolerance) {
        for (double& p : probs) p /= total;
      }
      row.alignment = AlignmentDistribution::categorical(std::move(probs));
    }
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw ParseError("file has a header but no data rows", 1);
  return table;
}

}  // namespace detail

inline RankedListData parse_ranked_list(std::string_view text, MissingScores missing = MissingScores::Reject) {
  detail::ParsedTable table = detail::parse_table(text, missing, true);

  RankedListData data;
  data.class_space = table.class_space;
  data.has_realization_column = table.has_realization_column;

  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<std::vector<detail::Row*>> groups;
  for (auto& row : table.rows) {
    auto [it, inserted] = group_of.try_emplace(row.realization_id, groups.size());
    if (inserted) {
      groups.emplace_back();
      data.realization_ids.push_back(row.realization_id);
    }
    groups[it->second].push_back(&row);
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& rows = groups[g];
    const std::size_t n = rows.size();
    std::vector<detail::Row*> by_rank(n, nullptr);
    for (detail::Row* row : rows) {
      const std::size_t rank = *row->rank;
      if (rank > n) {
        throw ParseError("rank " + std::to_string(rank) + " exceeds the " + std::to_string(n) +
                             " rows of realization '" + data.realization_ids[g] + "'",
                         row->line);
      }
      if (by_rank[rank - 1] != nullptr) {
        throw ParseError("duplicate rank " + std::to_string(rank) + " in realization '" +
                             data.realization_ids[g] + "'",
                         row->line);
      }
      by_rank[rank - 1] = row;
    }
    std::vector<std::string> items;
    std::vector<AlignmentDistribution> entries;
    items.reserve(n);
    entries.reserve(n);
    for (detail::Row* row : by_rank) {
      items.push_back(row->item_id);
      entries.push_back(row->alignment);
    }
    data.item_ids.push_back(std::move(items));
    data.lists.emplace_back(data.class_space, std::move(entries));
  }
  return data;
}

inline RankedListData read_ranked_list(const std::filesystem::path& path,
                                       MissingScores missing = MissingScores::Reject) {
  return parse_ranked_list(read_file(path), missing);
}

// Unique items of a pool file (same columns; rank and realization_id are
// optional and ignored). The first row of each item_id wins.
struct ItemPool {
  ClassSpace class_space = ClassSpace::scalar();
  std::vector<std::string> item_ids;
  std::vector<AlignmentDistribution> items;
};

inline ItemPool parse_item_pool(std::string_view text, MissingScores missing = MissingScores::Reject) {
  detail::ParsedTable table = detail::parse_table(text, missing, false);
  ItemPool pool;
  pool.class_space = table.class_space;
  std::unordered_set<std::string> seen;
  for (auto& row : table.rows) {
    if (!seen.insert(row.item_id).second) continue;
    pool.item_ids.push_back(row.item_id);
    pool.items.push_back(row.alignment);
  }
  return pool;
}

inline ItemPool read_item_pool(const std::filesystem::path& path, MissingScores missing = MissingScores::Reject) {
  return parse_item_pool(read_file(path), missing);
}

// Renders lists as a ranked-list CSV. Realization ids are written when more
// than one list is given or when `realization_ids` is non-empty.
inline std::string format_ranked_list(const std::vector<AlignmentVector>& lists,
                                      const std::vector<std::vector<std::string>>& item_ids,
                                      const std::vector<std::string>& realization_ids = {}) {
  if (lists.empty()) throw DomainError("nothing to write");
  if (item_ids.size() != lists.size()) throw ShapeError("need item ids for every list");
  const ClassSpace& space = lists.front().class_space();
  const bool with_ids = lists.size() > 1 || !realization_ids.empty();
  if (with_ids && !realization_ids.empty() && realization_ids.size() != lists.size()) {
    throw ShapeError("need one realization id per list");
  }
  std::string out;
  if (with_ids) out += "realization_id,";
  out += "rank,item_id";
  if (space.is_scalar()) {
    out += ",score";
  } else {
    for (const auto& label : space.labels()) out += ",p_" + label;
  }
  out += '\n';
  for (std::size_t r = 0; r < lists.size(); ++r) {
    const AlignmentVector& list = lists[r];
    if (!(list.class_space() == space)) throw DomainError("lists use different class spaces");
    if (item_ids[r].size() != list.size()) throw ShapeError("item id count does not match list length");
    const std::string rid = realization_ids.empty() ? std::to_string(r + 1) : realization_ids[r];
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (with_ids) out += detail::quote_csv(rid) + ',';
      out += std::to_string(i + 1) + ',' + detail::quote_csv(item_ids[r][i]);
      if (space.is_scalar()) {
        out += ',';
        if (list[i].has_score()) out += format_number(list[i].score());
      } else {
        for (double p : list[i].probabilities()) out += ',' + format_number(p);
      }
      out += '\n';
    }
  }
  return out;
}

// Curve rows `param,distance,signed_deviation`, ascending in param.
inline std::string format_curve(const std::vector<CurvePoint>& curve) {
  std::vector<CurvePoint> sorted = curve;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const CurvePoint& a, const CurvePoint& b) { return a.param < b.param; });
  std::string out = "param,distance,signed_deviation\n";
  for (const auto& p : sorted) {
    out += format_number(p.param) + ',' + format_number(p.distance) + ',' + format_number(p.signed_deviation) + '\n';
  }
  return out;
}

using Json = nlohmann::ordered_json;

namespace detail {

inline Json number_to_json(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

inline double number_from_json(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ParseError("invalid number '" + s + "' in report", 0);
  }
  return j.get<double>();
}

template <typename Enum, std::size_t N>
Enum enum_from(const std::string& text, const Enum (&values)[N]) {
  for (Enum v : values) {
    if (to_string(v) == text) return v;
  }
  throw ParseError("unknown value '" + text + "' in report", 0);
}

inline std::string_view to_string(MissingScorePolicy policy) {
  return policy == MissingScorePolicy::Zero ? "zero" : "renormalize";
}

}  // namespace detail

inline Json config_to_json(const AuditConfig& config) {
  Json j;
  j["family"] = std::string(to_string(config.family));
  j["domain"] = Json::array({config.domain.low, config.domain.high});
  j["grid_points"] = config.grid_points;
  j["delta_max"] = config.delta_max;
  j["metric"] = std::string(to_string(config.distance.metric));
  j["effective_n"] = config.distance.effective_n;
  j["effective_n_basis"] = std::string(to_string(config.distance.basis));
  j["small_n_cutoff"] = config.small_n_cutoff;
  j["target_class"] = config.target_class ? Json(*config.target_class) : Json(nullptr);
  j["missing_scores"] = std::string(detail::to_string(config.missing_scores));
  return j;
}

inline AuditConfig config_from_json(const Json& j) {
  AuditConfig config;
  config.family = family_from_string(j.at("family").get<std::string>());
  config.domain = {j.at("domain").at(0).get<double>(), j.at("domain").at(1).get<double>()};
  config.grid_points = j.at("grid_points").get<std::size_t>();
  config.delta_max = j.at("delta_max").get<double>();
  config.distance.metric = detail::enum_from(
      j.at("metric").get<std::string>(),
      {DistanceMetric::BinomialZ, DistanceMetric::ChiSquare, DistanceMetric::AbsScalar});
  config.distance.effective_n = j.at("effective_n").get<std::size_t>();
  config.distance.basis =
      detail::enum_from(j.at("effective_n_basis").get<std::string>(),
                        {SampleBasis::ListLength, SampleBasis::RealizationCount, SampleBasis::Explicit});
  config.small_n_cutoff = j.at("small_n_cutoff").get<std::size_t>();
  if (!j.at("target_class").is_null()) config.target_class = j.at("target_class").get<std::string>();
  config.missing_scores = j.at("missing_scores").get<std::string>() == "zero" ? MissingScorePolicy::Zero
                                                                               : MissingScorePolicy::Renormalize;
  return config;
}

inline Json report_to_json(const ViableReport& report) {
  Json j;
  j["verdict"] = std::string(to_string(report.verdict));
  j["n"] = report.n;
  j["min_distance"] = detail::number_to_json(report.min_distance);
  j["argmin_param"] = report.argmin_param ? Json(*report.argmin_param) : Json(nullptr);
  j["bias_direction_at_argmin"] = std::string(to_string(report.bias_direction_at_argmin));
  Json intervals = Json::array();
  for (const auto& iv : report.viable_intervals) intervals.push_back(Json::array({iv.low, iv.high}));
  j["viable_intervals"] = std::move(intervals);
  j["config"] = config_to_json(report.config);
  Json curve = Json::array();
  for (const auto& p : report.curve) {
    curve.push_back(Json::array(
        {p.param, detail::number_to_json(p.distance), detail::number_to_json(p.signed_deviation)}));
  }
  j["curve"] = std::move(curve);
  return j;
}

inline ViableReport report_from_json(const Json& j) {
  ViableReport report;
  report.verdict = detail::enum_from(j.at("verdict").get<std::string>(),
                                     {Verdict::Fair, Verdict::Unfair, Verdict::TriviallyFairSmallN});
  report.n = j.at("n").get<std::size_t>();
  report.min_distance = detail::number_from_json(j.at("min_distance"));
  if (!j.at("argmin_param").is_null()) report.argmin_param = j.at("argmin_param").get<double>();
  report.bias_direction_at_argmin =
      detail::enum_from(j.at("bias_direction_at_argmin").get<std::string>(),
                        {BiasDirection::Over, BiasDirection::Under, BiasDirection::None});
  for (const auto& iv : j.at("viable_intervals")) {
    report.viable_intervals.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
  }
  report.config = config_from_json(j.at("config"));
  for (const auto& p : j.at("curve")) {
    report.curve.push_back(
        {p.at(0).get<double>(), detail::number_from_json(p.at(1)), detail::number_from_json(p.at(2))});
  }
  return report;
}

}  // namespace viable::io
