#pragma once

// Delimited-text file formats: similarity, naming counts, feature tables,
// priors, meaning spaces, encoders and frontier tables.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ibfrontier/errors.hpp"
#include "ibfrontier/ingest.hpp"
#include "ibfrontier/probability.hpp"
#include "ibfrontier/solver.hpp"

namespace ibf::io {

namespace fs = std::filesystem;

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double x) {
  std::array<char, 32> buf{};
  auto const r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return {buf.data(), r.ptr};
}

inline std::string trim(std::string_view s) {
  auto const b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto const e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct Table {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based line of each row

  std::string where(std::size_t row) const { return source + ":" + std::to_string(line_numbers[row]); }
};

/// Splits one line, honoring double-quoted fields; fields are trimmed.
inline std::vector<std::string> split_line(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char const c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

/// Reads a delimited file with a header row. Tab-delimited when the header
/// contains a tab, comma-delimited otherwise. Blank lines are skipped.
inline Table read_table(fs::path const& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "' for reading");
  Table t;
  t.source = path.string();
  std::string line;
  std::size_t lineno = 0;
  char delim = ',';
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (trim(line).empty()) continue;
    if (!have_header) {
      delim = line.find('\t') != std::string::npos ? '\t' : ',';
      t.header = split_line(line, delim);
      have_header = true;
      continue;
    }
    auto fields = split_line(line, delim);
    if (fields.size() != t.header.size())
      throw ValidationError(t.source + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (!have_header) throw ValidationError("'" + path.string() + "' is empty; a header row is required");
  return t;
}

inline double parse_double(std::string const& s, std::string const& where) {
  double x = 0.0;
  auto const* b = s.data();
  auto const* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  auto const r = std::from_chars(b, e, x);
  if (r.ec != std::errc{} || r.ptr != e || b == e)
    throw ValidationError(where + ": '" + s + "' is not a number");
  return x;
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

/// Content hash of a file's bytes (FNV-1a 64), as 16 hex digits.
inline std::string file_hash(fs::path const& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "' for hashing");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

/// Writes through a temporary and renames, so readers never see a partial file.
inline void write_text(fs::path const& path, std::string const& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw ValidationError("failed writing '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

/// Label row/column matrix: header "<corner>,<col labels...>", one labelled row each.
struct LabelledMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Matrix values;
};

inline LabelledMatrix read_labelled_matrix(fs::path const& path) {
  auto const t = read_table(path);
  if (t.header.size() < 2) throw ValidationError(t.source + ": needs a label column and at least one value column");
  LabelledMatrix out;
  out.col_labels.assign(t.header.begin() + 1, t.header.end());
  out.values = Matrix(t.rows.size(), out.col_labels.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out.row_labels.push_back(t.rows[r][0]);
    for (std::size_t c = 1; c < t.rows[r].size(); ++c) out.values(r, c - 1) = parse_double(t.rows[r][c], t.where(r));
  }
  if (t.rows.empty()) throw ValidationError(t.source + ": no data rows");
  return out;
}

inline std::string quote(std::string const& s) {
  if (s.find_first_of(",\"\n\t") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string render_labelled_matrix(std::string const& corner, std::vector<std::string> const& row_labels,
                                          std::vector<std::string> const& col_labels, Matrix const& values) {
  std::ostringstream os;
  os << quote(corner);
  for (auto const& c : col_labels) os << ',' << quote(c);
  os << '\n';
  for (std::size_t r = 0; r < values.rows(); ++r) {
    os << quote(row_labels[r]);
    for (double x : values.row(r)) os << ',' << format_double(x);
    os << '\n';
  }
  return os.str();
}

// -- similarity ------------------------------------------------------------

inline SimilarityMatrix load_similarity(fs::path const& path) {
  auto lm = read_labelled_matrix(path);
  if (lm.row_labels != lm.col_labels)
    throw ValidationError(path.string() + ": row labels must match the header labels in the same order");
  return {std::move(lm.values), std::move(lm.row_labels)};
}

// -- naming counts -----------------------------------------------------------

/// Naming responses grouped by condition, in order of first appearance.
/// Columns: meaning_label, word_label, count[, condition].
inline std::vector<NamingCounts> load_naming_counts(fs::path const& path) {
  auto const t = read_table(path);
  if (t.header.size() != 3 && t.header.size() != 4)
    throw ValidationError(t.source + ": naming file needs columns meaning_label, word_label, count[, condition]");
  std::vector<NamingCounts> out;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto const& row = t.rows[r];
    std::string const cond = row.size() == 4 ? row[3] : std::string{};
    auto [it, fresh] = index.emplace(cond, out.size());
    if (fresh) out.push_back(NamingCounts{{}, cond});
    double const count = parse_double(row[2], t.where(r));
    if (count < 0.0) throw ValidationError(t.where(r) + ": count must be non-negative");
    out[it->second].entries.push_back({row[0], row[1], count});
  }
  if (out.empty()) throw ValidationError(t.source + ": no naming rows");
  return out;
}

inline bool looks_like_naming_counts(fs::path const& path) {
  auto const t = read_table(path);
  if (t.header.size() != 3 && t.header.size() != 4) return false;
  auto const h0 = lower(t.header[0]), h1 = lower(t.header[1]), h2 = lower(t.header[2]);
  return (h0 == "meaning_label" || h0 == "meaning") && (h1 == "word_label" || h1 == "word") && h2 == "count";
}

inline NamingCounts select_condition(std::vector<NamingCounts> const& all, std::string const& condition,
                                     std::string const& source) {
  std::string list;
  for (auto const& c : all) list += (list.empty() ? "" : ", ") + c.condition;
  if (condition.empty()) {
    if (all.size() == 1) return all.front();
    throw ValidationError(source + " holds several conditions (" + list + "); pick one with --condition");
  }
  for (auto const& c : all)
    if (c.condition == condition) return c;
  throw ValidationError(source + " has no condition '" + condition + "' (available: " + list + ")");
}

// -- encoders ---------------------------------------------------------------

inline std::string render_encoder(NamingSystem const& sys) {
  return render_labelled_matrix("meaning", sys.meaning_labels(), sys.word_labels(), sys.encoder());
}

inline void save_encoder(fs::path const& path, NamingSystem const& sys) { write_text(path, render_encoder(sys)); }

inline NamingSystem load_encoder(fs::path const& path) {
  auto lm = read_labelled_matrix(path);
  return NamingSystem::create(std::move(lm.values), std::move(lm.col_labels), std::move(lm.row_labels));
}

/// A naming system from either a naming-count file or a wide encoder
/// matrix, with rows in `meaning_order` when given.
inline NamingSystem load_naming_system(fs::path const& path, std::string const& condition = {},
                                       std::vector<std::string> const& meaning_order = {}) {
  if (looks_like_naming_counts(path))
    return naming_system_from_counts(select_condition(load_naming_counts(path), condition, path.string()),
                                     meaning_order);
  auto sys = load_encoder(path);
  if (meaning_order.empty() || meaning_order == sys.meaning_labels()) return sys;
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < sys.num_meanings(); ++i) idx.emplace(sys.meaning_labels()[i], i);
  if (idx.size() != meaning_order.size())
    throw ValidationError(path.string() + ": has " + std::to_string(idx.size()) + " meanings, expected " +
                          std::to_string(meaning_order.size()));
  Matrix q(meaning_order.size(), sys.num_words());
  for (std::size_t m = 0; m < meaning_order.size(); ++m) {
    auto it = idx.find(meaning_order[m]);
    if (it == idx.end()) throw ValidationError(path.string() + ": missing meaning '" + meaning_order[m] + "'");
    for (std::size_t w = 0; w < sys.num_words(); ++w) q(m, w) = sys.encoder()(it->second, w);
  }
  return NamingSystem::create(std::move(q), sys.word_labels(), meaning_order);
}

// -- priors -----------------------------------------------------------------

inline std::string render_prior(Distribution const& d) {
  std::ostringstream os;
  os << "meaning_label,probability\n";
  for (std::size_t i = 0; i < d.size(); ++i) os << quote(d.labels().at(i)) << ',' << format_double(d[i]) << '\n';
  return os.str();
}

inline void save_prior(fs::path const& path, Distribution const& d) { write_text(path, render_prior(d)); }

/// Two-column (label, value) file keyed by label.
inline std::map<std::string, double> read_keyed_values(fs::path const& path) {
  auto const t = read_table(path);
  if (t.header.size() != 2) throw ValidationError(t.source + ": expected two columns (label, value)");
  std::map<std::string, double> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (!out.emplace(t.rows[r][0], parse_double(t.rows[r][1], t.where(r))).second)
      throw ValidationError(t.where(r) + ": duplicate label '" + t.rows[r][0] + "'");
  return out;
}

inline std::vector<double> align_values(std::map<std::string, double> const& values,
                                        std::vector<std::string> const& labels, std::string const& source) {
  std::vector<std::string> issues;
  std::vector<double> out;
  for (auto const& l : labels) {
    auto it = values.find(l);
    if (it == values.end()) {
      issues.push_back(source + ": no entry for '" + l + "'");
      continue;
    }
    out.push_back(it->second);
  }
  if (values.size() != labels.size() && issues.empty())
    issues.push_back(source + ": has " + std::to_string(values.size()) + " entries, expected " +
                     std::to_string(labels.size()));
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return out;
}

/// Prior CSV (meaning_label, probability), reordered to `meaning_labels`.
inline Distribution load_prior(fs::path const& path, std::vector<std::string> const& meaning_labels) {
  return Distribution::create(align_values(read_keyed_values(path), meaning_labels, path.string()), meaning_labels);
}

// -- feature tables ---------------------------------------------------------

inline FeatureTable load_feature_table(fs::path const& features, fs::path const& familiarity) {
  auto lm = read_labelled_matrix(features);
  FeatureTable t;
  t.familiarity = align_values(read_keyed_values(familiarity), lm.row_labels, familiarity.string());
  t.probabilities = std::move(lm.values);
  t.class_labels = std::move(lm.row_labels);
  t.feature_labels = std::move(lm.col_labels);
  return t;
}

// -- meaning spaces ---------------------------------------------------------

inline std::string render_space(MeaningSpace const& space) {
  return render_labelled_matrix("meaning", space.meaning_labels(), space.universe_labels(), space.representations());
}

inline void save_space(fs::path const& path, MeaningSpace const& space) { write_text(path, render_space(space)); }

inline MeaningSpace load_space(fs::path const& path) {
  auto lm = read_labelled_matrix(path);
  return MeaningSpace::create(std::move(lm.values), std::move(lm.col_labels), std::move(lm.row_labels));
}

// -- frontier tables ----------------------------------------------------------

inline constexpr std::string_view kFrontierHeader =
    "beta,complexity_bits,accuracy_bits,objective_bits,effective_k,converged,iterations";

inline std::string render_frontier(Frontier const& frontier) {
  std::ostringstream os;
  os << kFrontierHeader << '\n';
  for (auto const& p : frontier.points)
    os << format_double(p.beta) << ',' << format_double(p.complexity_bits) << ',' << format_double(p.accuracy_bits)
       << ',' << format_double(p.objective_bits) << ',' << p.effective_k << ',' << (p.converged ? 1 : 0) << ','
       << p.iterations << '\n';
  return os.str();
}

inline std::string encoder_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "point_%05zu.csv", index);
  return buf;
}

/// Frontier table plus, when `encoders_dir` is non-empty, one encoder CSV per point.
inline void save_frontier(fs::path const& csv, Frontier const& frontier, fs::path const& encoders_dir = {}) {
  write_text(csv, render_frontier(frontier));
  if (encoders_dir.empty()) return;
  fs::create_directories(encoders_dir);
  for (std::size_t i = 0; i < frontier.points.size(); ++i)
    save_encoder(encoders_dir / encoder_file_name(i), frontier.points[i].encoder);
}

/// Frontier rows only; encoders and word masses are left empty.
inline std::vector<FrontierPoint> load_frontier_rows(fs::path const& csv) {
  auto const t = read_table(csv);
  std::string header;
  for (auto const& h : t.header) header += (header.empty() ? "" : ",") + h;
  if (header != kFrontierHeader)
    throw ValidationError(t.source + ": not a frontier table (expected header " + std::string(kFrontierHeader) + ")");
  std::vector<FrontierPoint> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto const& row = t.rows[r];
    FrontierPoint p;
    p.beta = parse_double(row[0], t.where(r));
    p.complexity_bits = parse_double(row[1], t.where(r));
    p.accuracy_bits = parse_double(row[2], t.where(r));
    p.objective_bits = parse_double(row[3], t.where(r));
    p.effective_k = static_cast<std::size_t>(parse_double(row[4], t.where(r)));
    p.converged = row[5] == "1";
    p.iterations = static_cast<int>(parse_double(row[6], t.where(r)));
    out.push_back(std::move(p));
  }
  return out;
}

/// Attaches encoders from `encoders_dir` and recomputes word masses under
/// the space's need.
inline void attach_encoders(std::vector<FrontierPoint>& points, fs::path const& encoders_dir, MeaningSpace const& space) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto const path = encoders_dir / encoder_file_name(i);
    if (!fs::exists(path))
      throw ValidationError("missing encoder " + path.string() + "; rerun `frontier` without --no-encoders");
    points[i].encoder = load_naming_system(path, {}, space.meaning_labels());
    points[i].word_mass = detail::word_marginal(points[i].encoder.encoder(), space.need().mass());
  }
}

}  // namespace ibf::io
