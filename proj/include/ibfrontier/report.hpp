#pragma once

// JSON and text renderings of analysis results, and the run manifest that
// accompanies every output file.

#include <chrono>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ibfrontier/analysis.hpp"
#include "ibfrontier/io.hpp"
#include "ibfrontier/solver.hpp"
#include "ibfrontier/version.hpp"

namespace ibf {

using json = nlohmann::json;  // object keys are std::map-ordered, so output is stable

inline json to_json(EfficiencyReport const& r, Frontier const& frontier) {
  auto const& p = frontier.points.at(r.matched_index);
  return {{"complexity_bits", r.complexity_bits},
          {"accuracy_bits", r.accuracy_bits},
          {"fitted_beta", r.fitted_beta},
          {"inefficiency_bits", r.inefficiency_bits},
          {"gnid", r.gnid},
          {"matched_point",
           {{"index", r.matched_index},
            {"beta", p.beta},
            {"complexity_bits", p.complexity_bits},
            {"accuracy_bits", p.accuracy_bits},
            {"objective_bits", p.objective_bits},
            {"effective_k", p.effective_k}}}};
}

inline json to_json(BaselineSummary const& b) {
  return {{"num_samples", b.num_samples},     {"inefficiency_mean", b.inefficiency_mean},
          {"inefficiency_sd", b.inefficiency_sd}, {"gnid_mean", b.gnid_mean},
          {"gnid_sd", b.gnid_sd},             {"seed", b.seed}};
}

inline json to_json(CategoryProfile const& c) {
  json meanings = json::array(), features = json::array();
  for (auto const& [label, p] : c.top_meanings) meanings.push_back({{"label", label}, {"probability", p}});
  for (auto const& [label, p] : c.top_features) features.push_back({{"label", label}, {"probability", p}});
  return {{"word", c.word_label}, {"mass", c.mass}, {"top_meanings", meanings}, {"top_features", features}};
}

inline json to_json(std::vector<HierarchyLayer> const& layers) {
  json out = json::array();
  for (auto const& l : layers) {
    json cats = json::array();
    for (auto const& c : l.categories) cats.push_back(to_json(c));
    out.push_back({{"k", l.k},
                   {"beta", l.beta},
                   {"complexity_bits", l.complexity_bits},
                   {"accuracy_bits", l.accuracy_bits},
                   {"categories", cats}});
  }
  return {{"layers", out}};
}

/// One block per layer, one line per category: mass, top meanings, top features.
inline std::string render_hierarchy_text(std::vector<HierarchyLayer> const& layers) {
  std::ostringstream os;
  auto fmt = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return std::string(buf);
  };
  for (auto const& l : layers) {
    os << "k=" << l.k << "  beta=" << io::format_double(l.beta) << "  complexity=" << fmt(l.complexity_bits)
       << "  accuracy=" << fmt(l.accuracy_bits) << '\n';
    for (auto const& c : l.categories) {
      os << "  [" << c.word_label << "] mass=" << fmt(c.mass) << "\n    meanings:";
      for (auto const& [label, p] : c.top_meanings) os << ' ' << label << '(' << fmt(p) << ')';
      os << "\n    features:";
      for (auto const& [label, p] : c.top_features) os << ' ' << label << '(' << fmt(p) << ')';
      os << '\n';
    }
  }
  return os.str();
}

inline json to_json(SolverConfig const& c) {
  return {{"beta_grid", c.beta_grid},
          {"max_clusters", c.max_clusters},
          {"convergence_tol", c.convergence_tol},
          {"max_iterations", c.max_iterations},
          {"mass_prune_threshold", c.mass_prune_threshold},
          {"restarts", c.restarts},
          {"seed", c.seed},
          {"anneal_direction", to_string(c.direction)}};
}

inline SolverConfig solver_config_from_json(json const& j) {
  SolverConfig c;
  c.beta_grid = j.at("beta_grid").get<std::vector<double>>();
  c.max_clusters = j.at("max_clusters").get<std::size_t>();
  c.convergence_tol = j.at("convergence_tol").get<double>();
  c.max_iterations = j.at("max_iterations").get<int>();
  c.mass_prune_threshold = j.at("mass_prune_threshold").get<double>();
  c.restarts = j.at("restarts").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.direction = j.at("anneal_direction").get<std::string>() == "low-to-high" ? AnnealDirection::low_to_high
                                                                           : AnnealDirection::high_to_low;
  return c;
}

/// Provenance for one command run. Written next to each output as
/// `<output>.manifest.json`; it is the only file with wall-clock data.
class RunManifest {
 public:
  explicit RunManifest(std::string command)
      : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  void add_input(std::string const& role, std::filesystem::path const& path) {
    inputs_[role] = {{"path", path.string()}, {"hash", io::file_hash(path)}};
  }
  json& config() { return config_; }
  json& extra() { return extra_; }

  json to_json(std::filesystem::path const& output) const {
    auto const elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json j = extra_;
    j["command"] = command_;
    j["tool_version"] = std::string(kVersion);
    j["config"] = config_;
    j["inputs"] = inputs_.is_null() ? json::object() : inputs_;
    j["output"] = output.filename().string();
    j["duration_seconds"] = elapsed;
    return j;
  }

  void write_for(std::filesystem::path const& output) const {
    io::write_text(manifest_path(output), to_json(output).dump(2) + "\n");
  }

  static std::filesystem::path manifest_path(std::filesystem::path const& output) {
    auto p = output;
    p += ".manifest.json";
    return p;
  }

 private:
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  json config_ = json::object();
  json inputs_;
  json extra_ = json::object();
};

/// Reads a frontier written by `frontier`: the table, its manifest (for the
/// fingerprint and config) and, if recorded, the encoder sidecar.
inline Frontier load_frontier(std::filesystem::path const& csv, MeaningSpace const& space, bool need_encoders = true) {
  Frontier f;
  f.points = io::load_frontier_rows(csv);
  auto const meta_path = RunManifest::manifest_path(csv);
  std::ifstream in(meta_path);
  if (!in) throw ValidationError("missing frontier manifest " + meta_path.string());
  json meta;
  try {
    meta = json::parse(in);
    f.space_fingerprint = meta.at("space_fingerprint").get<std::string>();
    f.config = solver_config_from_json(meta.at("config"));
  } catch (json::exception const& e) {
    throw ValidationError(meta_path.string() + ": malformed manifest (" + e.what() + ")");
  }
  if (auto fp = fingerprint(space); fp != f.space_fingerprint) throw FingerprintMismatch(f.space_fingerprint, fp);
  if (need_encoders) {
    if (!meta.contains("encoders_dir") || meta["encoders_dir"].is_null())
      throw ValidationError(csv.string() + " was written without encoders; rerun `frontier` without --no-encoders");
    io::attach_encoders(f.points, csv.parent_path() / meta["encoders_dir"].get<std::string>(), space);
  }
  return f;
}

}  // namespace ibf
