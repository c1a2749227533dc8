// ibf: build meaning spaces and priors, compute IB efficiency frontiers and
// evaluate naming systems against them.
//
// Exit status: 0 success, 1 validation or data error, 2 usage error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "ibfrontier.hpp"
#include "ibfrontier/report.hpp"

namespace fs = std::filesystem;
using namespace ibf;

namespace {

/// Space file plus a need given as a prior CSV or the word "uniform".
MeaningSpace load_space_with_need(fs::path const& space_path, std::string const& need_spec, RunManifest& manifest) {
  manifest.add_input("space", space_path);
  auto space = io::load_space(space_path);
  if (need_spec == "uniform") return attach_need(space, uniform_need);
  manifest.add_input("need", need_spec);
  return attach_need(space, io::load_prior(need_spec, space.meaning_labels()));
}

Distribution load_need_for(std::string const& need_spec, std::vector<std::string> const& meanings) {
  if (need_spec == "uniform") return Distribution::uniform(meanings.size(), meanings);
  return io::load_prior(need_spec, meanings);
}

void write_json(fs::path const& out, json const& j, RunManifest const& manifest) {
  io::write_text(out, j.dump(2) + "\n");
  manifest.write_for(out);
}

std::string config_path;

void add_config(CLI::App* sub) {
  sub->add_option("--config", config_path, "Flat key = value file mirroring the flags; flags take precedence");
}

/// Splices `key = value` lines from a --config file into argv as `--key value`
/// right after the subcommand, skipping keys given on the command line.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].starts_with("--config=")) path = args[i].substr(9);
  }
  if (!path) return args;
  if (!fs::exists(*path)) throw CLI::FileError::Missing(*path);

  auto given = [&](std::string const& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](std::string const& a) { return a == flag || a.starts_with(flag + "="); });
  };
  std::vector<std::string> extra;
  for (auto const& item : CLI::ConfigINI().from_file(*path)) {
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    std::string const flag = "--" + name;
    if (name == "config" || given(flag)) continue;
    if (item.inputs.size() == 1 && (item.inputs[0] == "true" || item.inputs[0] == "false")) {
      if (item.inputs[0] == "true") extra.push_back(flag);
      continue;
    }
    for (auto const& v : item.inputs) {
      extra.push_back(flag);
      extra.push_back(v);
    }
  }
  auto sub = std::find_if(args.begin() + 1, args.end(), [](std::string const& a) { return !a.starts_with("-"); });
  if (sub == args.end()) return args;
  args.insert(sub + 1, extra.begin(), extra.end());
  return args;
}

struct FrontierArgs {
  std::string space, need, out;
  double beta_max = 1024.0;
  std::size_t num_betas = 1500;
  double beta_min = 0.1;
  double tol = 1e-10;
  int max_iter = 30000;
  double prune = kCategoryMassThreshold;
  int restarts = 0;
  std::size_t max_clusters = 0;
  std::string direction = "high-to-low";
  std::uint64_t seed = 0;
  bool no_encoders = false;
};

int run_frontier(FrontierArgs const& a) {
  RunManifest manifest("frontier");
  auto const space = load_space_with_need(a.space, a.need, manifest);
  SolverConfig cfg;
  cfg.beta_grid = log_beta_grid(a.beta_max, a.num_betas, a.beta_min);
  cfg.convergence_tol = a.tol;
  cfg.max_iterations = a.max_iter;
  cfg.mass_prune_threshold = a.prune;
  cfg.restarts = a.restarts;
  cfg.max_clusters = a.max_clusters;
  cfg.seed = a.seed;
  cfg.direction = a.direction == "low-to-high" ? AnnealDirection::low_to_high : AnnealDirection::high_to_low;

  auto const frontier = anneal_frontier(space, cfg);
  fs::path const out(a.out);
  fs::path encoders;
  if (!a.no_encoders) {
    encoders = out;
    encoders += ".encoders";
  }
  io::save_frontier(out, frontier, encoders);

  manifest.config() = to_json(cfg);
  manifest.extra()["space_fingerprint"] = frontier.space_fingerprint;
  manifest.extra()["encoders_dir"] = a.no_encoders ? json(nullptr) : json(encoders.filename().string());
  manifest.extra()["renormalized_rows"] = space.renormalized_rows();
  std::size_t unconverged = 0;
  for (auto const& p : frontier.points) unconverged += p.converged ? 0 : 1;
  manifest.extra()["unconverged_points"] = unconverged;
  manifest.write_for(out);
  if (unconverged > 0)
    std::cerr << "warning: " << unconverged << " of " << frontier.points.size()
              << " points hit the iteration limit before converging\n";
  return 0;
}

struct SystemArgs {
  std::string path, condition;
};

NamingSystem load_system(SystemArgs const& s, std::vector<std::string> const& meanings, RunManifest& manifest,
                         std::string const& role = "system") {
  manifest.add_input(role, s.path);
  return io::load_naming_system(s.path, s.condition, meanings);
}

struct EvalArgs {
  std::string space, need, frontier, out, plot;
  SystemArgs system;
};

int run_eval(EvalArgs const& a) {
  RunManifest manifest("eval");
  auto const space = load_space_with_need(a.space, a.need, manifest);
  manifest.add_input("frontier", a.frontier);
  auto const frontier = load_frontier(a.frontier, space);
  auto const sys = load_system(a.system, space.meaning_labels(), manifest);
  auto const report = fit_beta(sys, space, frontier);
  manifest.config() = {{"condition", a.system.condition}};
  write_json(a.out, to_json(report, frontier), manifest);

  if (!a.plot.empty()) {
    std::ostringstream os;
    os << "series,beta,complexity_bits,accuracy_bits\n";
    for (auto const& p : frontier.points)
      os << "frontier," << io::format_double(p.beta) << ',' << io::format_double(p.complexity_bits) << ','
         << io::format_double(p.accuracy_bits) << '\n';
    os << "system," << io::format_double(report.fitted_beta) << ',' << io::format_double(report.complexity_bits)
       << ',' << io::format_double(report.accuracy_bits) << '\n';
    io::write_text(a.plot, os.str());
    manifest.write_for(a.plot);
  }
  return 0;
}

struct BaselineArgs {
  std::string space, need, frontier, out;
  SystemArgs system;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool include_identity = false;
};

int run_baseline(BaselineArgs const& a) {
  RunManifest manifest("baseline");
  auto const space = load_space_with_need(a.space, a.need, manifest);
  manifest.add_input("frontier", a.frontier);
  auto const frontier = load_frontier(a.frontier, space);
  auto const sys = load_system(a.system, space.meaning_labels(), manifest);
  auto const summary = permutation_baseline(sys, space, frontier, a.samples, a.seed, {a.include_identity, a.threads});
  manifest.config() = {{"condition", a.system.condition},
                       {"samples", a.samples},
                       {"seed", a.seed},
                       {"include_identity", a.include_identity}};
  write_json(a.out, to_json(summary), manifest);
  return 0;
}

struct PairArgs {
  SystemArgs first, second;
  std::string need, out, tag_a = "A", tag_b = "B";
  double weight = 0.5;
};

std::pair<NamingSystem, NamingSystem> load_pair(PairArgs const& a, RunManifest& manifest) {
  auto first = load_system(a.first, {}, manifest, "system_a");
  auto second = load_system(a.second, first.meaning_labels(), manifest, "system_b");
  return {std::move(first), std::move(second)};
}

void emit_scalar(std::string const& out, std::string const& key, double value, RunManifest const& manifest) {
  std::cout << io::format_double(value) << '\n';
  if (!out.empty()) write_json(out, {{key, value}}, manifest);
}

int run_gnid(PairArgs const& a) {
  RunManifest manifest("gnid");
  auto const [first, second] = load_pair(a, manifest);
  if (a.need != "uniform") manifest.add_input("need", a.need);
  auto const need = load_need_for(a.need, first.meaning_labels());
  emit_scalar(a.out, "gnid", gnid(first, second, need), manifest);
  return 0;
}

int run_mixture(PairArgs const& a) {
  RunManifest manifest("mixture");
  auto const [first, second] = load_pair(a, manifest);
  if (a.need != "uniform") manifest.add_input("need", a.need);
  auto const need = load_need_for(a.need, first.meaning_labels());
  manifest.config() = {{"weight", a.weight}, {"tag_a", a.tag_a}, {"tag_b", a.tag_b}};
  double const bits = complexity(mixture_system(first, second, a.weight, a.tag_a, a.tag_b), need);
  emit_scalar(a.out, "complexity_bits", bits, manifest);
  return 0;
}

struct HierarchyArgs {
  std::string space, need, frontier, out, text;
  std::vector<std::size_t> ks;
  std::size_t top = 5;
  double threshold = kCategoryMassThreshold;
};

int run_hierarchy(HierarchyArgs const& a) {
  RunManifest manifest("hierarchy");
  auto const space = load_space_with_need(a.space, a.need, manifest);
  manifest.add_input("frontier", a.frontier);
  auto const frontier = load_frontier(a.frontier, space);
  auto const layers = hierarchy_report(frontier, a.ks, space, a.top, a.threshold);
  manifest.config() = {{"k", a.ks}, {"top", a.top}, {"threshold", a.threshold}};
  write_json(a.out, to_json(layers), manifest);
  auto const text = render_hierarchy_text(layers);
  if (a.text.empty()) {
    std::cout << text;
  } else {
    io::write_text(a.text, text);
    manifest.write_for(a.text);
  }
  return 0;
}

struct MakeSpaceArgs {
  std::string similarity, features, familiarity, out, need_out;
  std::optional<double> gamma;
  bool exclude_diagonal = false;
};

int run_make_space(MakeSpaceArgs const& a) {
  RunManifest manifest("make-space");
  if (a.similarity.empty() == a.features.empty())
    throw CLI::ValidationError("make-space", "give exactly one of --similarity or --features");
  MeaningSpace space;
  if (!a.similarity.empty()) {
    if (!a.need_out.empty()) throw CLI::ValidationError("--need-out", "only applies to --features input");
    manifest.add_input("similarity", a.similarity);
    SimilarityOptions opts;
    opts.gamma = a.gamma;
    opts.include_diagonal = !a.exclude_diagonal;
    auto const simm = io::load_similarity(a.similarity);
    space = meaning_space_from_similarity(simm, opts);
    manifest.config() = {{"gamma", a.gamma ? json(*a.gamma) : json(nullptr)},
                         {"resolved_gamma", a.gamma ? *a.gamma : 1.0 / similarity_sd(simm, opts.include_diagonal)},
                         {"include_diagonal", opts.include_diagonal}};
  } else {
    if (a.familiarity.empty()) throw CLI::ValidationError("--familiarity", "required with --features");
    manifest.add_input("features", a.features);
    manifest.add_input("familiarity", a.familiarity);
    space = meaning_space_from_features(io::load_feature_table(a.features, a.familiarity));
    if (!a.need_out.empty()) {
      io::save_prior(a.need_out, space.need());
      manifest.write_for(a.need_out);
    }
  }
  io::save_space(a.out, space);
  manifest.write_for(a.out);
  return 0;
}

struct MakePriorArgs {
  std::vector<std::string> naming, conditions;
  std::string space, out;
  double epsilon = 0.001;
};

int run_make_prior(MakePriorArgs const& a) {
  RunManifest manifest("make-prior");
  std::vector<NamingCounts> languages;
  for (std::size_t i = 0; i < a.naming.size(); ++i) {
    manifest.add_input("naming_" + std::to_string(i), a.naming[i]);
    for (auto& c : io::load_naming_counts(a.naming[i])) {
      bool const wanted =
          a.conditions.empty() || std::find(a.conditions.begin(), a.conditions.end(), c.condition) != a.conditions.end();
      if (wanted) languages.push_back(std::move(c));
    }
  }
  for (auto const& want : a.conditions) {
    bool found = false;
    for (auto const& l : languages) found = found || l.condition == want;
    if (!found) throw ValidationError("no naming file has condition '" + want + "'");
  }
  std::vector<std::string> order;
  if (!a.space.empty()) {
    manifest.add_input("space", a.space);
    order = io::load_space(a.space).meaning_labels();
  }
  auto const prior = li_prior(languages, order, a.epsilon);
  json conds = json::array();
  for (auto const& l : languages) conds.push_back(l.condition);
  manifest.config() = {{"epsilon", a.epsilon}, {"conditions", conds}};
  io::save_prior(a.out, prior);
  manifest.write_for(a.out);
  return 0;
}

std::vector<std::size_t> parse_k_list(std::string const& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = io::trim(item);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      throw CLI::ValidationError("--k", "expected a comma-separated list of positive integers");
    out.push_back(std::stoul(item));
    if (out.back() == 0) throw CLI::ValidationError("--k", "k must be at least 1");
  }
  if (out.empty()) throw CLI::ValidationError("--k", "list is empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Information Bottleneck efficiency frontiers for semantic domains"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // frontier
  FrontierArgs fa;
  auto* frontier = app.add_subcommand("frontier", "Compute the IB frontier of a meaning space");
  add_config(frontier);
  frontier->add_option("--space", fa.space, "Meaning space CSV")->required();
  frontier->add_option("--need", fa.need, "Prior CSV or 'uniform'")->required();
  frontier->add_option("--beta-max", fa.beta_max, "Largest beta")->capture_default_str();
  frontier->add_option("--num-betas", fa.num_betas, "Grid size including beta = 0")->capture_default_str()->check(CLI::PositiveNumber);
  frontier->add_option("--beta-min", fa.beta_min, "Smallest positive beta of the log grid")->capture_default_str();
  frontier->add_option("--tol", fa.tol, "Convergence tolerance on F_beta (bits)")->capture_default_str();
  frontier->add_option("--max-iter", fa.max_iter, "Iteration limit per beta")->capture_default_str();
  frontier->add_option("--prune", fa.prune, "Mass below which a word is pruned")->capture_default_str();
  frontier->add_option("--restarts", fa.restarts, "Perturbed restarts per beta")->capture_default_str();
  frontier->add_option("--max-clusters", fa.max_clusters, "Word budget (0: one per meaning)")->capture_default_str();
  frontier->add_option("--direction", fa.direction, "Annealing direction")
      ->check(CLI::IsMember({"high-to-low", "low-to-high"}))
      ->capture_default_str();
  frontier->add_option("--seed", fa.seed, "Seed for restart perturbations")->required();
  frontier->add_option("--out", fa.out, "Frontier CSV to write")->required();
  frontier->add_flag("--no-encoders", fa.no_encoders, "Skip the per-point encoder sidecar");

  // eval
  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Fit beta, inefficiency and gNID for a naming system");
  add_config(eval);
  eval->add_option("--space", ea.space)->required();
  eval->add_option("--need", ea.need)->required();
  eval->add_option("--frontier", ea.frontier)->required();
  eval->add_option("--system", ea.system.path, "Naming counts or encoder CSV")->required();
  eval->add_option("--condition", ea.system.condition, "Condition to select from a naming file");
  eval->add_option("--out", ea.out, "Report JSON")->required();
  eval->add_option("--plot-data", ea.plot, "Tidy CSV of the frontier curve and the system point");

  // baseline
  BaselineArgs ba;
  auto* baseline = app.add_subcommand("baseline", "Permutation baseline of hypothetical systems");
  add_config(baseline);
  baseline->add_option("--space", ba.space)->required();
  baseline->add_option("--need", ba.need)->required();
  baseline->add_option("--frontier", ba.frontier)->required();
  baseline->add_option("--system", ba.system.path)->required();
  baseline->add_option("--condition", ba.system.condition);
  baseline->add_option("--samples", ba.samples)->required()->check(CLI::PositiveNumber);
  baseline->add_option("--seed", ba.seed)->required();
  baseline->add_option("--threads", ba.threads, "Worker threads; results do not depend on this")->capture_default_str();
  baseline->add_flag("--include-identity", ba.include_identity, "Use the unpermuted system as sample 0");
  baseline->add_option("--out", ba.out)->required();

  // gnid, mixture
  PairArgs ga, ma;
  auto* gnid_cmd = app.add_subcommand("gnid", "gNID between two naming systems");
  add_config(gnid_cmd);
  gnid_cmd->add_option("--system", ga.first.path)->required();
  gnid_cmd->add_option("--condition", ga.first.condition);
  gnid_cmd->add_option("--system2", ga.second.path)->required();
  gnid_cmd->add_option("--condition2", ga.second.condition);
  gnid_cmd->add_option("--need", ga.need, "Prior CSV or 'uniform'")->required();
  gnid_cmd->add_option("--out", ga.out, "Optional JSON output");

  auto* mixture = app.add_subcommand("mixture", "Complexity of a two-language mixture system");
  add_config(mixture);
  mixture->add_option("--system-a", ma.first.path)->required();
  mixture->add_option("--condition-a", ma.first.condition);
  mixture->add_option("--system-b", ma.second.path)->required();
  mixture->add_option("--condition-b", ma.second.condition);
  mixture->add_option("--need", ma.need, "Prior CSV or 'uniform'")->required();
  mixture->add_option("--weight", ma.weight, "Probability of using system A")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  mixture->add_option("--tag-a", ma.tag_a)->capture_default_str();
  mixture->add_option("--tag-b", ma.tag_b)->capture_default_str();
  mixture->add_option("--out", ma.out, "Optional JSON output");

  // hierarchy
  HierarchyArgs ha;
  std::string k_list;
  auto* hierarchy = app.add_subcommand("hierarchy", "Most informative k-category systems and their profiles");
  add_config(hierarchy);
  hierarchy->add_option("--space", ha.space)->required();
  hierarchy->add_option("--need", ha.need)->required();
  hierarchy->add_option("--frontier", ha.frontier)->required();
  hierarchy->add_option("--k", k_list, "Comma-separated category counts")->required();
  hierarchy->add_option("--top", ha.top, "Classes and features listed per category")->capture_default_str();
  hierarchy->add_option("--threshold", ha.threshold, "Category mass threshold")->capture_default_str();
  hierarchy->add_option("--out", ha.out, "Report JSON")->required();
  hierarchy->add_option("--text", ha.text, "Text table (default: stdout)");

  // make-space
  MakeSpaceArgs sa;
  auto* make_space = app.add_subcommand("make-space", "Meaning space from similarity or feature data");
  add_config(make_space);
  make_space->add_option("--similarity", sa.similarity, "Square similarity CSV");
  make_space->add_option("--gamma", sa.gamma, "Softmax gain (default 1/SD of the similarities)");
  make_space->add_flag("--exclude-diagonal", sa.exclude_diagonal, "Leave the diagonal out of the SD");
  make_space->add_option("--features", sa.features, "Feature probability CSV");
  make_space->add_option("--familiarity", sa.familiarity, "Familiarity CSV");
  make_space->add_option("--need-out", sa.need_out, "Write the familiarity need as a prior CSV");
  make_space->add_option("--out", sa.out, "Space CSV")->required();

  // make-prior
  MakePriorArgs pa;
  auto* make_prior = app.add_subcommand("make-prior", "Least-informative need from naming data");
  add_config(make_prior);
  make_prior->add_option("--naming", pa.naming, "Naming counts file (repeatable)")->required();
  make_prior->add_option("--condition", pa.conditions, "Conditions to include (repeatable; default all)");
  make_prior->add_option("--space", pa.space, "Space CSV fixing the meaning order");
  make_prior->add_option("--epsilon", pa.epsilon, "Additive regularizer")->capture_default_str();
  make_prior->add_option("--out", pa.out, "Prior CSV")->required();

  try {
    auto args = expand_config(argc, argv);
    args.erase(args.begin());
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
    if (!k_list.empty()) ha.ks = parse_k_list(k_list);
  } catch (CLI::ParseError const& e) {
    int const code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*frontier) return run_frontier(fa);
    if (*eval) return run_eval(ea);
    if (*baseline) return run_baseline(ba);
    if (*gnid_cmd) return run_gnid(ga);
    if (*mixture) return run_mixture(ma);
    if (*hierarchy) return run_hierarchy(ha);
    if (*make_space) return run_make_space(sa);
    if (*make_prior) return run_make_prior(pa);
  } catch (CLI::ParseError const& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (std::exception const& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
