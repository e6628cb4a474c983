// zibcop: command-line front end for pairwise zero-inflated beta / Frank
// copula dependence testing, network analysis and simulation studies.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zibcop/io.hpp"
#include "zibcop/network.hpp"
#include "zibcop/simulate.hpp"
#include "zibcop/two_stage.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace zibcop;

namespace {

constexpr int kManifestSchema = 1;
constexpr const char* kVersion = "0.1.0";

/// Bad flag values; reported with exit code 1 like CLI11 parse errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataArgs {
  std::string input;
  std::string orientation = "columns";
  std::string covariates;
  std::string p_formula, mu_formula, phi_formula;
  double min_prevalence = 0.20;
  std::string normalize = "tss";
};

struct CommonArgs {
  int threads = default_threads();
  std::uint64_t seed = 1;
  std::string out_dir = ".";
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--input", a.input, "abundance table (TSV or CSV)")->required();
  cmd->add_option("--orientation", a.orientation, "taxa as 'columns' or 'rows'")
      ->check(CLI::IsMember({"columns", "rows"}))
      ->capture_default_str();
  cmd->add_option("--covariates", a.covariates, "covariate table keyed by sample id");
  cmd->add_option("--p-formula", a.p_formula, "covariates for the zero probability, e.g. age+bmi");
  cmd->add_option("--mu-formula", a.mu_formula, "covariates for the beta mean");
  cmd->add_option("--phi-formula", a.phi_formula, "covariates for the beta dispersion");
  cmd->add_option("--min-prevalence", a.min_prevalence, "drop taxa present in fewer samples")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--normalize", a.normalize, "'tss' (total-sum scaling) or 'none' for relative abundances")
      ->check(CLI::IsMember({"tss", "none"}))
      ->capture_default_str();
}

void add_common_options(CLI::App* cmd, CommonArgs& c, bool with_seed = true) {
  cmd->add_option("--threads", c.threads, "worker threads (default: ZIBCOP_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  if (with_seed) cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
  cmd->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
}

struct Loaded {
  AbundanceTable table;
  std::optional<ZibRegressionSpec> spec;
  FilterReport filter;
  int dropped_unmatched = 0;
  int dropped_missing = 0;
};

Loaded load_data(const DataArgs& a) {
  const bool any_formula = !a.p_formula.empty() || !a.mu_formula.empty() || !a.phi_formula.empty();
  if (any_formula && a.covariates.empty()) throw UsageError("formulas need --covariates");
  Loaded out;
  FilterOptions fopt;
  fopt.min_prevalence = a.min_prevalence;
  fopt.normalize = a.normalize == "tss";
  const AbundanceTable raw =
      load_counts(a.input, a.orientation == "rows" ? Orientation::TaxaAsRows : Orientation::TaxaAsColumns);
  out.table = filter_and_normalize(raw, fopt, &out.filter);
  if (!fopt.normalize) {
    if (out.table.values.minCoeff() < 0.0 || out.table.values.maxCoeff() >= 1.0)
      fail(ErrorCode::Domain, a.input + ": with --normalize none every value must lie in [0, 1)");
  }
  if (a.covariates.empty()) return out;

  const auto p = parse_formula(a.p_formula), mu = parse_formula(a.mu_formula), phi = parse_formula(a.phi_formula);
  std::vector<std::string> used;
  for (const auto* terms : {&p, &mu, &phi})
    for (const auto& t : *terms)
      if (std::find(used.begin(), used.end(), t) == used.end()) used.push_back(t);
  const AlignedData al = align_covariates(out.table, load_covariates(a.covariates), used);
  out.table = al.table;
  out.dropped_unmatched = al.dropped_unmatched;
  out.dropped_missing = al.dropped_missing;
  if (any_formula) out.spec = ZibRegressionSpec{design_matrix(al, p), design_matrix(al, mu), design_matrix(al, phi), {}};
  return out;
}

std::uint64_t fnv1a(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t h = 1469598103934665603ull;
  char c;
  while (in.get(c)) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
  return h;
}

json input_record(const std::string& path) {
  std::ostringstream hash;
  hash << std::hex << fnv1a(path);
  return {{"path", path}, {"bytes", fs::file_size(path)}, {"fnv1a64", hash.str()}};
}

json data_flags(const DataArgs& a) {
  return {{"input", a.input},         {"orientation", a.orientation}, {"covariates", a.covariates},
          {"p_formula", a.p_formula}, {"mu_formula", a.mu_formula},   {"phi_formula", a.phi_formula},
          {"min_prevalence", a.min_prevalence}, {"normalize", a.normalize}};
}

json data_inputs(const DataArgs& a) {
  json in = json::array({input_record(a.input)});
  if (!a.covariates.empty()) in.push_back(input_record(a.covariates));
  return in;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::Io, "cannot write " + path.string());
  body(os);
  if (!os) fail(ErrorCode::Io, "error while writing " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  write_file(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

void write_manifest(const fs::path& dir, const std::string& cmd, json inputs, json flags,
                    std::optional<std::uint64_t> seed, int threads) {
  json m = {{"tool", "zibcop"},   {"version", kVersion},        {"manifest_schema", kManifestSchema},
            {"subcommand", cmd},  {"inputs", std::move(inputs)}, {"flags", std::move(flags)},
            {"threads", threads}};
  m["seed"] = seed ? json(*seed) : json(nullptr);
  write_json(dir / "manifest.json", m);
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

json to_json(const ZibFit& f) {
  json j = {{"n", f.n}, {"n_nonzero", f.n_nonzero}, {"loglik", f.loglik}, {"converged", f.converged}};
  if (f.has_covariates) {
    j["rho"] = to_json(f.rho);
    j["delta"] = to_json(f.delta);
    j["kappa"] = to_json(f.kappa);
    j["perfect_separation"] = f.perfect_separation;
  } else {
    j["p"] = f.params.p;
    j["mu"] = f.params.mu;
    j["phi"] = f.params.phi;
  }
  return j;
}

json to_json(const PairFit& f) {
  json cov = json::array();
  for (Eigen::Index r = 0; r < f.cov.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < f.cov.cols(); ++c) row.push_back(f.cov(r, c));
    cov.push_back(row);
  }
  return {{"n", f.n},
          {"theta", f.theta_hat},
          {"theta_var", f.theta_var},
          {"loglik", f.loglik},
          {"lambda", f.lambda},
          {"lrt_stat", f.lrt_stat},
          {"omega", f.omega},
          {"curvature", f.curvature},
          {"p_value", f.p_value},
          {"jackknife_skipped", f.jackknife_skipped},
          {"status",
           {{"boundary_hit", f.status.boundary_hit},
            {"nonconverged", f.status.nonconverged},
            {"degraded_jackknife", f.status.degraded_jackknife},
            {"undefined_test", f.status.undefined_test}}},
          {"margin_i", to_json(f.fit_i)},
          {"margin_j", to_json(f.fit_j)},
          {"cov", cov}};
}

json to_json(const GraphStats& s) {
  return {{"nodes", s.degree.size()},
          {"mean_degree", s.mean_degree},
          {"mean_closeness", s.mean_closeness},
          {"mean_betweenness", s.mean_betweenness},
          {"mean_eigenvector", s.mean_eigenvector},
          {"density", s.density},
          {"diameter", s.diameter},
          {"mean_distance", s.mean_distance},
          {"mean_clustering", s.mean_clustering},
          {"modularity", s.modularity},
          {"components", s.components},
          {"largest_component", s.largest_component},
          {"disconnected", s.disconnected}};
}

json to_json(const NullStatistic& s) {
  return {{"observed", s.observed}, {"null_mean", s.null_mean}, {"null_sd", s.null_sd}, {"p_value", s.p_value}};
}

json filter_json(const Loaded& d) {
  return {{"samples", d.table.sample_ids.size()},
          {"taxa", d.table.taxon_ids.size()},
          {"unassigned_dropped", d.filter.unassigned_dropped},
          {"rare_dropped", d.filter.rare_dropped},
          {"empty_samples_dropped", d.filter.empty_samples_dropped},
          {"covariate_unmatched_dropped", d.dropped_unmatched},
          {"covariate_missing_dropped", d.dropped_missing}};
}

FdrMethod fdr_method(const std::string& s) { return s == "bh" ? FdrMethod::BenjaminiHochberg : FdrMethod::BenjaminiYekutieli; }

// ---------------------------------------------------------------------------

struct FitPairArgs {
  DataArgs data;
  std::vector<std::string> taxa;
  std::string out;
};

void run_fit_pair(const FitPairArgs& a) {
  if (a.taxa.size() != 2 || a.taxa[0] == a.taxa[1]) throw UsageError("--taxa needs two distinct names");
  const Loaded d = load_data(a.data);
  std::vector<Eigen::Index> idx;
  for (const auto& name : a.taxa) {
    const auto it = std::find(d.table.taxon_ids.begin(), d.table.taxon_ids.end(), name);
    if (it == d.table.taxon_ids.end()) fail(ErrorCode::InvalidArgument, "taxon '" + name + "' not present after filtering");
    idx.push_back(it - d.table.taxon_ids.begin());
  }
  std::vector<PairObservation> obs;
  for (Eigen::Index l = 0; l < d.table.values.rows(); ++l)
    obs.emplace_back(d.table.values(l, idx[0]), d.table.values(l, idx[1]));
  const ZibRegressionSpec* spec = d.spec ? &*d.spec : nullptr;
  json j = to_json(independence_test(obs, spec, spec));
  j = json{{"taxon_i", a.taxa[0]}, {"taxon_j", a.taxa[1]}, {"filter", filter_json(d)}, {"fit", j}};
  if (a.out.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  write_json(a.out, j);
  json flags = data_flags(a.data);
  flags["taxa"] = a.taxa;
  flags["out"] = a.out;
  write_manifest(fs::path(a.out).parent_path(), "fit-pair", data_inputs(a.data), flags, std::nullopt, 1);
}

struct NetworkArgs {
  DataArgs data;
  CommonArgs common;
  double alpha = 0.01;
  std::string fdr = "by";
  int clusters = 3;
  int null_reps = 1000;
};

void run_network(const NetworkArgs& a) {
  const Loaded d = load_data(a.data);
  const int n_taxa = static_cast<int>(d.table.taxon_ids.size());
  if (a.clusters > n_taxa)
    fail(ErrorCode::InvalidArgument, "--clusters " + std::to_string(a.clusters) + " exceeds the " +
                                         std::to_string(n_taxa) + " taxa left after filtering");
  PairwiseOptions popt;
  popt.threads = a.common.threads;
  const ZibRegressionSpec* spec = d.spec ? &*d.spec : nullptr;
  const PairTable table = pairwise_analysis(d.table.values, d.table.taxon_ids, spec, popt);
  DependenceNetwork net = build_network(table, a.alpha, fdr_method(a.fdr));
  net.clusters = hierarchical_cluster(net.graph, a.clusters);
  const GraphStats stats = graph_stats(net.graph, net.clusters);

  const fs::path dir = a.common.out_dir;
  write_file(dir / "pairs.tsv", [&](std::ostream& os) { write_pair_table(os, table, net); });
  write_file(dir / "edges.tsv", [&](std::ostream& os) { write_edge_list(os, table, net); });
  write_file(dir / "adjacency.tsv", [&](std::ostream& os) { write_adjacency(os, net); });
  write_file(dir / "nodes.tsv", [&](std::ostream& os) { write_node_metrics(os, net, stats); });

  int skipped = 0, undefined = 0;
  for (const auto& r : table.rows) {
    skipped += r.skipped.has_value();
    undefined += !r.skipped && r.fit.status.undefined_test;
  }
  json summary = {{"filter", filter_json(d)},
                  {"pairs", table.rows.size()},
                  {"pairs_skipped", skipped},
                  {"pairs_undefined_test", undefined},
                  {"edges", net.graph.edges()},
                  {"clusters", a.clusters},
                  {"graph", to_json(stats)}};
  if (a.null_reps > 0) {
    const NullReport nr = er_null_comparison(net.graph, a.null_reps, a.clusters, a.common.seed, a.common.threads);
    summary["null_model"] = {{"reps", nr.reps},
                             {"edges", nr.edges},
                             {"clustering", to_json(nr.clustering)},
                             {"modularity", to_json(nr.modularity)},
                             {"degree_ks", {{"statistic", nr.degree_ks.statistic}, {"p_value", nr.degree_ks.p_value}}}};
  }
  write_json(dir / "summary.json", summary);
  json flags = data_flags(a.data);
  flags.update({{"alpha", a.alpha}, {"fdr", a.fdr}, {"clusters", a.clusters}, {"null_reps", a.null_reps},
                {"out_dir", a.common.out_dir}});
  write_manifest(dir, "network", data_inputs(a.data), flags, a.common.seed, a.common.threads);
}

struct SimulateArgs {
  CommonArgs common;
  std::string preset = "paper-grid";
  std::optional<int> reps, n;
  double alpha = 0.05;
};

void run_simulate(const SimulateArgs& a) {
  SimConfig cfg = a.preset == "paper-grid-regression" ? preset_paper_grid_regression()
                  : a.preset == "paper-grid-null-250" ? preset_paper_grid_null_250()
                                                      : preset_paper_grid();
  if (a.reps) cfg.reps = *a.reps;
  if (a.n) cfg.n = *a.n;
  cfg.seed = a.common.seed;
  cfg.threads = a.common.threads;
  cfg.alpha = a.alpha;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const StudyResult res = run_power_study(cfg);
  const fs::path dir = a.common.out_dir;
  write_file(dir / "study.tsv", [&](std::ostream& os) { write_study_tsv(os, res); });
  json cells = json::array();
  for (const auto& c : res.cells)
    cells.push_back({{"cell", c.cell},
                     {"setting", setting_label(cfg, c.setting)},
                     {"theta", c.theta},
                     {"completed", c.completed},
                     {"failed", c.failed},
                     {"mean", c.mean},
                     {"empirical_var", c.empirical_var},
                     {"mean_jackknife_var", c.mean_jackknife_var},
                     {"reject_lrt", c.reject_lrt},
                     {"reject_pearson", c.reject_pearson},
                     {"reject_spearman", c.reject_spearman},
                     {"reject_kendall", c.reject_kendall}});
  write_json(dir / "study.json", {{"preset", a.preset}, {"n", cfg.n}, {"reps", cfg.reps}, {"cells", cells}});
  write_manifest(dir, "simulate", json::array(),
                 {{"preset", a.preset}, {"n", cfg.n}, {"reps", cfg.reps}, {"alpha", cfg.alpha},
                  {"out_dir", a.common.out_dir}},
                 cfg.seed, cfg.threads);
}

struct StabilityArgs {
  DataArgs data;
  CommonArgs common;
  int boot = 50;
  double alpha = 0.01;
  std::string fdr = "by";
};

void run_stability(const StabilityArgs& a) {
  const Loaded d = load_data(a.data);
  StabilityOptions opt;
  opt.alpha = a.alpha;
  opt.fdr = fdr_method(a.fdr);
  opt.boot = a.boot;
  opt.seed = a.common.seed;
  opt.pairwise.threads = a.common.threads;
  const StabilityReport rep =
      bootstrap_stability(d.table.values, d.table.taxon_ids, d.spec ? &*d.spec : nullptr, opt);
  const fs::path dir = a.common.out_dir;
  write_file(dir / "stability.tsv", [&](std::ostream& os) { write_stability(os, rep); });
  write_file(dir / "selection.tsv", [&](std::ostream& os) { write_selection_frequency(os, rep); });
  double mean_sig = 0;
  for (const auto& r : rep.replicates) mean_sig += r.significant / static_cast<double>(rep.replicates.size());
  write_json(dir / "summary.json", {{"filter", filter_json(d)},
                                    {"boot", a.boot},
                                    {"original_significant", rep.original.size()},
                                    {"mean_significant", mean_sig},
                                    {"mean_overlap", rep.mean_overlap},
                                    {"mean_dice", rep.mean_dice}});
  json flags = data_flags(a.data);
  flags.update({{"boot", a.boot}, {"alpha", a.alpha}, {"fdr", a.fdr}, {"out_dir", a.common.out_dir}});
  write_manifest(dir, "stability", data_inputs(a.data), flags, a.common.seed, a.common.threads);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-inflated beta margins with a Frank copula: pairwise dependence tests and networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  FitPairArgs fp;
  auto* c_fit = app.add_subcommand("fit-pair", "fit one taxon pair and test independence");
  add_data_options(c_fit, fp.data);
  c_fit->add_option("--taxa", fp.taxa, "two taxon ids, comma separated")->required()->delimiter(',');
  c_fit->add_option("--out", fp.out, "output JSON (stdout if omitted)");

  NetworkArgs nw;
  auto* c_net = app.add_subcommand("network", "all-pairs tests, FDR control and network summaries");
  add_data_options(c_net, nw.data);
  add_common_options(c_net, nw.common);
  c_net->add_option("--alpha", nw.alpha, "FDR level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_net->add_option("--fdr", nw.fdr, "'by' or 'bh'")->check(CLI::IsMember({"by", "bh"}))->capture_default_str();
  c_net->add_option("--clusters", nw.clusters, "dendrogram cut")->check(CLI::PositiveNumber)->capture_default_str();
  c_net->add_option("--null-reps", nw.null_reps, "random-graph replicates (0 skips, else >= 100)")
      ->check(CLI::Range(0, 1000000))
      ->capture_default_str();

  SimulateArgs sm;
  auto* c_sim = app.add_subcommand("simulate", "simulation study over a preset grid");
  add_common_options(c_sim, sm.common);
  c_sim->add_option("--preset", sm.preset)
      ->check(CLI::IsMember({"paper-grid", "paper-grid-regression", "paper-grid-null-250"}))
      ->capture_default_str();
  c_sim->add_option("--reps", sm.reps, "replicates per cell");
  c_sim->add_option("--n", sm.n, "sample size");
  c_sim->add_option("--alpha", sm.alpha, "test level")->capture_default_str();

  StabilityArgs st;
  auto* c_stab = app.add_subcommand("stability", "bootstrap stability of the significant pair set");
  add_data_options(c_stab, st.data);
  add_common_options(c_stab, st.common);
  c_stab->add_option("--boot", st.boot, "bootstrap replicates")->check(CLI::Range(2, 100000))->capture_default_str();
  c_stab->add_option("--alpha", st.alpha, "FDR level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_stab->add_option("--fdr", st.fdr, "'by' or 'bh'")->check(CLI::IsMember({"by", "bh"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (c_net->parsed() && nw.null_reps > 0 && nw.null_reps < 100) throw UsageError("--null-reps must be 0 or >= 100");
    if (c_fit->parsed()) run_fit_pair(fp);
    if (c_net->parsed()) run_network(nw);
    if (c_sim->parsed()) run_simulate(sm);
    if (c_stab->parsed()) run_stability(st);
  } catch (const UsageError& e) {
    std::cerr << "zibcop: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "zibcop: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "zibcop: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
