#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "biasdef/baselines.hpp"
#include "biasdef/corpus.hpp"
#include "biasdef/defense.hpp"
#include "biasdef/error.hpp"
#include "biasdef/harness.hpp"
#include "biasdef/metrics.hpp"
#include "biasdef/random.hpp"
#include "biasdef/retriever.hpp"
#include "json.hpp"

namespace biasdef::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string fixed(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

// Flag overrides collected during parsing; applied after the config loads.
class Overrides {
 public:
  template <typename T, typename Fn>
  CLI::Option* add(CLI::App* app, const std::string& name, T& var, const std::string& help, Fn apply) {
    CLI::Option* opt = app->add_option(name, var, help)->capture_default_str();
    hooks_.push_back([opt, apply] {
      if (opt->count() > 0) apply();
    });
    return opt;
  }

  void hook(std::function<void()> fn) { hooks_.push_back(std::move(fn)); }

  void apply() const {
    for (const auto& h : hooks_) h();
  }

 private:
  std::vector<std::function<void()>> hooks_;
};

struct ExperimentFlags {
  ExperimentConfig defaults;
  std::string config_path;
  std::string out;
  std::string methods = "nodef,mmr,brra,smart,biasdef";
  std::vector<int> intensities{1, 5, 10};
  std::vector<std::string> directions{"positive", "negative"};
  std::string formats = "json,csv";
  bool timing = false;
  Overrides overrides;
  ExperimentConfig* target = nullptr;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t end = s.find(',', pos);
    if (end == std::string::npos) end = s.size();
    std::string item = s.substr(pos, end - pos);
    if (!item.empty()) out.push_back(item);
    pos = end + 1;
  }
  return out;
}

// Registers the experiment flags shared by simulate and sweep.
void add_experiment_flags(CLI::App* app, ExperimentFlags& f, ExperimentConfig& cfg) {
  ExperimentConfig& d = f.defaults;
  f.target = &cfg;
  app->add_option("--config", f.config_path, "Experiment config file (JSON); built-in defaults when omitted");
  auto& o = f.overrides;
  o.add(app, "--seed", d.seed, "Base seed for all randomness", [&] { cfg.seed = d.seed; });
  app->add_option("--out", f.out,
                  std::string("Output path stem for reports (default: config output.path, or $") + kOutDirEnv +
                      "/experiment)");
  o.add(app, "--methods", f.methods, "Comma-separated methods: nodef,mmr,brra,smart,biasdef",
        [&] { cfg.methods = parse_method_list(f.methods); });
  o.add(app, "--k", d.k, "Context size k", [&] { cfg.k = d.k; });
  o.add(app, "--intensity", f.intensities, "Injection intensities (comma-separated)",
        [&] { cfg.intensities = f.intensities; })
      ->delimiter(',');
  o.add(app, "--direction", f.directions, "Attack directions: positive,negative", [&] {
     cfg.directions.clear();
     for (const auto& s : f.directions) cfg.directions.push_back(parse_direction(s));
   })->delimiter(',');
  o.add(app, "--queries", d.num_queries, "Number of synthetic queries", [&] { cfg.num_queries = d.num_queries; });
  o.add(app, "--dimension", d.dimension, "Embedding dimension", [&] { cfg.dimension = d.dimension; });
  o.add(app, "--benign", d.scene.n_benign, "Benign passages per query", [&] { cfg.scene.n_benign = d.scene.n_benign; });
  o.add(app, "--ps-spread", d.scene.ps_spread, "Benign PS spread along the viewpoint axis",
        [&] { cfg.scene.ps_spread = d.scene.ps_spread; });
  o.add(app, "--repetitions", d.repetitions, "Scene re-draws per query", [&] { cfg.repetitions = d.repetitions; });
  o.add(app, "--threads", d.threads, "Worker threads (0 = hardware concurrency)", [&] { cfg.threads = d.threads; });
  o.add(app, "--j-candidates", d.attack.j_candidates, "Attacker candidate viewpoints J",
        [&] { cfg.attack.j_candidates = d.attack.j_candidates; });
  o.add(app, "--n-adversarial", d.attack.n_adversarial, "Adversarial passages generated per attack",
        [&] { cfg.attack.n_adversarial = d.attack.n_adversarial; });
  o.add(app, "--adherence", d.attack.adherence_ss, "Adherence fraction for both properties", [&] {
    cfg.attack.adherence_ss = d.attack.adherence_ss;
    cfg.attack.adherence_ps = d.attack.adherence_ss;
  });
  o.add(app, "--ss-margin", d.attack.ss_margin, "Property 1 margin over the best benign ss",
        [&] { cfg.attack.ss_margin = d.attack.ss_margin; });
  o.add(app, "--ps-margin", d.attack.ps_margin, "Property 2 margin as a fraction of the benign PS range",
        [&] { cfg.attack.ps_margin = d.attack.ps_margin; });
  o.add(app, "--jitter", d.attack.jitter, "Within-cluster spread of adversarial passages",
        [&] { cfg.attack.jitter = d.attack.jitter; });
  o.add(app, "--bins", d.defense.bins, "BiasDef histogram bins m", [&] { cfg.defense.bins = d.defense.bins; });
  o.add(app, "--epsilon", d.defense.epsilon, "BiasDef histogram smoothing", [&] { cfg.defense.epsilon = d.defense.epsilon; });
  o.add(app, "--delta", d.defense.delta, "BiasDef local-maximum window on ss", [&] { cfg.defense.delta = d.defense.delta; });
  o.add(app, "--mahalanobis-t", d.defense.mahalanobis_threshold, "BiasDef Mahalanobis recovery threshold T",
        [&] { cfg.defense.mahalanobis_threshold = d.defense.mahalanobis_threshold; });
  o.add(app, "--ridge", d.defense.ridge, "BiasDef relative covariance ridge", [&] { cfg.defense.ridge = d.defense.ridge; });
  o.add(app, "--mmr-lambda", d.mmr.lambda, "MMR relevance weight", [&] { cfg.mmr.lambda = d.mmr.lambda; });
  o.add(app, "--brra-noise", d.brra.noise_intensity, "BRRA noise intensity",
        [&] { cfg.brra.noise_intensity = d.brra.noise_intensity; });
  o.add(app, "--brra-variants", d.brra.num_variants, "BRRA perturbed query count",
        [&] { cfg.brra.num_variants = d.brra.num_variants; });
  o.add(app, "--smart-relevance", d.smart.relevance_weight, "SMART relevance weight",
        [&] { cfg.smart.relevance_weight = d.smart.relevance_weight; });
  o.add(app, "--smart-similarity", d.smart.similarity_weight, "SMART similarity weight",
        [&] { cfg.smart.similarity_weight = d.smart.similarity_weight; });
  o.add(app, "--smart-conflict", d.smart.conflict_weight, "SMART conflict weight",
        [&] { cfg.smart.conflict_weight = d.smart.conflict_weight; });
  o.add(app, "--format", f.formats, "Report formats: json,csv", [&] { cfg.formats = split_csv(f.formats); });
  CLI::Option* scans = app->add_flag("--record-scans", d.record_scans, "Store BiasDef KL scans in per-query rows");
  o.hook([scans, &cfg] {
    if (scans->count() > 0) cfg.record_scans = true;
  });
  app->add_flag("--timing", f.timing, "Print runtime to stderr and store it in the JSON report");
}

ExperimentConfig resolve_config(ExperimentFlags& f) {
  ExperimentConfig cfg = f.config_path.empty() ? ExperimentConfig{} : load_config(f.config_path);
  *f.target = cfg;
  try {
    f.overrides.apply();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, e.what());
  }
  cfg = *f.target;
  cfg.defense.k = cfg.k;
  if (!f.out.empty()) {
    cfg.output_path = f.out;
  } else if (const char* dir = std::getenv(kOutDirEnv); dir && *dir && cfg.output_path == ExperimentConfig{}.output_path) {
    cfg.output_path = (fs::path(dir) / "experiment").string();
  }
  cfg.validate();
  return cfg;
}

void print_aggregates(const EvalReport& r, std::ostream& out) {
  out << pad("method", 9) << pad("direction", 10) << pad("intensity", 10) << pad("n", 6) << pad("a_recall", 10)
      << pad("a_rec_inj", 10) << pad("recall", 10) << pad("ps_shift", 10) << pad("unatt_|ps|", 11) << "worst_ratio\n";
  for (const AggregateRow& a : r.aggregates) {
    out << pad(std::string(to_string(a.method)), 9) << pad(std::string(to_string(a.direction)), 10)
        << pad(std::to_string(a.intensity), 10) << pad(std::to_string(a.n), 6) << pad(fixed(a.a_recall_slots, 4), 10)
        << pad(fixed(a.a_recall_injected, 4), 10) << pad(fixed(a.recall, 4), 10) << pad(fixed(a.ps_shift, 4), 10)
        << pad(fixed(a.unattacked_abs_ps, 4), 11) << format_number(a.worst_ratio) << "\n";
  }
  if (r.recall_unavailable > 0) {
    out << "recall unavailable (no relevant passage) in " << r.recall_unavailable << " rows\n";
  }
}

void export_scene(const ExperimentConfig& cfg, std::size_t qi, const fs::path& out_dir) {
  char name[16];
  std::snprintf(name, sizeof name, "q%04zu", qi);
  const Query query = synth_query(name, cfg.dimension, derive_seed(cfg.seed, {tag("query"), qi}));
  const std::uint64_t scene_seed = derive_seed(cfg.seed, {tag("scene"), qi, 0});
  const Corpus benign = synth_benign_scene(query, cfg.scene, scene_seed);
  const PolarizationAxis hint{Embedding(cfg.dimension, 0.0), viewpoint_direction(query, scene_seed)};
  const auto candidates =
      synth_candidates(query, hint, cfg.attack.j_candidates, derive_seed(scene_seed, {tag("candidates")}));
  const PolarizationAxis axis = fit_attacker_axis(candidates);
  const Direction dir = cfg.directions.front();
  const int intensity = cfg.intensities.back();
  AttackConfig a = cfg.attack;
  a.direction = dir;
  a.injection_intensity = 0;
  a.rng_seed = derive_seed(scene_seed, {tag("adversarial"), static_cast<std::uint64_t>(dir)});
  const std::size_t seed_idx = select_seed_index(candidates, axis, dir);
  const auto adversarial = generate_adversarial(query, candidates[seed_idx], benign, axis, a);
  const InjectionResult inj =
      inject(benign, adversarial, intensity, polarization_score(axis, candidates[seed_idx]), axis);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + out_dir.string());
  save_corpus(inj.corpus, out_dir / "corpus.jsonl");
  save_queries(std::vector<Query>{query}, out_dir / "queries.jsonl");
  std::vector<QrelEntry> qrels;
  for (const Passage& p : inj.corpus.passages()) {
    if (p.relevant.value_or(false)) qrels.push_back({query.id, p.id});
  }
  save_qrels(qrels, out_dir / "qrels.jsonl");
}

int cmd_simulate(ExperimentFlags& f, const std::string& export_dir, std::size_t export_query, std::ostream& out,
                 std::ostream& err) {
  const ExperimentConfig cfg = resolve_config(f);
  if (!export_dir.empty()) {
    export_scene(cfg, export_query, export_dir);
    out << "exported scene " << export_query << " to " << export_dir << "\n";
    return 0;
  }
  const EvalReport report = run_experiment(cfg);
  const auto files = emit_report(report, cfg.output_path, cfg.formats, f.timing);
  print_aggregates(report, out);
  for (const auto& p : files) out << "wrote " << p.string() << "\n";
  if (f.timing) err << "runtime " << fixed(report.runtime_seconds, 3) << " s\n";
  return 0;
}

int cmd_sweep(ExperimentFlags& f, const std::string& param, const std::vector<double>& values, std::ostream& out,
              std::ostream& err) {
  const ExperimentConfig cfg = resolve_config(f);
  const auto reports = sweep_parameter(cfg, param, values);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const fs::path stem = cfg.output_path + "-" + param + "-" + std::to_string(i);
    out << "== " << param << " = " << format_number(values[i]) << "\n";
    print_aggregates(reports[i], out);
    for (const auto& p : emit_report(reports[i], stem, cfg.formats, f.timing)) out << "wrote " << p.string() << "\n";
    if (f.timing) err << param << "=" << format_number(values[i]) << " runtime " << fixed(reports[i].runtime_seconds, 3) << " s\n";
  }
  return 0;
}

struct DefendFlags {
  std::string corpus_path;
  std::string query_path;
  std::string query_id;
  std::string qrels_path;
  std::string method = "biasdef";
  std::string out;
  std::string conflict_path;
  std::uint64_t seed = 42;
  BiasDefParams defense;
  MmrParams mmr;
  BrraParams brra;
  SmartParams smart;
};

void add_defense_flags(CLI::App* app, BiasDefParams& d) {
  app->add_option("--k", d.k, "Context size k")->capture_default_str();
  app->add_option("--bins", d.bins, "Histogram bins m")->capture_default_str();
  app->add_option("--epsilon", d.epsilon, "Histogram smoothing")->capture_default_str();
  app->add_option("--delta", d.delta, "Local-maximum window on ss")->capture_default_str();
  app->add_option("--mahalanobis-t", d.mahalanobis_threshold, "Mahalanobis recovery threshold T")->capture_default_str();
  app->add_option("--ridge", d.ridge, "Relative covariance ridge")->capture_default_str();
}

const Query& pick_query(const std::vector<Query>& queries, const std::string& id, const std::string& path) {
  if (queries.empty()) fail(ErrorKind::kSchema, path + ": no queries");
  if (id.empty()) return queries.front();
  for (const Query& q : queries) {
    if (q.id == id) return q;
  }
  fail(ErrorKind::kReference, path + ": no query with id " + id);
}

Corpus load_inputs(const std::string& corpus_path, const std::string& qrels_path, const Query& query) {
  Corpus corpus = load_corpus(corpus_path);
  if (corpus.empty()) fail(ErrorKind::kSchema, corpus_path + ": empty corpus");
  if (*corpus.dimension() != query.embedding.size()) {
    fail(ErrorKind::kSchema, "query " + query.id + " has dimension " + std::to_string(query.embedding.size()) +
                                 ", corpus has " + std::to_string(*corpus.dimension()));
  }
  if (!qrels_path.empty()) corpus = load_qrels(qrels_path, std::move(corpus), std::string_view(query.id));
  return corpus;
}

void print_list(const RankedList& list, std::ostream& out) {
  for (std::size_t i = 0; i < list.items.size(); ++i) {
    const ScoredPassage& s = list.items[i];
    out << "  " << pad(std::to_string(i + 1), 3) << pad(s.passage_id, 28) << "ss=" << fixed(s.ss);
    if (s.ps) out << "  ps=" << fixed(*s.ps);
    out << "\n";
  }
}

ojson ranked_json(const RankedList& list) {
  ojson arr = ojson::array();
  for (const ScoredPassage& s : list.items) {
    ojson o;
    o["id"] = s.passage_id;
    o["ss"] = s.ss;
    if (s.ps) o["ps"] = *s.ps;
    arr.push_back(std::move(o));
  }
  return arr;
}

void write_json(const fs::path& path, const ojson& j) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  f << j.dump(2) << "\n";
  if (!f) fail(ErrorKind::kIo, "cannot write " + path.string());
}

void print_metrics(const RankedList& topk, const Corpus& corpus, std::size_t k, std::ostream& out) {
  if (!corpus.has_unknown_provenance()) {
    std::size_t injected = 0;
    for (const Passage& p : corpus.passages()) injected += p.provenance == Provenance::kAdversarial;
    const ARecall a = a_recall_at_k(topk, corpus, k, injected);
    out << "a_recall " << fixed(a.slots, 4) << " (" << a.adversarial_count << " adversarial in top-" << k << ")\n";
  } else {
    out << "a_recall skipped: corpus has unknown provenance\n";
  }
  try {
    out << "recall " << fixed(recall_at_k(topk, corpus, k), 4) << "\n";
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kMetricUnavailable) throw;
    out << "recall skipped: " << e.what() << "\n";
  }
}

int cmd_defend(DefendFlags& f, std::ostream& out) {
  f.defense.validate();
  const std::vector<Query> queries = load_queries(f.query_path);
  const Query& query = pick_query(queries, f.query_id, f.query_path);
  const Corpus corpus = load_inputs(f.corpus_path, f.qrels_path, query);
  const std::size_t k = f.defense.k;
  const RankedList pool = candidate_pool(corpus, query, k);
  const Method method = parse_method(f.method);
  out << "query " << query.id << "  corpus " << corpus.size() << "  pool " << pool.items.size() << "  k " << k
      << "  method " << to_string(method) << "\n";

  ojson j;
  j["query_id"] = query.id;
  j["method"] = std::string(to_string(method));
  j["k"] = k;
  RankedList topk;
  if (method == Method::kBiasDef) {
    const DefenseOutcome o = biasdef_filter(pool, corpus, f.defense);
    topk = o.final_topk;
    if (o.no_boundary) {
      out << "no-boundary: " << o.note << " (plain top-k returned)\n";
      out << "t_star n/a\n";
    } else {
      out << "t_star " << fixed(o.scan.t_star) << "\n";
    }
    out << "top-" << k << ":\n";
    print_list(o.final_topk, out);
    const std::set<std::string> recovered(o.recovered_ids.begin(), o.recovered_ids.end());
    out << "removed " << o.removed_ids.size() << ":\n";
    for (const std::string& id : o.removed_ids) {
      out << "  " << pad(id, 28) << (recovered.contains(id) ? "recovered" : "suspect") << "\n";
    }
    out << "kept false positives " << o.alpha_ids.size() << ":\n";
    for (const std::string& id : o.alpha_ids) out << "  " << pad(id, 28) << "alpha\n";
    if (o.final_topk.items.size() < k) {
      out << "pool exhausted: " << o.final_topk.items.size() << " survivors\n";
    }
    j["no_boundary"] = o.no_boundary;
    if (o.no_boundary) j["note"] = o.note;
    j["t_star"] = o.scan.t_star;
    j["final_topk"] = ranked_json(o.final_topk);
    j["removed_ids"] = o.removed_ids;
    j["alpha_ids"] = o.alpha_ids;
    j["recovered_ids"] = o.recovered_ids;
    j["suspect_set"] = o.scan.suspect_set;
    j["scan"] = {{"thresholds", o.scan.thresholds}, {"kl_values", o.scan.kl_values}};
  } else {
    switch (method) {
      case Method::kNoDef: topk = no_defense(pool, k); break;
      case Method::kMmr: topk = mmr_select(pool, corpus, k, f.mmr).list; break;
      case Method::kBrra: {
        BrraParams p = f.brra;
        p.rng_seed = f.seed;
        topk = brra_select(corpus, query, k, p);
        break;
      }
      case Method::kSmart: {
        SmartParams p = f.smart;
        if (!f.conflict_path.empty()) p.conflict_matrix = load_conflict_matrix(f.conflict_path);
        topk = smart_select(pool, corpus, k, p).list;
        break;
      }
      case Method::kBiasDef: break;
    }
    out << "top-" << k << ":\n";
    print_list(topk, out);
    j["final_topk"] = ranked_json(topk);
  }
  print_metrics(topk, corpus, k, out);
  if (!f.out.empty()) {
    write_json(f.out, j);
    out << "wrote " << f.out << "\n";
  }
  return 0;
}

struct TheoremFlags {
  int trials = 100;
  std::uint64_t seed = 42;
  TheoremGeometry geometry;
  BiasDefParams defense;
};

int cmd_theorem_check(const TheoremFlags& f, std::ostream& out) {
  const TheoremResult r = verify_theorem1(f.trials, f.geometry, f.seed, f.defense);
  out << r.successes << "/" << r.trials << " exact separations (rate " << fixed(r.rate(), 4) << ")";
  if (r.property2_violated) out << " [control: Property 2 violated for one passage per trial]";
  if (!r.failed_trials.empty()) {
    out << " failed trials:";
    for (std::size_t i = 0; i < r.failed_trials.size(); ++i) out << (i ? "," : " ") << r.failed_trials[i];
  }
  out << "\n";
  if (r.property2_violated) return 0;
  return r.successes == r.trials ? 0 : 1;
}

struct InspectFlags {
  std::string corpus_path;
  std::string query_path;
  std::string query_id;
  std::string qrels_path;
  BiasDefParams defense;
};

int cmd_inspect(const InspectFlags& f, std::ostream& out) {
  if (f.query_path.empty()) {
    const Corpus corpus = load_corpus(f.corpus_path);
    std::size_t counts[3] = {0, 0, 0};
    std::size_t relevant = 0;
    std::size_t labeled = 0;
    for (const Passage& p : corpus.passages()) {
      ++counts[static_cast<int>(p.provenance)];
      labeled += p.relevant.has_value();
      relevant += p.relevant.value_or(false);
    }
    out << "passages " << corpus.size() << "\n";
    out << "dimension " << (corpus.dimension() ? std::to_string(*corpus.dimension()) : std::string("undetermined"))
        << "\n";
    out << "benign " << counts[0] << "  adversarial " << counts[1] << "  unknown " << counts[2] << "\n";
    out << "relevance labeled " << labeled << "  relevant " << relevant << "\n";
    return 0;
  }
  f.defense.validate();
  const std::vector<Query> queries = load_queries(f.query_path);
  const Query& query = pick_query(queries, f.query_id, f.query_path);
  const Corpus corpus = load_inputs(f.corpus_path, f.qrels_path, query);
  const RankedList pool = candidate_pool(corpus, query, f.defense.k);
  std::vector<Embedding> emb;
  for (const ScoredPassage& s : pool.items) emb.push_back(corpus.at(s.passage_id).embedding);
  out << "query " << query.id << "  pool " << pool.items.size() << "\n";
  if (pool.items.size() < 3) {
    print_list(pool, out);
    return 0;
  }
  const PolarizationAxis axis = principal_axis(emb);
  RankedList annotated = pool;
  for (std::size_t i = 0; i < emb.size(); ++i) annotated.items[i].ps = polarization_score(axis, emb[i]);
  out << "pool (defender axis):\n";
  for (std::size_t i = 0; i < annotated.items.size(); ++i) {
    const ScoredPassage& s = annotated.items[i];
    out << "  " << pad(std::to_string(i + 1), 3) << pad(s.passage_id, 28) << "ss=" << fixed(s.ss)
        << "  ps=" << fixed(*s.ps) << "  " << to_string(corpus.at(s.passage_id).provenance) << "\n";
  }
  try {
    const KLScanResult scan = scan_max_kl(annotated.items, f.defense);
    out << "kl curve:\n";
    for (std::size_t i = 0; i < scan.thresholds.size(); ++i) {
      out << "  t=" << fixed(scan.thresholds[i]) << "  kl=" << fixed(scan.kl_values[i])
          << (i == scan.t_star_index ? "  <- t_star" : "") << "\n";
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNoBoundary) throw;
    out << "no-boundary: " << e.what() << "\n";
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bias-injection attack simulator and BiasDef retrieval sanitizer"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  ExperimentConfig sim_cfg;
  ExperimentFlags sim_flags;
  std::string export_dir;
  CLI::App* sim = app.add_subcommand("simulate", "Run the attack/defense experiment and write reports");
  add_experiment_flags(sim, sim_flags, sim_cfg);
  std::size_t export_query = 0;
  sim->add_option("--export-scene", export_dir,
                  "Write one attacked scene (first direction, last intensity) as JSONL to this directory instead of running");
  sim->add_option("--export-query", export_query, "Query index for --export-scene")->capture_default_str();

  ExperimentConfig sweep_cfg;
  ExperimentFlags sweep_flags;
  std::string sweep_param;
  std::vector<double> sweep_values;
  CLI::App* sweep = app.add_subcommand("sweep", "Run one experiment per value of a parameter");
  add_experiment_flags(sweep, sweep_flags, sweep_cfg);
  std::string names;
  for (const auto& n : sweepable_parameters()) names += (names.empty() ? "" : ", ") + n;
  sweep->add_option("--param", sweep_param, "Parameter to sweep: " + names)->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required()->delimiter(',');

  DefendFlags def;
  CLI::App* defend = app.add_subcommand("defend", "Sanitize the candidate pool of one query from JSONL files");
  defend->add_option("--corpus", def.corpus_path, "Corpus JSONL")->required();
  defend->add_option("--query", def.query_path, "Query JSONL")->required();
  defend->add_option("--query-id", def.query_id, "Query id (default: first query in the file)");
  defend->add_option("--qrels", def.qrels_path, "Qrels JSONL for Recall@k");
  defend->add_option("--method", def.method, "Method: nodef, mmr, brra, smart, biasdef")->capture_default_str();
  defend->add_option("--out", def.out, "Write the outcome as JSON to this file");
  defend->add_option("--seed", def.seed, "Seed for BRRA perturbations")->capture_default_str();
  add_defense_flags(defend, def.defense);
  defend->add_option("--mmr-lambda", def.mmr.lambda, "MMR relevance weight")->capture_default_str();
  defend->add_option("--brra-noise", def.brra.noise_intensity, "BRRA noise intensity")->capture_default_str();
  defend->add_option("--brra-variants", def.brra.num_variants, "BRRA perturbed query count")->capture_default_str();
  defend->add_option("--smart-relevance", def.smart.relevance_weight, "SMART relevance weight")->capture_default_str();
  defend->add_option("--smart-similarity", def.smart.similarity_weight, "SMART similarity weight")->capture_default_str();
  defend->add_option("--smart-conflict", def.smart.conflict_weight, "SMART conflict weight")->capture_default_str();
  defend->add_option("--conflict", def.conflict_path, "SMART conflict matrix (JSON square array, pool order)");

  TheoremFlags th;
  CLI::App* theorem = app.add_subcommand("theorem-check", "Verify exact separation on premise-satisfying pools");
  theorem->add_option("--trials", th.trials, "Number of random pools")->capture_default_str();
  theorem->add_option("--seed", th.seed, "Seed")->capture_default_str();
  theorem->add_flag("--violate-property2", th.geometry.violate_property2,
                    "Control mode: move one adversarial PS inside the benign range (exit 0 regardless)");
  theorem->add_option("--max-adversarial", th.geometry.n_adversarial_max, "Adversarial passages per pool, drawn in [1, max]")
      ->capture_default_str();
  theorem->add_option("--benign", th.geometry.n_benign, "Benign passages per pool")->capture_default_str();
  theorem->add_option("--adv-ps-gap", th.geometry.adv_ps_gap, "PS gap between the benign extreme and the adversarial cluster")
      ->capture_default_str();
  theorem->add_option("--adv-ps-spread", th.geometry.adv_ps_spread, "PS spread of the adversarial cluster")
      ->capture_default_str();
  theorem->add_option("--bins", th.defense.bins, "Histogram bins m")->capture_default_str();
  theorem->add_option("--epsilon", th.defense.epsilon, "Histogram smoothing")->capture_default_str();
  theorem->add_option("--delta", th.defense.delta, "Local-maximum window on ss")->capture_default_str();

  InspectFlags ins;
  CLI::App* inspect = app.add_subcommand("inspect", "Summarize a corpus, or show the KL scan for one query");
  inspect->add_option("--corpus", ins.corpus_path, "Corpus JSONL")->required();
  inspect->add_option("--query", ins.query_path, "Query JSONL (enables the pool and KL curve view)");
  inspect->add_option("--query-id", ins.query_id, "Query id (default: first query in the file)");
  inspect->add_option("--qrels", ins.qrels_path, "Qrels JSONL");
  add_defense_flags(inspect, ins.defense);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) return cmd_simulate(sim_flags, export_dir, export_query, out, err);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_param, sweep_values, out, err);
    if (*defend) return cmd_defend(def, out);
    if (*theorem) return cmd_theorem_check(th, out);
    if (*inspect) return cmd_inspect(ins, out);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace biasdef::cli
