#include <fstream>
#include <set>
#include <sstream>

#include "biasdef/error.hpp"
#include "biasdef/harness.hpp"
#include "json.hpp"

namespace biasdef {

namespace {

using ojson = nlohmann::ordered_json;

void check_keys(const ojson& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(ErrorKind::kConfig, where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.contains(key)) fail(ErrorKind::kConfig, "unknown key \"" + key + "\" in " + where);
  }
}

template <typename T>
void read(const ojson& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw std::invalid_argument("expected boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw std::invalid_argument("expected integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_integer() && !it->is_number_unsigned() && it->template get<long long>() < 0) {
          throw std::invalid_argument("expected non-negative integer");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw std::invalid_argument("expected number");
    }
    out = it->template get<T>();
  } catch (const std::exception& e) {
    fail(ErrorKind::kConfig, where + "." + key + ": " + e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dimension < 3) fail(ErrorKind::kConfig, "dimension must be >= 3");
  if (num_queries < 1) fail(ErrorKind::kConfig, "num_queries must be >= 1");
  if (repetitions < 1) fail(ErrorKind::kConfig, "repetitions must be >= 1");
  if (k < 1) fail(ErrorKind::kConfig, "k must be >= 1");
  if (methods.empty()) fail(ErrorKind::kConfig, "methods must be nonempty");
  if (directions.empty()) fail(ErrorKind::kConfig, "directions must be nonempty");
  if (intensities.empty()) fail(ErrorKind::kConfig, "intensities must be nonempty");
  for (int i : intensities) {
    if (i < 0 || i > attack.n_adversarial) {
      fail(ErrorKind::kConfig, "intensity " + std::to_string(i) + " outside [0, attack.n_adversarial]");
    }
  }
  for (const std::string& f : formats) {
    if (f != "json" && f != "csv") fail(ErrorKind::kConfig, "unknown output format \"" + f + "\"");
  }
  try {
    scene.validate();
    AttackConfig a = attack;
    a.injection_intensity = 0;
    a.validate();
    BiasDefParams d = defense;
    d.k = k;
    d.validate();
    mmr.validate();
    brra.validate();
    smart.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, e.what());
  }
}

ExperimentConfig config_from_json(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kConfig, std::string("malformed config: ") + e.what());
  }
  ExperimentConfig c;
  check_keys(j, "config",
             {"dimension", "num_queries", "repetitions", "k", "seed", "threads", "methods", "directions",
              "intensities", "record_scans", "scene", "attack", "defense", "mmr", "brra", "smart", "output"});
  read(j, "dimension", c.dimension, "config");
  read(j, "num_queries", c.num_queries, "config");
  read(j, "repetitions", c.repetitions, "config");
  read(j, "k", c.k, "config");
  read(j, "seed", c.seed, "config");
  read(j, "threads", c.threads, "config");
  read(j, "record_scans", c.record_scans, "config");
  try {
    if (auto it = j.find("methods"); it != j.end()) {
      c.methods.clear();
      for (const auto& m : *it) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (auto it = j.find("directions"); it != j.end()) {
      c.directions.clear();
      for (const auto& d : *it) c.directions.push_back(parse_direction(d.get<std::string>()));
    }
    if (auto it = j.find("intensities"); it != j.end()) c.intensities = it->get<std::vector<int>>();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, e.what());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("config lists: ") + e.what());
  }

  if (auto it = j.find("scene"); it != j.end()) {
    const ojson& s = *it;
    check_keys(s, "scene", {"benign_per_query", "ss_band", "ps_spread", "relevant_fraction"});
    read(s, "benign_per_query", c.scene.n_benign, "scene");
    read(s, "ps_spread", c.scene.ps_spread, "scene");
    read(s, "relevant_fraction", c.scene.relevant_fraction, "scene");
    if (auto b = s.find("ss_band"); b != s.end()) {
      if (!b->is_array() || b->size() != 2 || !(*b)[0].is_number() || !(*b)[1].is_number()) {
        fail(ErrorKind::kConfig, "scene.ss_band must be [lo, hi]");
      }
      c.scene.ss_lo = (*b)[0].get<double>();
      c.scene.ss_hi = (*b)[1].get<double>();
    }
  }
  if (auto it = j.find("attack"); it != j.end()) {
    const ojson& a = *it;
    check_keys(a, "attack",
               {"j_candidates", "n_adversarial", "adherence_ss", "adherence_ps", "ss_margin", "ps_margin", "jitter"});
    read(a, "j_candidates", c.attack.j_candidates, "attack");
    read(a, "n_adversarial", c.attack.n_adversarial, "attack");
    read(a, "adherence_ss", c.attack.adherence_ss, "attack");
    read(a, "adherence_ps", c.attack.adherence_ps, "attack");
    read(a, "ss_margin", c.attack.ss_margin, "attack");
    read(a, "ps_margin", c.attack.ps_margin, "attack");
    read(a, "jitter", c.attack.jitter, "attack");
  }
  if (auto it = j.find("defense"); it != j.end()) {
    const ojson& d = *it;
    check_keys(d, "defense", {"bins", "epsilon", "delta", "mahalanobis_threshold", "ridge"});
    read(d, "bins", c.defense.bins, "defense");
    read(d, "epsilon", c.defense.epsilon, "defense");
    read(d, "delta", c.defense.delta, "defense");
    read(d, "mahalanobis_threshold", c.defense.mahalanobis_threshold, "defense");
    read(d, "ridge", c.defense.ridge, "defense");
  }
  if (auto it = j.find("mmr"); it != j.end()) {
    check_keys(*it, "mmr", {"lambda"});
    read(*it, "lambda", c.mmr.lambda, "mmr");
  }
  if (auto it = j.find("brra"); it != j.end()) {
    check_keys(*it, "brra", {"noise_intensity", "num_variants"});
    read(*it, "noise_intensity", c.brra.noise_intensity, "brra");
    read(*it, "num_variants", c.brra.num_variants, "brra");
  }
  if (auto it = j.find("smart"); it != j.end()) {
    check_keys(*it, "smart", {"relevance_weight", "similarity_weight", "conflict_weight"});
    read(*it, "relevance_weight", c.smart.relevance_weight, "smart");
    read(*it, "similarity_weight", c.smart.similarity_weight, "smart");
    read(*it, "conflict_weight", c.smart.conflict_weight, "smart");
  }
  if (auto it = j.find("output"); it != j.end()) {
    check_keys(*it, "output", {"path", "formats"});
    read(*it, "path", c.output_path, "output");
    if (auto f = it->find("formats"); f != it->end()) {
      try {
        c.formats = f->get<std::vector<std::string>>();
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::kConfig, std::string("output.formats: ") + e.what());
      }
    }
  }
  c.defense.k = c.k;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kConfig, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
  ojson j;
  j["dimension"] = c.dimension;
  j["num_queries"] = c.num_queries;
  j["repetitions"] = c.repetitions;
  j["k"] = c.k;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["methods"] = ojson::array();
  for (Method m : c.methods) j["methods"].push_back(std::string(to_string(m)));
  j["directions"] = ojson::array();
  for (Direction d : c.directions) j["directions"].push_back(std::string(to_string(d)));
  j["intensities"] = c.intensities;
  j["record_scans"] = c.record_scans;
  j["scene"] = {{"benign_per_query", c.scene.n_benign},
                {"ss_band", {c.scene.ss_lo, c.scene.ss_hi}},
                {"ps_spread", c.scene.ps_spread},
                {"relevant_fraction", c.scene.relevant_fraction}};
  j["attack"] = {{"j_candidates", c.attack.j_candidates},     {"n_adversarial", c.attack.n_adversarial},
                 {"adherence_ss", c.attack.adherence_ss},     {"adherence_ps", c.attack.adherence_ps},
                 {"ss_margin", c.attack.ss_margin},           {"ps_margin", c.attack.ps_margin},
                 {"jitter", c.attack.jitter}};
  j["defense"] = {{"bins", c.defense.bins},
                  {"epsilon", c.defense.epsilon},
                  {"delta", c.defense.delta},
                  {"mahalanobis_threshold", c.defense.mahalanobis_threshold},
                  {"ridge", c.defense.ridge}};
  j["mmr"] = {{"lambda", c.mmr.lambda}};
  j["brra"] = {{"noise_intensity", c.brra.noise_intensity}, {"num_variants", c.brra.num_variants}};
  j["smart"] = {{"relevance_weight", c.smart.relevance_weight},
                {"similarity_weight", c.smart.similarity_weight},
                {"conflict_weight", c.smart.conflict_weight}};
  j["output"] = {{"path", c.output_path}, {"formats", c.formats}};
  return j.dump(2);
}

}  // namespace biasdef
