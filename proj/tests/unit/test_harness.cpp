#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "biasdef/error.hpp"
#include "biasdef/harness.hpp"
#include "helpers.hpp"

namespace biasdef {
namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.dimension = 32;
  c.num_queries = 6;
  c.seed = 7;
  c.threads = 2;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = small_config();
  c.methods = {Method::kBiasDef, Method::kMmr};
  c.directions = {Direction::kNegative};
  c.intensities = {2, 3};
  c.defense.bins = 12;
  c.attack.adherence_ps = 0.5;
  c.record_scans = true;
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
}

TEST(Config, DefaultFileMatchesBuiltInDefaults) {
  EXPECT_EQ(load_config(BIASDEF_CONFIG_DIR "/default.json"), ExperimentConfig{});
  const ExperimentConfig degraded = load_config(BIASDEF_CONFIG_DIR "/degraded.json");
  EXPECT_DOUBLE_EQ(degraded.attack.adherence_ss, 0.75);
  EXPECT_DOUBLE_EQ(degraded.attack.adherence_ps, 0.75);
}

TEST(Config, PartialFileKeepsDefaults) {
  const ExperimentConfig c = config_from_json(R"({"k": 3, "defense": {"bins": 10}})");
  EXPECT_EQ(c.k, 3u);
  EXPECT_EQ(c.defense.bins, 10u);
  EXPECT_EQ(c.num_queries, 200u);
}

TEST(Config, UnknownKeyOrBadValueIsConfigError) {
  for (const char* text : {R"({"kk": 3})", R"({"defense": {"binz": 3}})", R"({"k": "five"})", R"({"k": 0})",
                           R"({"methods": ["nodef", "magic"]})", R"({"intensities": [11]})", "{not json"}) {
    try {
      config_from_json(text);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(exit_code(e.kind()), 2) << text;
    }
  }
}

TEST(Config, MissingFileIsConfigError) {
  try {
    load_config("/nonexistent/biasdef.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/biasdef.json"), std::string::npos);
  }
}

TEST(Methods, ParseList) {
  EXPECT_EQ(parse_method_list("biasdef, nodef,biasdef"), (std::vector<Method>{Method::kBiasDef, Method::kNoDef}));
  EXPECT_THROW(parse_method_list(""), Error);
  EXPECT_THROW(parse_method("xyz"), Error);
}

TEST(Experiment, RowCountsAndOrdering) {
  const ExperimentConfig c = small_config();
  const EvalReport r = run_experiment(c);
  EXPECT_EQ(r.rows.size(), 6u * 5u * 2u * 3u);
  EXPECT_EQ(r.unattacked.size(), 6u * 5u);
  ASSERT_EQ(r.aggregates.size(), 5u * 2u * 3u);
  EXPECT_EQ(r.aggregates[0].method, Method::kNoDef);
  EXPECT_EQ(r.aggregates[0].direction, Direction::kPositive);
  EXPECT_EQ(r.aggregates[0].intensity, 1);
  EXPECT_EQ(r.aggregates[1].intensity, 5);
  EXPECT_EQ(r.aggregates.back().method, Method::kBiasDef);
  for (const AggregateRow& a : r.aggregates) EXPECT_EQ(a.n, 6u);
}

TEST(Experiment, ByteIdenticalAcrossRunsAndThreadCounts) {
  ExperimentConfig c = small_config();
  const std::string a = report_to_json(run_experiment(c));
  c.threads = 1;
  EvalReport rb = run_experiment(c);
  c.threads = 5;
  EvalReport rd = run_experiment(c);
  // threads is echoed in the config block
  rb.config.threads = rd.config.threads = small_config().threads;
  const std::string b = report_to_json(rb);
  const std::string d = report_to_json(rd);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, d);
  c.seed = 8;
  EXPECT_NE(a, report_to_json(run_experiment(c)));
}

TEST(Experiment, AggregatesRecomputeFromRows) {
  const EvalReport r = run_experiment(small_config());
  EXPECT_EQ(aggregate(r.config, r.rows, r.unattacked), r.aggregates);
  const AggregateRow* a = r.find(Method::kNoDef, Direction::kNegative, 5);
  ASSERT_NE(a, nullptr);
  double sum = 0.0;
  int n = 0;
  for (const QueryRow& row : r.rows) {
    if (row.method == Method::kNoDef && row.direction == Direction::kNegative && row.intensity == 5) {
      sum += row.ps_shift;
      ++n;
    }
  }
  EXPECT_NEAR(a->ps_shift, sum / n, 1e-12);
}

TEST(Experiment, WorstRatioIsMaxOverIntensities) {
  const EvalReport r = run_experiment(small_config());
  for (Method m : all_methods()) {
    for (Direction d : {Direction::kPositive, Direction::kNegative}) {
      double want = 0.0;
      for (int i : {1, 5, 10}) {
        const AggregateRow* a = r.find(m, d, i);
        want = std::max(want, a->a_recall_slots / std::max(a->recall, 1e-9));
      }
      for (int i : {1, 5, 10}) EXPECT_DOUBLE_EQ(r.find(m, d, i)->worst_ratio, want);
    }
  }
}

TEST(Report, JsonRoundTrip) {
  ExperimentConfig c = small_config();
  c.record_scans = true;
  const EvalReport r = run_experiment(c);
  EvalReport back = report_from_json(report_to_json(r));
  back.runtime_seconds = r.runtime_seconds;
  EXPECT_EQ(back, r);
}

TEST(Report, RuntimeOnlyWhenAsked) {
  const EvalReport r = run_experiment(small_config());
  EXPECT_EQ(report_to_json(r).find("runtime"), std::string::npos);
  EXPECT_NE(report_to_json(r, true).find("runtime_seconds"), std::string::npos);
}

TEST(Report, CsvHeadersAndRowCounts) {
  const EvalReport r = run_experiment(small_config());
  const std::string agg = aggregates_to_csv(r);
  const std::string header = agg.substr(0, agg.find('\n'));
  std::string want;
  for (const auto& col : aggregate_csv_columns()) want += (want.empty() ? "" : ",") + col;
  EXPECT_EQ(header, want);
  EXPECT_EQ(std::count(agg.begin(), agg.end(), '\n'), static_cast<long>(r.aggregates.size() + 1));
  const std::string rows = rows_to_csv(r);
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), static_cast<long>(r.rows.size() + 1));
  EXPECT_EQ(rows.substr(0, rows.find(',')), "query_id");
}

TEST(Report, EmitWritesRequestedFiles) {
  testing::TempDir dir;
  const EvalReport r = run_experiment(small_config());
  const std::vector<std::string> formats{"json", "csv"};
  const auto files = emit_report(r, dir.path() / "sub" / "exp", formats);
  ASSERT_EQ(files.size(), 3u);
  for (const auto& f : files) EXPECT_TRUE(std::filesystem::exists(f));
  EXPECT_EQ(slurp(dir.path() / "sub" / "exp.json"), report_to_json(r));
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(2.0), "2");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Sweep, OneReportPerValue) {
  ExperimentConfig c = small_config();
  c.num_queries = 2;
  c.methods = {Method::kBiasDef};
  const std::vector<double> values{10, 30};
  const auto reports = sweep_parameter(c, "m", values);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(reports[0].config.defense.bins, 10u);
  EXPECT_EQ(reports[1].config.defense.bins, 30u);
  EXPECT_TRUE(reports[0].rows[0].scan.has_value());
}

TEST(Sweep, Errors) {
  const ExperimentConfig c = small_config();
  const std::vector<double> none;
  const std::vector<double> one{1.0};
  const std::vector<double> bad{-1.0};
  EXPECT_THROW(sweep_parameter(c, "k", none), Error);
  EXPECT_THROW(sweep_parameter(c, "nope", one), Error);
  EXPECT_THROW(sweep_parameter(c, "mmr.lambda", std::vector<double>{2.0}), Error);
  EXPECT_THROW(sweep_parameter(c, "k", bad), Error);
}

TEST(WithParameter, Aliases) {
  const ExperimentConfig c = with_parameter(ExperimentConfig{}, "T", 2.5);
  EXPECT_DOUBLE_EQ(c.defense.mahalanobis_threshold, 2.5);
  const ExperimentConfig a = with_parameter(ExperimentConfig{}, "attack.adherence", 0.5);
  EXPECT_DOUBLE_EQ(a.attack.adherence_ss, 0.5);
  EXPECT_DOUBLE_EQ(a.attack.adherence_ps, 0.5);
}

TEST(Theorem, PremisePoolsSeparateExactly) {
  const TheoremResult r = verify_theorem1(100, {}, 42);
  EXPECT_EQ(r.successes, 100);
  EXPECT_TRUE(r.failed_trials.empty());
  EXPECT_DOUBLE_EQ(r.rate(), 1.0);
}

TEST(Theorem, PoolGeometryMeetsPremises) {
  const TheoremGeometry g;
  for (int t = 0; t < 30; ++t) {
    const TheoremPool p = theorem_pool(g, 3, t);
    EXPECT_GE(p.adversarial_ids.size(), 1u);
    EXPECT_LE(p.adversarial_ids.size(), 10u);
    EXPECT_EQ(p.pool.size(), p.adversarial_ids.size() + 30);
    double min_adv_ss = 2.0;
    double max_ben_ss = -2.0;
    for (const auto& s : p.pool) {
      if (std::binary_search(p.adversarial_ids.begin(), p.adversarial_ids.end(), s.passage_id)) {
        min_adv_ss = std::min(min_adv_ss, s.ss);
      } else {
        max_ben_ss = std::max(max_ben_ss, s.ss);
      }
    }
    EXPECT_GT(min_adv_ss, max_ben_ss);
  }
}

TEST(Theorem, ViolatingPropertyTwoBreaksSomeSeparations) {
  TheoremGeometry g;
  g.violate_property2 = true;
  const TheoremResult r = verify_theorem1(100, g, 42);
  EXPECT_TRUE(r.property2_violated);
  EXPECT_LT(r.successes, 100);
}

}  // namespace
}  // namespace biasdef
