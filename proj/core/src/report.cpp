#include <charconv>
#include <fstream>

#include "biasdef/error.hpp"
#include "biasdef/harness.hpp"
#include "json.hpp"

namespace biasdef {

namespace {

using ojson = nlohmann::ordered_json;

ojson row_json(const QueryRow& r) {
  ojson j;
  j["query_id"] = r.query_id;
  j["repetition"] = r.repetition;
  j["method"] = std::string(to_string(r.method));
  j["direction"] = std::string(to_string(r.direction));
  j["intensity"] = r.intensity;
  j["adversarial_in_topk"] = r.adversarial_in_topk;
  j["adherent_in_topk"] = r.adherent_in_topk;
  j["a_recall_slots"] = r.a_recall_slots;
  j["a_recall_injected"] = r.a_recall_injected;
  if (r.recall) j["recall"] = *r.recall;
  j["context_ps"] = r.context_ps;
  j["unattacked_context_ps"] = r.unattacked_context_ps;
  j["ps_shift"] = r.ps_shift;
  if (r.scan) {
    j["scan"] = {{"t_star", r.scan->t_star},       {"thresholds", r.scan->thresholds},
                 {"kl_values", r.scan->kl_values}, {"removed", r.scan->removed},
                 {"alpha", r.scan->alpha},         {"recovered", r.scan->recovered},
                 {"no_boundary", r.scan->no_boundary}};
  }
  return j;
}

QueryRow row_from(const ojson& j) {
  QueryRow r;
  r.query_id = j.at("query_id").get<std::string>();
  r.repetition = j.at("repetition").get<int>();
  r.method = parse_method(j.at("method").get<std::string>());
  r.direction = parse_direction(j.at("direction").get<std::string>());
  r.intensity = j.at("intensity").get<int>();
  r.adversarial_in_topk = j.at("adversarial_in_topk").get<std::size_t>();
  r.adherent_in_topk = j.at("adherent_in_topk").get<std::size_t>();
  r.a_recall_slots = j.at("a_recall_slots").get<double>();
  r.a_recall_injected = j.at("a_recall_injected").get<double>();
  if (j.contains("recall")) r.recall = j.at("recall").get<double>();
  r.context_ps = j.at("context_ps").get<double>();
  r.unattacked_context_ps = j.at("unattacked_context_ps").get<double>();
  r.ps_shift = j.at("ps_shift").get<double>();
  if (j.contains("scan")) {
    const ojson& s = j.at("scan");
    r.scan = ScanRecord{s.at("t_star").get<double>(),
                        s.at("thresholds").get<std::vector<double>>(),
                        s.at("kl_values").get<std::vector<double>>(),
                        s.at("removed").get<std::size_t>(),
                        s.at("alpha").get<std::size_t>(),
                        s.at("recovered").get<std::size_t>(),
                        s.at("no_boundary").get<bool>()};
  }
  return r;
}

ojson aggregate_json(const AggregateRow& a) {
  ojson j;
  j["method"] = std::string(to_string(a.method));
  j["direction"] = std::string(to_string(a.direction));
  j["intensity"] = a.intensity;
  j["n"] = a.n;
  j["a_recall_slots"] = a.a_recall_slots;
  j["a_recall_slots_std"] = a.a_recall_slots_std;
  j["a_recall_injected"] = a.a_recall_injected;
  j["recall"] = a.recall;
  j["recall_n"] = a.recall_n;
  j["recall_std"] = a.recall_std;
  j["ps_shift"] = a.ps_shift;
  j["ps_shift_std"] = a.ps_shift_std;
  j["adversarial_in_topk"] = a.adversarial_in_topk;
  j["adherent_in_topk"] = a.adherent_in_topk;
  j["unattacked_abs_ps"] = a.unattacked_abs_ps;
  j["unattacked_n"] = a.unattacked_n;
  j["unattacked_recall"] = a.unattacked_recall;
  j["unattacked_recall_n"] = a.unattacked_recall_n;
  j["unattacked_recall_std"] = a.unattacked_recall_std;
  j["worst_ratio"] = a.worst_ratio;
  return j;
}

AggregateRow aggregate_from(const ojson& j) {
  AggregateRow a;
  a.method = parse_method(j.at("method").get<std::string>());
  a.direction = parse_direction(j.at("direction").get<std::string>());
  a.intensity = j.at("intensity").get<int>();
  a.n = j.at("n").get<std::size_t>();
  a.a_recall_slots = j.at("a_recall_slots").get<double>();
  a.a_recall_slots_std = j.at("a_recall_slots_std").get<double>();
  a.a_recall_injected = j.at("a_recall_injected").get<double>();
  a.recall = j.at("recall").get<double>();
  a.recall_n = j.at("recall_n").get<std::size_t>();
  a.recall_std = j.at("recall_std").get<double>();
  a.ps_shift = j.at("ps_shift").get<double>();
  a.ps_shift_std = j.at("ps_shift_std").get<double>();
  a.adversarial_in_topk = j.at("adversarial_in_topk").get<std::size_t>();
  a.adherent_in_topk = j.at("adherent_in_topk").get<std::size_t>();
  a.unattacked_abs_ps = j.at("unattacked_abs_ps").get<double>();
  a.unattacked_n = j.at("unattacked_n").get<std::size_t>();
  a.unattacked_recall = j.at("unattacked_recall").get<double>();
  a.unattacked_recall_n = j.at("unattacked_recall_n").get<std::size_t>();
  a.unattacked_recall_std = j.at("unattacked_recall_std").get<double>();
  a.worst_ratio = j.at("worst_ratio").get<double>();
  return a;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::kIo, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const std::string& suffix) {
  return stem.parent_path() / (stem.filename().string() + suffix);
}

}  // namespace

std::string format_number(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) fail(ErrorKind::kNumeric, "cannot format number");
  return std::string(buf, end);
}

std::string report_to_json(const EvalReport& report, bool include_runtime) {
  ojson j;
  j["config"] = ojson::parse(config_to_json(report.config));
  j["recall_unavailable"] = report.recall_unavailable;
  if (include_runtime) j["runtime_seconds"] = report.runtime_seconds;
  j["aggregates"] = ojson::array();
  for (const AggregateRow& a : report.aggregates) j["aggregates"].push_back(aggregate_json(a));
  j["unattacked"] = ojson::array();
  for (const UnattackedRow& u : report.unattacked) {
    ojson o;
    o["query_id"] = u.query_id;
    o["repetition"] = u.repetition;
    o["method"] = std::string(to_string(u.method));
    if (u.recall) o["recall"] = *u.recall;
    o["mean_abs_ps"] = u.mean_abs_ps;
    j["unattacked"].push_back(std::move(o));
  }
  j["rows"] = ojson::array();
  for (const QueryRow& r : report.rows) j["rows"].push_back(row_json(r));
  return j.dump(1) + "\n";
}

EvalReport report_from_json(std::string_view text) {
  EvalReport r;
  try {
    const ojson j = ojson::parse(text);
    r.config = config_from_json(j.at("config").dump());
    r.recall_unavailable = j.at("recall_unavailable").get<std::size_t>();
    if (j.contains("runtime_seconds")) r.runtime_seconds = j.at("runtime_seconds").get<double>();
    for (const ojson& a : j.at("aggregates")) r.aggregates.push_back(aggregate_from(a));
    for (const ojson& u : j.at("unattacked")) {
      UnattackedRow row;
      row.query_id = u.at("query_id").get<std::string>();
      row.repetition = u.at("repetition").get<int>();
      row.method = parse_method(u.at("method").get<std::string>());
      if (u.contains("recall")) row.recall = u.at("recall").get<double>();
      row.mean_abs_ps = u.at("mean_abs_ps").get<double>();
      r.unattacked.push_back(std::move(row));
    }
    for (const ojson& row : j.at("rows")) r.rows.push_back(row_from(row));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("report JSON: ") + e.what());
  }
  return r;
}

const std::vector<std::string>& aggregate_csv_columns() {
  static const std::vector<std::string> cols{
      "method",           "direction",          "intensity",         "n",
      "a_recall_slots",   "a_recall_slots_std", "a_recall_injected", "recall",
      "recall_n",         "recall_std",         "ps_shift",          "ps_shift_std",
      "adversarial_in_topk", "adherent_in_topk", "unattacked_abs_ps", "unattacked_recall",
      "unattacked_recall_n", "unattacked_recall_std", "worst_ratio"};
  return cols;
}

const std::vector<std::string>& row_csv_columns() {
  static const std::vector<std::string> cols{
      "query_id",         "repetition",        "method",     "direction",  "intensity",
      "adversarial_in_topk", "adherent_in_topk", "a_recall_slots", "a_recall_injected", "recall",
      "context_ps",       "unattacked_context_ps", "ps_shift"};
  return cols;
}

std::string aggregates_to_csv(const EvalReport& report) {
  std::string out;
  const auto& cols = aggregate_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (const AggregateRow& a : report.aggregates) {
    out += std::string(to_string(a.method)) + "," + std::string(to_string(a.direction)) + "," +
           std::to_string(a.intensity) + "," + std::to_string(a.n) + "," + format_number(a.a_recall_slots) + "," +
           format_number(a.a_recall_slots_std) + "," + format_number(a.a_recall_injected) + "," +
           format_number(a.recall) + "," + std::to_string(a.recall_n) + "," + format_number(a.recall_std) + "," +
           format_number(a.ps_shift) + "," + format_number(a.ps_shift_std) + "," +
           std::to_string(a.adversarial_in_topk) + "," + std::to_string(a.adherent_in_topk) + "," +
           format_number(a.unattacked_abs_ps) + "," + format_number(a.unattacked_recall) + "," +
           std::to_string(a.unattacked_recall_n) + "," + format_number(a.unattacked_recall_std) + "," +
           format_number(a.worst_ratio) + "\n";
  }
  return out;
}

std::string rows_to_csv(const EvalReport& report) {
  std::string out;
  const auto& cols = row_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (const QueryRow& r : report.rows) {
    out += r.query_id + "," + std::to_string(r.repetition) + "," + std::string(to_string(r.method)) + "," +
           std::string(to_string(r.direction)) + "," + std::to_string(r.intensity) + "," +
           std::to_string(r.adversarial_in_topk) + "," + std::to_string(r.adherent_in_topk) + "," +
           format_number(r.a_recall_slots) + "," + format_number(r.a_recall_injected) + "," +
           (r.recall ? format_number(*r.recall) : std::string()) + "," + format_number(r.context_ps) + "," +
           format_number(r.unattacked_context_ps) + "," + format_number(r.ps_shift) + "\n";
  }
  return out;
}

std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& stem,
                                               std::span<const std::string> formats, bool include_runtime) {
  std::vector<std::filesystem::path> written;
  for (const std::string& f : formats) {
    if (f == "json") {
      const auto p = with_suffix(stem, ".json");
      write_text(p, report_to_json(report, include_runtime));
      written.push_back(p);
    } else if (f == "csv") {
      const auto p = with_suffix(stem, ".csv");
      write_text(p, aggregates_to_csv(report));
      written.push_back(p);
      const auto rows = with_suffix(stem, "_rows.csv");
      write_text(rows, rows_to_csv(report));
      written.push_back(rows);
    } else {
      fail(ErrorKind::kUsage, "unknown report format \"" + f + "\"");
    }
  }
  return written;
}

}  // namespace biasdef
