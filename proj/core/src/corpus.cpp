#include "biasdef/corpus.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include "biasdef/error.hpp"
#include "json.hpp"

namespace biasdef {

namespace {

using ojson = nlohmann::ordered_json;

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::kIo, "cannot read " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
}

// Calls fn(object, line_number) for every non-blank line.
template <typename Fn>
void for_each_record(std::string_view text, std::string_view source, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    ojson obj;
    try {
      obj = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::kParse, where(source, line_no) + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) fail(ErrorKind::kParse, where(source, line_no) + ": expected a JSON object");
    fn(obj, line_no);
    if (end == text.size()) break;
  }
}

std::string require_string(const ojson& obj, const char* key, std::string_view source, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    fail(ErrorKind::kParse, where(source, line) + ": missing or non-string \"" + key + "\"");
  }
  return it->get<std::string>();
}

Embedding require_embedding(const ojson& obj, std::string_view source, std::size_t line) {
  auto it = obj.find("embedding");
  if (it == obj.end() || !it->is_array()) {
    fail(ErrorKind::kParse, where(source, line) + ": missing or non-array \"embedding\"");
  }
  Embedding e;
  e.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) fail(ErrorKind::kParse, where(source, line) + ": non-numeric embedding entry");
    double x = v.get<double>();
    if (!std::isfinite(x)) fail(ErrorKind::kParse, where(source, line) + ": non-finite embedding entry");
    e.push_back(x);
  }
  if (e.size() < 2) fail(ErrorKind::kSchema, where(source, line) + ": embedding needs at least 2 entries");
  return e;
}

std::optional<std::string> optional_text(const ojson& obj, std::string_view source, std::size_t line) {
  auto it = obj.find("text");
  if (it == obj.end()) return std::nullopt;
  if (!it->is_string()) fail(ErrorKind::kParse, where(source, line) + ": non-string \"text\"");
  return it->get<std::string>();
}

ojson embedding_json(const Embedding& e) {
  ojson arr = ojson::array();
  for (double x : e) arr.push_back(x);
  return arr;
}

std::string dump_line(const ojson& obj) {
  try {
    return obj.dump() + "\n";
  } catch (const nlohmann::json::type_error& e) {
    fail(ErrorKind::kSchema, std::string("cannot serialize record: ") + e.what());
  }
}

}  // namespace

std::string_view to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::kBenign: return "benign";
    case Provenance::kAdversarial: return "adversarial";
    case Provenance::kUnknown: return "unknown";
  }
  return "unknown";
}

Provenance parse_provenance(std::string_view s) {
  if (s == "benign") return Provenance::kBenign;
  if (s == "adversarial") return Provenance::kAdversarial;
  if (s == "unknown") return Provenance::kUnknown;
  fail(ErrorKind::kParse, "unknown provenance \"" + std::string(s) + "\"");
}

Corpus::Corpus(std::vector<Passage> passages) {
  passages_.reserve(passages.size());
  for (Passage& p : passages) add(std::move(p));
}

void Corpus::add(Passage passage) {
  if (passage.embedding.size() < 2) {
    fail(ErrorKind::kSchema, "passage " + passage.id + ": embedding needs at least 2 entries");
  }
  for (double x : passage.embedding) {
    if (!std::isfinite(x)) fail(ErrorKind::kSchema, "passage " + passage.id + ": non-finite embedding");
  }
  if (dimension_ && *dimension_ != passage.embedding.size()) {
    fail(ErrorKind::kSchema, "passage " + passage.id + ": dimension " +
                                 std::to_string(passage.embedding.size()) + " != corpus dimension " +
                                 std::to_string(*dimension_));
  }
  if (index_.contains(passage.id)) fail(ErrorKind::kSchema, "duplicate passage id " + passage.id);
  dimension_ = passage.embedding.size();
  index_.emplace(passage.id, passages_.size());
  passages_.push_back(std::move(passage));
}

const Passage* Corpus::find(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &passages_[it->second];
}

const Passage& Corpus::at(std::string_view id) const {
  const Passage* p = find(id);
  if (!p) fail(ErrorKind::kReference, "unknown passage id " + std::string(id));
  return *p;
}

void Corpus::set_relevant(std::string_view id, bool relevant) {
  auto it = index_.find(id);
  if (it == index_.end()) fail(ErrorKind::kReference, "unknown passage id " + std::string(id));
  passages_[it->second].relevant = relevant;
}

bool Corpus::has_unknown_provenance() const {
  for (const Passage& p : passages_) {
    if (p.provenance == Provenance::kUnknown) return true;
  }
  return false;
}

Corpus parse_corpus(std::string_view jsonl, std::string_view source) {
  Corpus corpus;
  for_each_record(jsonl, source, [&](const ojson& obj, std::size_t line) {
    Passage p;
    p.id = require_string(obj, "id", source, line);
    p.embedding = require_embedding(obj, source, line);
    if (auto it = obj.find("provenance"); it != obj.end()) {
      if (!it->is_string()) fail(ErrorKind::kParse, where(source, line) + ": non-string \"provenance\"");
      try {
        p.provenance = parse_provenance(it->get<std::string>());
      } catch (const Error& e) {
        fail(ErrorKind::kParse, where(source, line) + ": " + e.what());
      }
    }
    if (auto it = obj.find("relevant"); it != obj.end()) {
      if (!it->is_boolean()) fail(ErrorKind::kParse, where(source, line) + ": non-boolean \"relevant\"");
      p.relevant = it->get<bool>();
    }
    p.text = optional_text(obj, source, line);
    try {
      corpus.add(std::move(p));
    } catch (const Error& e) {
      fail(e.kind(), where(source, line) + ": " + e.what());
    }
  });
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_file(path), path.string());
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const Passage& p : corpus.passages()) {
    ojson obj;
    obj["id"] = p.id;
    obj["embedding"] = embedding_json(p.embedding);
    obj["provenance"] = std::string(to_string(p.provenance));
    if (p.relevant) obj["relevant"] = *p.relevant;
    if (p.text) obj["text"] = *p.text;
    out += dump_line(obj);
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, serialize_corpus(corpus));
}

std::vector<Query> parse_queries(std::string_view jsonl, std::string_view source) {
  std::vector<Query> out;
  std::map<std::string, int, std::less<>> seen;
  for_each_record(jsonl, source, [&](const ojson& obj, std::size_t line) {
    Query q;
    q.id = require_string(obj, "id", source, line);
    q.embedding = require_embedding(obj, source, line);
    q.text = optional_text(obj, source, line);
    if (!out.empty() && out.front().embedding.size() != q.embedding.size()) {
      fail(ErrorKind::kSchema, where(source, line) + ": query dimension mismatch");
    }
    if (!seen.emplace(q.id, 0).second) fail(ErrorKind::kSchema, where(source, line) + ": duplicate query id " + q.id);
    out.push_back(std::move(q));
  });
  return out;
}

std::vector<Query> load_queries(const std::filesystem::path& path) {
  return parse_queries(read_file(path), path.string());
}

void save_queries(std::span<const Query> queries, const std::filesystem::path& path) {
  std::string out;
  for (const Query& q : queries) {
    ojson obj;
    obj["id"] = q.id;
    obj["embedding"] = embedding_json(q.embedding);
    if (q.text) obj["text"] = *q.text;
    out += dump_line(obj);
  }
  write_file(path, out);
}

std::vector<QrelEntry> load_qrel_entries(const std::filesystem::path& path) {
  std::vector<QrelEntry> out;
  const std::string source = path.string();
  for_each_record(read_file(path), source, [&](const ojson& obj, std::size_t line) {
    out.push_back({require_string(obj, "query_id", source, line),
                   require_string(obj, "passage_id", source, line)});
  });
  return out;
}

void save_qrels(std::span<const QrelEntry> entries, const std::filesystem::path& path) {
  std::string out;
  for (const QrelEntry& e : entries) {
    ojson obj;
    obj["query_id"] = e.query_id;
    obj["passage_id"] = e.passage_id;
    out += dump_line(obj);
  }
  write_file(path, out);
}

Corpus apply_qrels(Corpus corpus, std::span<const QrelEntry> entries,
                   std::optional<std::string_view> query_id) {
  std::vector<std::string> ids;
  for (const Passage& p : corpus.passages()) ids.push_back(p.id);
  for (const std::string& id : ids) corpus.set_relevant(id, false);
  for (const QrelEntry& e : entries) {
    if (!corpus.contains(e.passage_id)) {
      fail(ErrorKind::kReference, "qrels reference unknown passage id " + e.passage_id);
    }
    if (query_id && e.query_id != *query_id) continue;
    corpus.set_relevant(e.passage_id, true);
  }
  return corpus;
}

Corpus load_qrels(const std::filesystem::path& path, Corpus corpus,
                  std::optional<std::string_view> query_id) {
  return apply_qrels(std::move(corpus), load_qrel_entries(path), query_id);
}

}  // namespace biasdef
