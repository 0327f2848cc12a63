#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biasdef/vecmath.hpp"

namespace biasdef {

enum class Provenance { kBenign, kAdversarial, kUnknown };

std::string_view to_string(Provenance p) noexcept;
Provenance parse_provenance(std::string_view s);

struct Passage {
  std::string id;
  Embedding embedding;
  Provenance provenance = Provenance::kUnknown;
  std::optional<bool> relevant;
  std::optional<std::string> text;

  bool operator==(const Passage&) const = default;
};

struct Query {
  std::string id;
  Embedding embedding;
  std::optional<std::string> text;

  bool operator==(const Query&) const = default;
};

// Ordered passage collection with unique ids and one shared dimension. The
// dimension is fixed by the first insert.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Passage> passages);

  void add(Passage passage);

  std::optional<std::size_t> dimension() const noexcept { return dimension_; }
  std::span<const Passage> passages() const noexcept { return passages_; }
  std::size_t size() const noexcept { return passages_.size(); }
  bool empty() const noexcept { return passages_.empty(); }

  const Passage* find(std::string_view id) const;
  const Passage& at(std::string_view id) const;  // reference error if absent
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  void set_relevant(std::string_view id, bool relevant);
  bool has_unknown_provenance() const;

  bool operator==(const Corpus& other) const {
    return dimension_ == other.dimension_ && passages_ == other.passages_;
  }

 private:
  std::optional<std::size_t> dimension_;
  std::vector<Passage> passages_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct QrelEntry {
  std::string query_id;
  std::string passage_id;
};

Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& corpus);
Corpus parse_corpus(std::string_view jsonl, std::string_view source = "<memory>");

std::vector<Query> load_queries(const std::filesystem::path& path);
void save_queries(std::span<const Query> queries, const std::filesystem::path& path);
std::vector<Query> parse_queries(std::string_view jsonl, std::string_view source = "<memory>");

std::vector<QrelEntry> load_qrel_entries(const std::filesystem::path& path);
void save_qrels(std::span<const QrelEntry> entries, const std::filesystem::path& path);

// Marks listed passages relevant and every other passage not relevant. With a
// query id, only entries for that query count; every entry must still resolve.
Corpus apply_qrels(Corpus corpus, std::span<const QrelEntry> entries,
                   std::optional<std::string_view> query_id = std::nullopt);
Corpus load_qrels(const std::filesystem::path& path, Corpus corpus,
                  std::optional<std::string_view> query_id = std::nullopt);

}  // namespace biasdef
