#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "biasdef/corpus.hpp"
#include "biasdef/random.hpp"
#include "biasdef/retriever.hpp"

namespace biasdef::testing {

inline std::vector<Embedding> random_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Embedding> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(rng.gaussian_vector(dim));
  return out;
}

inline std::string pid(std::size_t i) {
  std::string s = std::to_string(i);
  return "p" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

inline Corpus corpus_of(const std::vector<Embedding>& points, Provenance prov = Provenance::kBenign) {
  Corpus c;
  for (std::size_t i = 0; i < points.size(); ++i) c.add({pid(i), points[i], prov, std::nullopt, std::nullopt});
  return c;
}

// Pool items with explicit ss and ps values; ids p000, p001, ...
inline std::vector<ScoredPassage> scored(const std::vector<std::pair<double, double>>& ss_ps) {
  std::vector<ScoredPassage> out;
  for (std::size_t i = 0; i < ss_ps.size(); ++i) out.push_back({pid(i), ss_ps[i].first, ss_ps[i].second});
  return out;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("biasdef_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace biasdef::testing
