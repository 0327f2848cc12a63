#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "biasdef/corpus.hpp"

namespace biasdef {

struct ScoredPassage {
  std::string passage_id;
  double ss = 0.0;
  std::optional<double> ps;

  bool operator==(const ScoredPassage&) const = default;
};

// Items ordered by descending ss, ties by ascending id.
struct RankedList {
  std::string query_id;
  std::vector<ScoredPassage> items;

  std::vector<std::string> ids() const;
  bool operator==(const RankedList&) const = default;
};

// The (ss desc, id asc) total order.
bool ranks_before(const ScoredPassage& a, const ScoredPassage& b) noexcept;
void sort_ranked(std::vector<ScoredPassage>& items);

RankedList retrieve_top(const Corpus& corpus, const Query& query, std::size_t n);

// retrieve_top with n = 4k.
RankedList candidate_pool(const Corpus& corpus, const Query& query, std::size_t k);

// First k items of an already ranked list.
RankedList prefix(const RankedList& list, std::size_t k);

}  // namespace biasdef
