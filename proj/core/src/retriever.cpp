#include "biasdef/retriever.hpp"

#include <algorithm>

#include "biasdef/error.hpp"

namespace biasdef {

std::vector<std::string> RankedList::ids() const {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const ScoredPassage& s : items) out.push_back(s.passage_id);
  return out;
}

bool ranks_before(const ScoredPassage& a, const ScoredPassage& b) noexcept {
  if (a.ss != b.ss) return a.ss > b.ss;
  return a.passage_id < b.passage_id;
}

void sort_ranked(std::vector<ScoredPassage>& items) {
  std::sort(items.begin(), items.end(), ranks_before);
}

RankedList retrieve_top(const Corpus& corpus, const Query& query, std::size_t n) {
  if (corpus.empty()) fail(ErrorKind::kUsage, "retrieve_top: empty corpus");
  if (n == 0) fail(ErrorKind::kUsage, "retrieve_top: n must be positive");
  if (*corpus.dimension() != query.embedding.size()) {
    fail(ErrorKind::kUsage, "retrieve_top: query " + query.id + " has dimension " +
                                std::to_string(query.embedding.size()) + ", corpus has " +
                                std::to_string(*corpus.dimension()));
  }
  std::vector<ScoredPassage> scored;
  scored.reserve(corpus.size());
  for (const Passage& p : corpus.passages()) {
    scored.push_back({p.id, cosine_similarity(query.embedding, p.embedding), std::nullopt});
  }
  const std::size_t take = std::min(n, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    ranks_before);
  scored.resize(take);
  return {query.id, std::move(scored)};
}

RankedList candidate_pool(const Corpus& corpus, const Query& query, std::size_t k) {
  if (k == 0) fail(ErrorKind::kUsage, "candidate_pool: k must be positive");
  return retrieve_top(corpus, query, 4 * k);
}

RankedList prefix(const RankedList& list, std::size_t k) {
  RankedList out{list.query_id, {}};
  const std::size_t take = std::min(k, list.items.size());
  out.items.assign(list.items.begin(), list.items.begin() + static_cast<std::ptrdiff_t>(take));
  return out;
}

}  // namespace biasdef
