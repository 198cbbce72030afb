#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "agcr/corpus.hpp"

namespace agcr::textgraph {

/// Word-order preserving graph-of-words. Nodes are indexed in order of first
/// occurrence; each keeps every (sorted) position where its lemma occurs.
/// Edges are directed source -> target, weighted by co-occurrence count.
class WordGraph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  std::size_t size() const noexcept { return lemmas_.size(); }
  bool empty() const noexcept { return lemmas_.empty(); }

  const std::string& lemma(std::size_t node) const { return lemmas_.at(node); }
  const std::vector<std::size_t>& positions(std::size_t node) const { return positions_.at(node); }
  std::size_t first_position(std::size_t node) const { return positions_.at(node).front(); }
  std::optional<std::size_t> find(std::string_view lemma) const;

  const std::map<Edge, std::uint32_t>& edges() const noexcept { return edges_; }
  /// Directed weight, 0 when absent.
  std::uint32_t weight(std::size_t from, std::size_t to) const;
  std::uint32_t weight(std::string_view from, std::string_view to) const;

  /// Undirected adjacency without self-loops, each list sorted by node index.
  const std::vector<std::vector<std::size_t>>& neighbors() const noexcept { return neighbors_; }

  std::size_t add_occurrence(const std::string& lemma, std::size_t position);
  void add_edge(std::size_t from, std::size_t to, std::uint32_t count = 1);

 private:
  std::vector<std::string> lemmas_;
  std::vector<std::vector<std::size_t>> positions_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<Edge, std::uint32_t> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

/// Each token at filtered index i gets an edge to every token at i+1 .. i+window-1.
WordGraph build_graph(const corpus::TokenStream& stream, int window);

enum class DistanceMode {
  Unit,           ///< every undirected edge has length 1 (default)
  InverseWeight,  ///< length = 1 / (w(a->b) + w(b->a))
};

struct CentralityEntry {
  std::size_t node = 0;
  std::string lemma;
  double score = 0.0;
};

/// Nodes ordered by descending closeness; ties by earliest first position,
/// then lexicographically.
struct CentralityRanking {
  std::vector<CentralityEntry> entries;
  /// rank_of[node] = index of that node in `entries`.
  std::vector<std::size_t> rank_of;

  std::size_t size() const noexcept { return entries.size(); }
};

/// Closeness (r-1)/sum(d) on the undirected view, scaled by (r-1)/(n-1) when
/// only r nodes (including the source) are reachable. Isolated nodes score 0.
CentralityRanking closeness_centrality(const WordGraph& g, DistanceMode mode = DistanceMode::Unit);

/// Shortest-path distances from `source` over the undirected view (Dijkstra);
/// unreachable nodes get +inf.
std::vector<double> shortest_distances(const WordGraph& g, std::size_t source, DistanceMode mode);

std::vector<std::string> select_central_words(const CentralityRanking& rank, std::size_t n);

struct Subgraph {
  std::string center;
  /// Discovery order; members.front() is the center.
  std::vector<std::string> members;
  std::vector<std::size_t> nodes;
};

/// BFS from `center` with frontiers ordered by centrality rank, then DFS
/// restarts from the best-ranked unvisited node once the component is
/// exhausted. Stops at `max_nodes` members.
Subgraph extract_subgraph(const WordGraph& g, std::string_view center, std::size_t max_nodes,
                          const CentralityRanking& rank);

struct Slot {
  std::string lemma;  ///< empty for PAD
  std::size_t position = 0;
  int block = 0;

  bool is_pad() const noexcept { return block == 0; }
  friend bool operator==(const Slot&, const Slot&) = default;
};

struct NormalizedRow {
  std::vector<Slot> slots;
  int q = 0;  ///< number of blocks present in `slots`

  friend bool operator==(const NormalizedRow&, const NormalizedRow&) = default;
};

/// Expand members to all their occurrences, split into positional blocks at
/// gaps larger than `window`, put longer blocks first, and cut/pad to
/// `seq_len` slots. With sort == false, members are emitted in discovery
/// order with their earliest occurrence only, as a single block.
NormalizedRow normalize_subgraph(const Subgraph& sub, const WordGraph& g, std::size_t seq_len, int window,
                                 bool sort);

NormalizedRow pad_row(std::size_t seq_len);

struct GraphConfig {
  std::size_t central_words = 100;  ///< N
  std::size_t max_subgraph = 25;    ///< K
  std::size_t seq_len = 20;         ///< T
  int window = 3;
  bool sort = true;
  DistanceMode distance = DistanceMode::Unit;

  void validate() const;
};

struct ArrangedMatrix {
  std::string doc_id;
  std::size_t seq_len = 0;
  std::vector<NormalizedRow> rows;

  friend bool operator==(const ArrangedMatrix&, const ArrangedMatrix&) = default;
};

ArrangedMatrix arrange_matrix(const corpus::TokenStream& doc, const GraphConfig& cfg, std::string doc_id = {});

/// {doc_id, N, T, rows:[{slots:[[lemma|null,pos,block],...], q}]}
std::string to_json(const ArrangedMatrix& m);
ArrangedMatrix matrix_from_json(std::string_view json);

}  // namespace agcr::textgraph
