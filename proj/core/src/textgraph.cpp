#include "agcr/textgraph.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <queue>

#include <nlohmann/json.hpp>

#include "agcr/error.hpp"

namespace agcr::textgraph {

std::optional<std::size_t> WordGraph::find(std::string_view lemma) const {
  auto it = index_.find(std::string(lemma));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t WordGraph::weight(std::size_t from, std::size_t to) const {
  auto it = edges_.find({from, to});
  return it == edges_.end() ? 0 : it->second;
}

std::uint32_t WordGraph::weight(std::string_view from, std::string_view to) const {
  auto a = find(from);
  auto b = find(to);
  return a && b ? weight(*a, *b) : 0;
}

std::size_t WordGraph::add_occurrence(const std::string& lemma, std::size_t position) {
  auto [it, inserted] = index_.try_emplace(lemma, lemmas_.size());
  if (inserted) {
    lemmas_.push_back(lemma);
    positions_.emplace_back();
    neighbors_.emplace_back();
  }
  auto& pos = positions_[it->second];
  pos.insert(std::upper_bound(pos.begin(), pos.end(), position), position);
  return it->second;
}

void WordGraph::add_edge(std::size_t from, std::size_t to, std::uint32_t count) {
  if (from >= size() || to >= size()) throw Error("edge endpoint out of range");
  edges_[{from, to}] += count;
  if (from == to) return;
  auto link = [](std::vector<std::size_t>& list, std::size_t v) {
    auto it = std::lower_bound(list.begin(), list.end(), v);
    if (it == list.end() || *it != v) list.insert(it, v);
  };
  link(neighbors_[from], to);
  link(neighbors_[to], from);
}

WordGraph build_graph(const corpus::TokenStream& stream, int window) {
  if (window < 2) throw ConfigError("graph window must be >= 2");
  WordGraph g;
  std::vector<std::size_t> node_of;
  node_of.reserve(stream.size());
  for (const auto& t : stream.tokens) node_of.push_back(g.add_occurrence(t.lemma, t.position));
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t i = 0; i < node_of.size(); ++i) {
    for (std::size_t j = i + 1; j < node_of.size() && j < i + w; ++j) g.add_edge(node_of[i], node_of[j]);
  }
  return g;
}

std::vector<double> shortest_distances(const WordGraph& g, std::size_t source, DistanceMode mode) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(g.size(), inf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (std::size_t v : g.neighbors()[u]) {
      double len = 1.0;
      if (mode == DistanceMode::InverseWeight) len = 1.0 / static_cast<double>(g.weight(u, v) + g.weight(v, u));
      if (d + len < dist[v]) {
        dist[v] = d + len;
        heap.emplace(dist[v], v);
      }
    }
  }
  return dist;
}

CentralityRanking closeness_centrality(const WordGraph& g, DistanceMode mode) {
  const std::size_t n = g.size();
  CentralityRanking rank;
  rank.entries.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    auto dist = shortest_distances(g, v, mode);
    double total = 0.0;
    std::size_t reachable = 0;
    for (std::size_t u = 0; u < n; ++u) {
      if (u == v || dist[u] == std::numeric_limits<double>::infinity()) continue;
      total += dist[u];
      ++reachable;
    }
    double score = 0.0;
    if (reachable > 0 && total > 0.0) {
      const double r = static_cast<double>(reachable);
      score = (r / total) * (r / static_cast<double>(n - 1));
    }
    rank.entries.push_back({v, g.lemma(v), score});
  }
  std::sort(rank.entries.begin(), rank.entries.end(), [&](const CentralityEntry& a, const CentralityEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    auto pa = g.first_position(a.node), pb = g.first_position(b.node);
    if (pa != pb) return pa < pb;
    return a.lemma < b.lemma;
  });
  rank.rank_of.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) rank.rank_of[rank.entries[i].node] = i;
  return rank;
}

std::vector<std::string> select_central_words(const CentralityRanking& rank, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < rank.size() && i < n; ++i) out.push_back(rank.entries[i].lemma);
  return out;
}

Subgraph extract_subgraph(const WordGraph& g, std::string_view center, std::size_t max_nodes,
                          const CentralityRanking& rank) {
  auto start = g.find(center);
  if (!start) throw Error("center \"" + std::string(center) + "\" is not in the graph");
  if (rank.rank_of.size() != g.size()) throw Error("centrality ranking does not match graph");

  Subgraph sub;
  sub.center = std::string(center);
  if (max_nodes == 0) return sub;
  std::vector<char> visited(g.size(), 0);
  auto by_rank = [&](std::size_t a, std::size_t b) { return rank.rank_of[a] < rank.rank_of[b]; };
  auto take = [&](std::size_t v) {
    visited[v] = 1;
    sub.nodes.push_back(v);
    sub.members.push_back(g.lemma(v));
    return sub.nodes.size() >= max_nodes;
  };

  if (take(*start)) return sub;
  std::deque<std::size_t> queue{*start};
  std::vector<std::size_t> frontier;
  while (!queue.empty()) {
    std::size_t u = queue.front();
    queue.pop_front();
    frontier.clear();
    for (std::size_t v : g.neighbors()[u]) {
      if (!visited[v]) frontier.push_back(v);
    }
    std::sort(frontier.begin(), frontier.end(), by_rank);
    for (std::size_t v : frontier) {
      if (take(v)) return sub;
      queue.push_back(v);
    }
  }

  // Component exhausted: DFS restarts from the best-ranked unvisited node.
  for (const auto& entry : rank.entries) {
    if (visited[entry.node]) continue;
    std::vector<std::size_t> stack{entry.node};
    while (!stack.empty()) {
      std::size_t u = stack.back();
      stack.pop_back();
      if (visited[u]) continue;
      if (take(u)) return sub;
      frontier.clear();
      for (std::size_t v : g.neighbors()[u]) {
        if (!visited[v]) frontier.push_back(v);
      }
      std::sort(frontier.begin(), frontier.end(), by_rank);
      for (auto it = frontier.rbegin(); it != frontier.rend(); ++it) stack.push_back(*it);
    }
  }
  return sub;
}

NormalizedRow pad_row(std::size_t seq_len) {
  NormalizedRow row;
  row.slots.assign(seq_len, Slot{});
  return row;
}

NormalizedRow normalize_subgraph(const Subgraph& sub, const WordGraph& g, std::size_t seq_len, int window,
                                 bool sort) {
  if (sub.nodes.empty()) throw Error("cannot normalize an empty subgraph");
  NormalizedRow row;
  row.slots.reserve(seq_len);

  if (!sort) {
    for (std::size_t node : sub.nodes) {
      if (row.slots.size() == seq_len) break;
      row.slots.push_back(Slot{g.lemma(node), g.first_position(node), 1});
    }
    row.q = row.slots.empty() ? 0 : 1;
    row.slots.resize(seq_len);
    return row;
  }

  struct Occurrence {
    std::size_t position;
    std::size_t node;
  };
  std::vector<Occurrence> occ;
  for (std::size_t node : sub.nodes) {
    for (std::size_t p : g.positions(node)) occ.push_back({p, node});
  }
  std::sort(occ.begin(), occ.end(), [](const Occurrence& a, const Occurrence& b) { return a.position < b.position; });

  // [begin, end) ranges into occ
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= occ.size(); ++i) {
    if (i == occ.size() || occ[i].position - occ[i - 1].position > static_cast<std::size_t>(window)) {
      blocks.emplace_back(begin, i);
      begin = i;
    }
  }
  std::stable_sort(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) {
    return a.second - a.first > b.second - b.first;
  });

  int block_index = 0;
  for (const auto& [b, e] : blocks) {
    if (row.slots.size() == seq_len) break;
    ++block_index;
    for (std::size_t i = b; i < e && row.slots.size() < seq_len; ++i) {
      row.slots.push_back(Slot{g.lemma(occ[i].node), occ[i].position, block_index});
    }
  }
  row.q = block_index;
  row.slots.resize(seq_len);
  return row;
}

void GraphConfig::validate() const {
  if (central_words == 0 || max_subgraph == 0 || seq_len == 0) throw ConfigError("N, K and T must be positive");
  if (window < 2) throw ConfigError("graph window must be >= 2");
}

ArrangedMatrix arrange_matrix(const corpus::TokenStream& doc, const GraphConfig& cfg, std::string doc_id) {
  cfg.validate();
  ArrangedMatrix m;
  m.doc_id = std::move(doc_id);
  m.seq_len = cfg.seq_len;
  m.rows.reserve(cfg.central_words);
  if (!doc.empty()) {
    WordGraph g = build_graph(doc, cfg.window);
    CentralityRanking rank = closeness_centrality(g, cfg.distance);
    for (const auto& center : select_central_words(rank, cfg.central_words)) {
      Subgraph sub = extract_subgraph(g, center, cfg.max_subgraph, rank);
      m.rows.push_back(normalize_subgraph(sub, g, cfg.seq_len, cfg.window, cfg.sort));
    }
  }
  while (m.rows.size() < cfg.central_words) m.rows.push_back(pad_row(cfg.seq_len));
  return m;
}

std::string to_json(const ArrangedMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : m.rows) {
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& s : row.slots) {
      nlohmann::json lemma = s.is_pad() ? nlohmann::json(nullptr) : nlohmann::json(s.lemma);
      slots.push_back({lemma, s.position, s.block});
    }
    rows.push_back({{"slots", std::move(slots)}, {"q", row.q}});
  }
  nlohmann::json j = {{"doc_id", m.doc_id}, {"N", m.rows.size()}, {"T", m.seq_len}, {"rows", std::move(rows)}};
  return j.dump();
}

ArrangedMatrix matrix_from_json(std::string_view json) {
  ArrangedMatrix m;
  try {
    auto j = nlohmann::json::parse(json);
    m.doc_id = j.at("doc_id").get<std::string>();
    m.seq_len = j.at("T").get<std::size_t>();
    const auto n = j.at("N").get<std::size_t>();
    for (const auto& r : j.at("rows")) {
      NormalizedRow row;
      row.q = r.at("q").get<int>();
      for (const auto& s : r.at("slots")) {
        Slot slot;
        if (!s.at(0).is_null()) slot.lemma = s.at(0).get<std::string>();
        slot.position = s.at(1).get<std::size_t>();
        slot.block = s.at(2).get<int>();
        row.slots.push_back(std::move(slot));
      }
      if (row.slots.size() != m.seq_len) throw Error("row length does not match T");
      m.rows.push_back(std::move(row));
    }
    if (m.rows.size() != n) throw Error("row count does not match N");
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad arranged-matrix JSON: ") + e.what());
  }
  return m;
}

}  // namespace agcr::textgraph
