#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "agcr/skipgram.hpp"

namespace agcr::taxonomy {

/// Directed parent -> child label graph. Cycles are allowed.
class LabelTaxonomy {
 public:
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  /// Labels in order of first appearance.
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& parents(std::size_t label) const { return parents_.at(label); }
  const std::vector<std::size_t>& children(std::size_t label) const { return children_.at(label); }

  std::optional<std::size_t> find(std::string_view label) const;
  bool is_parent(std::size_t parent, std::size_t child) const;

  std::size_t add_label(const std::string& label);
  /// Duplicate edges are ignored.
  void add_edge(const std::string& parent, const std::string& child);

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
};

/// "parent<TAB>child" per line; a single-column line declares an isolated label.
LabelTaxonomy load_taxonomy(const std::filesystem::path& path);
LabelTaxonomy parse_taxonomy(std::string_view content, const std::string& source = "<taxonomy>");

struct WalkConfig {
  std::size_t walks_per_node = 10;
  std::size_t steps = 500;  ///< transitions per walk
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

using Walk = std::vector<std::string>;

/// Meta-path guided walks. Every two-step move follows either
/// child-father-child (up, then down) or father-child-father (down, then up),
/// chosen with probability 1/2. A meta-path is infeasible when the current
/// label lacks the needed parent/child, or when its first step would repeat
/// the direction of the previous step (which would break the alternating
/// parent/child pattern of the walk); the other meta-path is then tried, and
/// the walk ends when neither applies. Each walk is seeded from
/// (seed, label, walk index), so output does not depend on thread count.
std::vector<Walk> metapath_walks(const LabelTaxonomy& tax, const WalkConfig& cfg);

/// Label vectors over every taxonomy label, in taxonomy order.
using LabelEmbedding = skipgram::EmbeddingTable;

/// Skip-gram settings used for labels unless overridden (dim 200).
skipgram::SkipgramConfig default_label_skipgram();

/// metapath_walks -> train_skipgram. Labels absent from the trained
/// vocabulary get zero vectors and a warning.
LabelEmbedding embed_labels(const LabelTaxonomy& tax, const WalkConfig& walk_cfg, const skipgram::SkipgramConfig& sg_cfg);

/// negative label -> alpha in [0, 1]
using AlphaTable = std::map<std::string, double>;

/// alpha_k = clamp(1 - max_{t in positives} cos(vec t, vec k), 0, 1) for every
/// k in `all_labels` that is not a positive.
AlphaTable alpha_weights(const LabelEmbedding& emb, const std::set<std::string>& positives,
                         const std::vector<std::string>& all_labels);

/// p = 1 / mean_doc(sum_k alpha_k).
double calibrate_p(const std::vector<AlphaTable>& tables);

struct ReconstructionPoint {
  double threshold = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t predicted_edges = 0;
};

/// Predict an undirected edge between two labels whenever the cosine
/// similarity of their vectors is >= threshold, and score the prediction
/// against the undirected taxonomy edges. Each label's incident edges are its
/// instances for the micro/macro F1.
std::vector<ReconstructionPoint> reconstruct_eval(const LabelEmbedding& emb, const LabelTaxonomy& tax,
                                                  const std::vector<double>& thresholds);

/// F1 of predicting every pair as an edge, i.e. the best any uniformly random
/// edge predictor achieves in expectation.
double random_edge_baseline_f1(const LabelTaxonomy& tax);

}  // namespace agcr::taxonomy
