#include "agcr/taxonomy.hpp"

#include <algorithm>
#include <thread>

#include <spdlog/spdlog.h>

#include "agcr/corpus.hpp"
#include "agcr/error.hpp"
#include "agcr/metrics.hpp"
#include "agcr/random.hpp"

namespace agcr::taxonomy {

std::optional<std::size_t> LabelTaxonomy::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool LabelTaxonomy::is_parent(std::size_t parent, std::size_t child) const {
  const auto& c = children_.at(parent);
  return std::binary_search(c.begin(), c.end(), child);
}

std::size_t LabelTaxonomy::add_label(const std::string& label) {
  auto [it, inserted] = index_.try_emplace(label, labels_.size());
  if (inserted) {
    labels_.push_back(label);
    parents_.emplace_back();
    children_.emplace_back();
  }
  return it->second;
}

void LabelTaxonomy::add_edge(const std::string& parent, const std::string& child) {
  const std::size_t p = add_label(parent);
  const std::size_t c = add_label(child);
  if (is_parent(p, c)) return;
  edges_.emplace_back(p, c);
  auto& ch = children_[p];
  ch.insert(std::lower_bound(ch.begin(), ch.end(), c), c);
  auto& pa = parents_[c];
  pa.insert(std::lower_bound(pa.begin(), pa.end(), p), p);
}

LabelTaxonomy parse_taxonomy(std::string_view content, const std::string& source) {
  LabelTaxonomy tax;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      auto tab = line.find('\t');
      if (tab == std::string_view::npos) {
        tax.add_label(std::string(line));
      } else {
        auto parent = line.substr(0, tab);
        auto child = line.substr(tab + 1);
        if (parent.empty() || child.empty() || child.find('\t') != std::string_view::npos) {
          throw ParseError(source, line_no, "expected \"parent<TAB>child\" or a single label");
        }
        tax.add_edge(std::string(parent), std::string(child));
      }
    }
    if (end == content.size()) break;
    start = end + 1;
  }
  if (tax.empty()) throw ParseError(source, 0, "taxonomy has no labels");
  return tax;
}

LabelTaxonomy load_taxonomy(const std::filesystem::path& path) {
  return parse_taxonomy(corpus::read_file(path), path.string());
}

namespace {

enum class Step { None, Up, Down };

Walk walk_from(const LabelTaxonomy& tax, std::size_t start, std::size_t steps, Rng& rng) {
  Walk walk{tax.labels()[start]};
  std::size_t current = start;
  Step last = Step::None;
  std::size_t taken = 0;
  while (taken < steps) {
    // true = child-father-child (up first), false = father-child-father
    const bool prefer_up = rng.coin();
    auto feasible = [&](bool up) {
      if (up && last == Step::Up) return false;
      if (!up && last == Step::Down) return false;
      return up ? !tax.parents(current).empty() : !tax.children(current).empty();
    };
    bool up;
    if (feasible(prefer_up)) {
      up = prefer_up;
    } else if (feasible(!prefer_up)) {
      up = !prefer_up;
    } else {
      break;
    }
    const auto& first = up ? tax.parents(current) : tax.children(current);
    const std::size_t middle = first[rng.below(first.size())];
    walk.push_back(tax.labels()[middle]);
    if (++taken == steps) break;
    // `current` is itself a valid second hop, so this list is never empty.
    const auto& second = up ? tax.children(middle) : tax.parents(middle);
    current = second[rng.below(second.size())];
    walk.push_back(tax.labels()[current]);
    ++taken;
    last = up ? Step::Down : Step::Up;
  }
  return walk;
}

}  // namespace

std::vector<Walk> metapath_walks(const LabelTaxonomy& tax, const WalkConfig& cfg) {
  if (tax.empty()) throw Error("metapath_walks: empty taxonomy");
  const std::size_t L = tax.size();
  std::vector<Walk> walks(L * cfg.walks_per_node);
  auto run = [&](std::size_t label_begin, std::size_t label_end) {
    for (std::size_t l = label_begin; l < label_end; ++l) {
      const std::uint64_t label_seed = derive_seed(cfg.seed, fnv1a64(tax.labels()[l]));
      for (std::size_t w = 0; w < cfg.walks_per_node; ++w) {
        Rng rng(derive_seed(label_seed, w));
        walks[l * cfg.walks_per_node + w] = walk_from(tax, l, cfg.steps, rng);
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, L));
  if (workers == 1) {
    run(0, L);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (L + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t b = w * chunk, e = std::min(L, b + chunk);
      if (b < e) pool.emplace_back(run, b, e);
    }
    for (auto& t : pool) t.join();
  }
  return walks;
}

skipgram::SkipgramConfig default_label_skipgram() {
  skipgram::SkipgramConfig cfg;
  cfg.dim = 200;
  cfg.window = 5;
  cfg.negatives = 5;
  cfg.epochs = 3;
  return cfg;
}

LabelEmbedding embed_labels(const LabelTaxonomy& tax, const WalkConfig& walk_cfg, const skipgram::SkipgramConfig& sg_cfg) {
  auto walks = metapath_walks(tax, walk_cfg);
  auto trained = skipgram::train_skipgram(walks, sg_cfg);
  const std::size_t d = trained.dim();
  std::vector<float> data(tax.size() * d, 0.f);
  std::size_t missing = 0;
  for (std::size_t l = 0; l < tax.size(); ++l) {
    if (auto row = trained.find(tax.labels()[l])) {
      auto src = trained.row(*row);
      std::copy(src.begin(), src.end(), data.begin() + static_cast<std::ptrdiff_t>(l * d));
    } else {
      ++missing;
    }
  }
  if (missing) spdlog::warn("{} labels never appeared in a walk; using zero vectors", missing);
  LabelEmbedding emb(tax.labels(), d, std::move(data));
  emb.metadata = trained.metadata;
  emb.epoch_loss = trained.epoch_loss;
  return emb;
}

AlphaTable alpha_weights(const LabelEmbedding& emb, const std::set<std::string>& positives,
                         const std::vector<std::string>& all_labels) {
  if (positives.empty()) throw Error("alpha_weights: document has no positive labels");
  const std::vector<float> zero(emb.dim(), 0.f);
  std::size_t missing = 0;
  auto vec = [&](const std::string& label) -> std::span<const float> {
    if (auto i = emb.find(label)) return emb.row(*i);
    ++missing;
    return zero;
  };
  std::vector<std::span<const float>> pos;
  for (const auto& t : positives) pos.push_back(vec(t));
  AlphaTable alpha;
  for (const auto& k : all_labels) {
    if (positives.contains(k)) continue;
    auto vk = vec(k);
    double best = -1.0;
    for (const auto& vt : pos) best = std::max(best, skipgram::cosine_similarity(vt, vk));
    alpha[k] = std::clamp(1.0 - best, 0.0, 1.0);
  }
  if (missing) spdlog::warn("alpha_weights: {} label lookups missing from the embedding; treated as zero vectors", missing);
  return alpha;
}

double calibrate_p(const std::vector<AlphaTable>& tables) {
  if (tables.empty()) throw Error("calibrate_p: no alpha tables");
  double total = 0.0;
  for (const auto& t : tables) {
    for (const auto& [label, a] : t) total += a;
  }
  const double mean = total / static_cast<double>(tables.size());
  if (!(mean > 0.0)) throw Error("calibrate_p: every alpha sum is zero");
  return 1.0 / mean;
}

namespace {

std::set<std::pair<std::size_t, std::size_t>> undirected_edges(const LabelTaxonomy& tax) {
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (auto [p, c] : tax.edges()) {
    if (p != c) edges.emplace(std::min(p, c), std::max(p, c));
  }
  return edges;
}

}  // namespace

std::vector<ReconstructionPoint> reconstruct_eval(const LabelEmbedding& emb, const LabelTaxonomy& tax,
                                                  const std::vector<double>& thresholds) {
  const std::size_t L = tax.size();
  const std::vector<float> zero(emb.dim(), 0.f);
  std::vector<std::span<const float>> vecs;
  for (const auto& label : tax.labels()) {
    auto i = emb.find(label);
    vecs.push_back(i ? emb.row(*i) : std::span<const float>(zero));
  }
  const auto truth = undirected_edges(tax);
  std::vector<double> sim(L * L, 0.0);
  for (std::size_t a = 0; a < L; ++a) {
    for (std::size_t b = a + 1; b < L; ++b) sim[a * L + b] = skipgram::cosine_similarity(vecs[a], vecs[b]);
  }

  std::vector<ReconstructionPoint> out;
  for (double threshold : thresholds) {
    std::vector<metrics::LabelCounts> counts(L);
    std::size_t predicted = 0;
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = a + 1; b < L; ++b) {
        const bool is_true = truth.contains({a, b});
        const bool is_pred = sim[a * L + b] >= threshold;
        predicted += is_pred;
        if (is_pred && is_true) {
          ++counts[a].tp;
          ++counts[b].tp;
        } else if (is_pred) {
          ++counts[a].fp;
          ++counts[b].fp;
        } else if (is_true) {
          ++counts[a].fn;
          ++counts[b].fn;
        }
      }
    }
    out.push_back({threshold, metrics::micro_f1(counts), metrics::macro_f1(counts), metrics::micro_precision(counts),
                   metrics::micro_recall(counts), predicted});
  }
  return out;
}

double random_edge_baseline_f1(const LabelTaxonomy& tax) {
  const double pairs = static_cast<double>(tax.size()) * static_cast<double>(tax.size() - 1) / 2.0;
  if (pairs == 0.0) return 0.0;
  const double density = static_cast<double>(undirected_edges(tax).size()) / pairs;
  return 2.0 * density / (1.0 + density);
}

}  // namespace agcr::taxonomy
