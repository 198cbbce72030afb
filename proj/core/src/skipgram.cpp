#include "agcr/skipgram.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "agcr/corpus.hpp"
#include "agcr/random.hpp"

namespace agcr::skipgram {

namespace detail {
void warn_zero_vector() { spdlog::warn("cosine distance with a zero vector; using distance 1"); }
}  // namespace detail

void SkipgramConfig::validate() const {
  if (dim < 1) throw ConfigError("skip-gram dim must be >= 1");
  if (window < 1) throw ConfigError("skip-gram window must be >= 1");
  if (negatives < 1) throw ConfigError("skip-gram negatives must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("skip-gram learning rate must be > 0");
  if (threads < 1) throw ConfigError("skip-gram threads must be >= 1");
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> vocab, std::size_t dim, std::vector<float> vectors)
    : vocab_(std::move(vocab)), dim_(dim), vectors_(std::move(vectors)) {
  if (vectors_.size() != vocab_.size() * dim_) throw ShapeError("embedding table: data size mismatch");
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], i).second) throw Error("embedding table: duplicate token \"" + vocab_[i] + "\"");
  }
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

inline float sigmoid(float x) {
  if (x > 30.f) return 1.f;
  if (x < -30.f) return 0.f;
  return 1.f / (1.f + std::exp(-x));
}

inline double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

class NoiseSampler {
 public:
  explicit NoiseSampler(const std::vector<std::size_t>& counts) {
    cumulative_.reserve(counts.size());
    double acc = 0.0;
    for (auto c : counts) {
      acc += std::pow(static_cast<double>(c), 0.75);
      cumulative_.push_back(acc);
    }
  }

  std::size_t draw(Rng& rng) const {
    double x = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

struct Model {
  std::size_t dim;
  std::vector<float> in;   // token vectors (the published table)
  std::vector<float> out;  // context vectors

  float* in_row(std::size_t i) { return in.data() + i * dim; }
  float* out_row(std::size_t i) { return out.data() + i * dim; }
};

// One SGNS update for (center, context); `scratch` has length dim.
void update_pair(Model& m, std::size_t center, std::size_t context, const NoiseSampler& noise, std::size_t negatives,
                 float lr, Rng& rng, std::vector<float>& scratch) {
  const std::size_t d = m.dim;
  std::fill(scratch.begin(), scratch.end(), 0.f);
  float* u = m.in_row(center);
  for (std::size_t k = 0; k <= negatives; ++k) {
    std::size_t target;
    float label;
    if (k == 0) {
      target = context;
      label = 1.f;
    } else {
      target = noise.draw(rng);
      if (target == context) continue;
      label = 0.f;
    }
    float* v = m.out_row(target);
    float dot = 0.f;
    for (std::size_t i = 0; i < d; ++i) dot += u[i] * v[i];
    const float g = lr * (label - sigmoid(dot));
    for (std::size_t i = 0; i < d; ++i) {
      scratch[i] += g * v[i];
      v[i] += g * u[i];
    }
  }
  for (std::size_t i = 0; i < d; ++i) u[i] += scratch[i];
}

struct MonitorPair {
  std::size_t center, context;
  std::vector<std::size_t> noise;
};

double monitor_loss(Model& m, const std::vector<MonitorPair>& sample) {
  if (sample.empty()) return 0.0;
  double total = 0.0;
  auto dot = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    const float* u = m.in_row(a);
    const float* v = m.out_row(b);
    for (std::size_t i = 0; i < m.dim; ++i) s += static_cast<double>(u[i]) * v[i];
    return s;
  };
  for (const auto& p : sample) {
    total -= log_sigmoid(dot(p.center, p.context));
    for (auto n : p.noise) total -= log_sigmoid(-dot(p.center, n));
  }
  return total / static_cast<double>(sample.size());
}

// Trains over sequences [begin, end) of `encoded`. Progress feeds the linear decay.
void train_range(Model& m, const std::vector<std::vector<std::size_t>>& encoded, std::size_t begin, std::size_t end,
                 const SkipgramConfig& cfg, const NoiseSampler& noise, Rng& rng, std::size_t& processed,
                 std::size_t total_work) {
  std::vector<float> scratch(m.dim);
  const double lr0 = cfg.learning_rate;
  const double lr_min = lr0 * 1e-4;
  for (std::size_t s = begin; s < end; ++s) {
    const auto& seq = encoded[s];
    for (std::size_t i = 0; i < seq.size(); ++i) {
      double progress = total_work ? static_cast<double>(processed) / static_cast<double>(total_work) : 0.0;
      auto lr = static_cast<float>(std::max(lr_min, lr0 * (1.0 - progress)));
      const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
      const std::size_t hi = std::min(seq.size(), i + cfg.window + 1);
      for (std::size_t j = lo; j < hi; ++j) {
        if (j != i) update_pair(m, seq[i], seq[j], noise, cfg.negatives, lr, rng, scratch);
      }
      ++processed;
    }
  }
}

}  // namespace

EmbeddingTable train_skipgram(const std::vector<Sequence>& sequences, const SkipgramConfig& cfg) {
  cfg.validate();

  std::map<std::string, std::size_t> counts;
  for (const auto& seq : sequences) {
    for (const auto& tok : seq) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, c] : counts) {
    if (c >= cfg.min_count) kept.emplace_back(tok, c);
  }
  if (kept.empty()) throw Error("skip-gram: empty vocabulary after min-count filtering");
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> vocab;
  std::vector<std::size_t> freq;
  std::unordered_map<std::string, std::size_t> index;
  for (auto& [tok, c] : kept) {
    index.emplace(tok, vocab.size());
    vocab.push_back(tok);
    freq.push_back(c);
  }

  std::vector<std::vector<std::size_t>> encoded;
  std::size_t tokens_per_epoch = 0;
  for (const auto& seq : sequences) {
    std::vector<std::size_t> ids;
    for (const auto& tok : seq) {
      if (auto it = index.find(tok); it != index.end()) ids.push_back(it->second);
    }
    tokens_per_epoch += ids.size();
    if (ids.size() > 1) encoded.push_back(std::move(ids));
  }

  const std::size_t V = vocab.size();
  const std::size_t d = cfg.dim;
  Model model{d, std::vector<float>(V * d), std::vector<float>(V * d, 0.f)};
  Rng init_rng(derive_seed(cfg.seed, 0x1217));
  for (auto& x : model.in) x = static_cast<float>((init_rng.uniform() - 0.5) / static_cast<double>(d));

  NoiseSampler noise(freq);

  std::vector<MonitorPair> monitor;
  if (!encoded.empty() && cfg.monitor_pairs > 0) {
    Rng mrng(derive_seed(cfg.seed, 0x303));
    for (std::size_t k = 0; k < cfg.monitor_pairs; ++k) {
      const auto& seq = encoded[mrng.below(encoded.size())];
      std::size_t i = mrng.below(seq.size());
      const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
      const std::size_t hi = std::min(seq.size(), i + cfg.window + 1);
      std::size_t j = lo + mrng.below(hi - lo - 1);
      if (j >= i) ++j;
      MonitorPair p{seq[i], seq[j], {}};
      for (std::size_t n = 0; n < cfg.negatives; ++n) {
        auto t = noise.draw(mrng);
        if (t != p.context) p.noise.push_back(t);
      }
      monitor.push_back(std::move(p));
    }
  }

  EmbeddingTable table;
  std::vector<double> losses;
  const std::size_t total_work = tokens_per_epoch * cfg.epochs;
  std::size_t processed = 0;
  Rng rng(derive_seed(cfg.seed, 0x5eed));

  for (std::size_t epoch = 0; epoch < cfg.epochs && !encoded.empty(); ++epoch) {
    const std::size_t workers = std::min(cfg.threads, encoded.size());
    if (workers <= 1) {
      train_range(model, encoded, 0, encoded.size(), cfg, noise, rng, processed, total_work);
    } else {
      // Each shard trains on a private copy; deltas are summed after the epoch.
      std::vector<Model> local(workers, model);
      std::vector<std::size_t> local_processed(workers, processed);
      std::vector<std::thread> pool;
      const std::size_t chunk = (encoded.size() + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          Rng wrng(derive_seed(derive_seed(cfg.seed, epoch), w + 1));
          std::size_t b = w * chunk, e = std::min(encoded.size(), b + chunk);
          train_range(local[w], encoded, b, e, cfg, noise, wrng, local_processed[w], total_work);
        });
      }
      for (auto& t : pool) t.join();
      Model merged = model;
      for (std::size_t w = 0; w < workers; ++w) {
        for (std::size_t i = 0; i < merged.in.size(); ++i) {
          merged.in[i] += local[w].in[i] - model.in[i];
          merged.out[i] += local[w].out[i] - model.out[i];
        }
      }
      model = std::move(merged);
      processed += tokens_per_epoch;
    }
    losses.push_back(monitor_loss(model, monitor));
  }

  table = EmbeddingTable(std::move(vocab), d, std::move(model.in));
  table.metadata = {cfg.seed, cfg.epochs, cfg.window, cfg.negatives};
  table.epoch_loss = std::move(losses);
  for (float x : table.data()) {
    if (!std::isfinite(x)) throw NonFiniteError("skip-gram produced a non-finite embedding");
  }
  return table;
}

EmbeddingTable parse_embeddings(std::string_view content, const std::string& source) {
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  std::size_t count = 0, dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream header(line);
    if (!(header >> count >> dim) || dim == 0) throw ParseError(source, line_no, "expected header \"vocab_size dim\"");
    break;
  }
  if (dim == 0) throw ParseError(source, line_no, "missing header");
  std::vector<std::string> vocab;
  std::vector<float> data;
  vocab.reserve(count);
  data.reserve(count * dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (pos < line.size()) {
      std::size_t start = line.find_first_not_of(' ', pos);
      if (start == std::string::npos) break;
      std::size_t end = line.find(' ', start);
      if (end == std::string::npos) end = line.size();
      fields.emplace_back(line.substr(start, end - start));
      pos = end;
    }
    if (fields.size() != dim + 1) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(dim) + " values, got " + std::to_string(fields.size() - 1));
    }
    vocab.push_back(fields[0]);
    for (std::size_t k = 1; k <= dim; ++k) {
      const auto& f = fields[k];
      float v = 0.f;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) throw ParseError(source, line_no, "bad number \"" + f + "\"");
      data.push_back(v);
    }
  }
  if (vocab.size() != count) {
    throw ParseError(source, line_no,
                     "header declares " + std::to_string(count) + " rows, found " + std::to_string(vocab.size()));
  }
  return EmbeddingTable(std::move(vocab), dim, std::move(data));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(corpus::read_file(path), path.string());
}

std::string format_embeddings(const EmbeddingTable& table) {
  std::string out = std::to_string(table.size()) + " " + std::to_string(table.dim()) + "\n";
  char buf[64];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += table.vocab()[i];
    for (float v : table.row(i)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out += ' ';
      out.append(buf, ptr);
    }
    out += '\n';
  }
  return out;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << format_embeddings(table);
}

}  // namespace agcr::skipgram
