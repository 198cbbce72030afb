#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "agcr/metrics.hpp"
#include "agcr/model/config.hpp"
#include "agcr/model/network.hpp"
#include "agcr/nn/optim.hpp"
#include "agcr/taxonomy.hpp"
#include "agcr/wordvec.hpp"

namespace agcr::model {

struct Example {
  wordvec::DocTensor doc;
  std::set<std::string> labels;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;      ///< mean per-document loss
  double micro_f1 = 0.0;  ///< from the forward passes of the epoch
  double macro_f1 = 0.0;
  double seconds = 0.0;
};

/// One JSON Lines record {epoch, loss, micro_f1, macro_f1, seconds}.
std::string epoch_log_json(const EpochLog& log);

struct Checkpoint {
  ModelConfig config;
  nn::LayerParams<float> params;
  std::uint64_t optimizer_steps = 0;
  std::map<std::string, nn::AdamMoments<float>> moments;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::string_view kCheckpointMagic = "AGCR";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "AGCR" | u32 version | u64 JSON length | JSON metadata (config, tensor
/// directory, optimizer, epoch, seed) | f32 tensors in directory order.
/// Adam moments are stored as tensors "adam.m:<param>" / "adam.v:<param>".
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes, const std::string& source = "<checkpoint>");
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Network<float> network_from(const Checkpoint& ckpt);

/// 0/1 per configured label; unknown labels throw.
std::vector<float> label_targets(const ModelConfig& cfg, const std::set<std::string>& labels);
/// Per-label alpha (0 at positives).
std::vector<float> alpha_vector(const ModelConfig& cfg, const taxonomy::AlphaTable& table);

struct TrainOptions {
  /// Required by the weighted margin loss.
  const taxonomy::LabelEmbedding* label_embedding = nullptr;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> history;
};

/// Mini-batch Adam. Serial (threads = 1) runs are bit-reproducible for a
/// given seed; with more threads each batch is split into contiguous chunks
/// whose gradients are merged in chunk order.
TrainResult train(const std::vector<Example>& data, ModelConfig cfg, const TrainOptions& opts = {});

struct DocPrediction {
  std::string doc_id;
  std::vector<float> scores;
  std::set<std::size_t> labels;
};

/// Unseen attention rows are initialized to ones.
DocPrediction predict_doc(Network<float>& net, const wordvec::DocTensor& doc, double threshold);
std::vector<DocPrediction> predict_docs(Network<float>& net, const std::vector<wordvec::DocTensor>& docs,
                                        double threshold, std::size_t threads = 1);

struct EvalReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double threshold = 0.5;
  std::vector<std::string> labels;
  std::vector<metrics::LabelCounts> counts;
};

EvalReport evaluate(const std::vector<DocPrediction>& predictions, const std::vector<std::set<std::string>>& truth,
                    const ModelConfig& cfg, double threshold);
/// {micro_f1, macro_f1, per_label:[{label,tp,fp,fn,f1}], threshold}
std::string metrics_json(const EvalReport& report);
std::string metrics_table(const EvalReport& report);

struct AttentionEntry {
  std::string doc_id;
  std::size_t row = 0;
  int layer = 0;
  int block = 0;
  double alpha = 0.0;
};

/// Attention scalars used for every non-empty row of `doc` in both layers.
/// Throws ConfigError when the network has no attentional LSTM.
std::vector<AttentionEntry> collect_attention(Network<float>& net, const wordvec::DocTensor& doc);
void write_attention_csv(std::ostream& out, const std::vector<AttentionEntry>& entries);
void write_lengths_csv(std::ostream& out, const std::vector<DocPrediction>& preds, const std::vector<std::string>& labels);

/// Shortest round-trip decimal form, used for every number written to CSV.
std::string format_number(double v);

}  // namespace agcr::model
