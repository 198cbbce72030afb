#include "agcr/model/config.hpp"

#include <nlohmann/json.hpp>

#include "agcr/error.hpp"

namespace agcr::model {

namespace {

constexpr Flags make_flags(bool sorting, bool lstm, bool attn, bool capsule, bool weighted) {
  return Flags{true, sorting, lstm, attn, capsule, weighted};
}

const std::array<VariantSpec, 13> kVariants{{
    {"TGCNN(No-R)", make_flags(false, false, false, false, false)},
    {"TGCNN", make_flags(true, false, false, false, false)},
    {"TGRCNN", make_flags(true, true, false, false, false)},
    {"GCCNN", make_flags(true, false, false, true, false)},
    {"TAGRCNN", make_flags(true, false, true, false, false)},
    {"GCRCNN", make_flags(true, true, false, true, false)},
    {"AGCRCNN", make_flags(true, false, true, true, false)},
    {"HE-TGCNN", make_flags(true, false, false, false, true)},
    {"HE-TGRCNN", make_flags(true, true, false, false, true)},
    {"HE-GCCNN", make_flags(true, false, false, true, true)},
    {"HE-TAGRCNN", make_flags(true, false, true, false, true)},
    {"HE-GCRCNN", make_flags(true, true, false, true, true)},
    {"HE-AGCRCNN", make_flags(true, false, true, true, true)},
}};

const char* routing_gradient_name(nn::RoutingGradient g) {
  return g == nn::RoutingGradient::Full ? "full" : "final-iteration";
}

nn::RoutingGradient routing_gradient_from(const std::string& s) {
  if (s == "full") return nn::RoutingGradient::Full;
  if (s == "final-iteration") return nn::RoutingGradient::FinalIteration;
  throw ConfigError("unknown routing gradient mode \"" + s + "\"");
}

}  // namespace

const std::array<VariantSpec, 13>& variants() { return kVariants; }

std::optional<Flags> variant_flags(std::string_view name) {
  for (const auto& v : kVariants) {
    if (v.name == name) return v.flags;
  }
  return std::nullopt;
}

std::optional<std::string_view> variant_name(const Flags& flags) {
  for (const auto& v : kVariants) {
    if (v.flags == flags) return v.name;
  }
  return std::nullopt;
}

std::vector<std::string> flag_diff(const Flags& a, const Flags& b) {
  std::vector<std::string> out;
  if (a.cnn != b.cnn) out.emplace_back("cnn");
  if (a.sorting != b.sorting) out.emplace_back("sorting");
  if (a.lstm != b.lstm) out.emplace_back("lstm");
  if (a.attentional_lstm != b.attentional_lstm) out.emplace_back("attentional_lstm");
  if (a.capsule != b.capsule) out.emplace_back("capsule");
  if (a.weighted_margin_loss != b.weighted_margin_loss) out.emplace_back("weighted_margin_loss");
  return out;
}

std::size_t Dims::width1() const { return T < 3 ? 0 : (T - 3) / stride + 1; }
std::size_t Dims::width2() const {
  const std::size_t w1 = width1();
  return w1 < 3 ? 0 : (w1 - 3) / stride + 1;
}
std::size_t Dims::primary_width() const { return primary_kernel ? primary_kernel : width2(); }
std::size_t Dims::primary_positions() const {
  const std::size_t w2 = width2(), k = primary_width();
  return k > w2 ? 0 : w2 - k + 1;
}
std::size_t Dims::input_capsules() const { return N * primary_positions() * M; }

ModelConfig ModelConfig::for_variant(std::string_view name) {
  auto flags = variant_flags(name);
  if (!flags) throw ConfigError("unknown variant \"" + std::string(name) + "\"");
  ModelConfig cfg;
  cfg.variant = std::string(name);
  cfg.flags = *flags;
  return cfg;
}

nn::MarginLossConfig ModelConfig::margin(bool weighted) const {
  nn::MarginLossConfig m;
  m.m_plus = training.m_plus;
  m.m_minus = training.m_minus;
  m.lambda = training.lambda;
  m.p = weighted ? training.p : 1.0;
  return m;
}

void ModelConfig::validate() const {
  if (!custom) {
    auto expected = variant_flags(variant);
    if (!expected) throw ConfigError("unknown variant \"" + variant + "\" (mark the config custom to use free flags)");
    if (*expected != flags) throw ConfigError("flags do not match variant " + variant);
  }
  if (!flags.cnn) throw ConfigError("the convolution layers cannot be disabled");
  const auto& d = dims;
  if (d.stride != 1 && d.stride != 2) throw ConfigError("stride must be 1 or 2");
  if (d.N == 0 || d.D == 0 || d.k1 == 0 || d.k2 == 0) throw ConfigError("dims N, D, k1, k2 must be positive");
  if (d.width1() < 3 || d.width2() < 1) throw ConfigError("T too small for two 1x3 convolutions");
  if (label_count() == 0) throw ConfigError("no labels");
  if (!labels.empty() && d.L != 0 && d.L != labels.size()) throw ConfigError("dims.L disagrees with the label list");
  if (flags.capsule) {
    if (d.m == 0 || d.M == 0 || d.digit_dim == 0) throw ConfigError("capsule dims m, M, digit_dim must be positive");
    if (d.primary_width() == 0 || d.primary_positions() == 0) throw ConfigError("primary capsule kernel wider than the row");
    if (training.routing_iters == 0) throw ConfigError("routing iterations must be >= 1");
  }
  for (auto h : d.fc_hidden) {
    if (h == 0) throw ConfigError("fc hidden widths must be positive");
  }
  if (training.batch == 0) throw ConfigError("batch must be positive");
  if (!(training.lr > 0)) throw ConfigError("learning rate must be positive");
  if (!(training.threshold > 0 && training.threshold < 1)) throw ConfigError("threshold must be in (0, 1)");
  if (training.p < 0) throw ConfigError("p must be >= 0");
}

std::string config_to_json(const ModelConfig& cfg, int indent) {
  const auto& f = cfg.flags;
  const auto& d = cfg.dims;
  const auto& t = cfg.training;
  nlohmann::json j;
  j["variant"] = cfg.variant;
  j["custom"] = cfg.custom;
  j["flags"] = {{"cnn", f.cnn},
                {"sorting", f.sorting},
                {"lstm", f.lstm},
                {"attentional_lstm", f.attentional_lstm},
                {"capsule", f.capsule},
                {"weighted_margin_loss", f.weighted_margin_loss}};
  j["dims"] = {{"N", d.N},         {"T", d.T},
               {"D", d.D},         {"k1", d.k1},
               {"k2", d.k2},       {"m", d.m},
               {"M", d.M},         {"digit_dim", d.digit_dim},
               {"L", d.L},         {"stride", d.stride},
               {"primary_kernel", d.primary_kernel}, {"fc_hidden", d.fc_hidden}};
  j["training"] = {{"batch", t.batch},
                   {"lr", t.lr},
                   {"epochs", t.epochs},
                   {"seed", t.seed},
                   {"routing_iters", t.routing_iters},
                   {"threshold", t.threshold},
                   {"threads", t.threads},
                   {"p", t.p},
                   {"routing_gradient", routing_gradient_name(t.routing_gradient)},
                   {"m_plus", t.m_plus},
                   {"m_minus", t.m_minus},
                   {"lambda", t.lambda}};
  j["labels"] = cfg.labels;
  return j.dump(indent);
}

ModelConfig config_from_json(std::string_view text) {
  ModelConfig cfg;
  try {
    auto j = nlohmann::json::parse(text);
    auto get = [](const nlohmann::json& obj, const char* key, auto& dst) {
      if (obj.contains(key)) obj.at(key).get_to(dst);
    };
    get(j, "variant", cfg.variant);
    get(j, "custom", cfg.custom);
    if (!cfg.custom) {
      if (auto f = variant_flags(cfg.variant)) cfg.flags = *f;
    }
    if (j.contains("flags")) {
      const auto& f = j["flags"];
      get(f, "cnn", cfg.flags.cnn);
      get(f, "sorting", cfg.flags.sorting);
      get(f, "lstm", cfg.flags.lstm);
      get(f, "attentional_lstm", cfg.flags.attentional_lstm);
      get(f, "capsule", cfg.flags.capsule);
      get(f, "weighted_margin_loss", cfg.flags.weighted_margin_loss);
    }
    if (j.contains("dims")) {
      const auto& d = j["dims"];
      get(d, "N", cfg.dims.N);
      get(d, "T", cfg.dims.T);
      get(d, "D", cfg.dims.D);
      get(d, "k1", cfg.dims.k1);
      get(d, "k2", cfg.dims.k2);
      get(d, "m", cfg.dims.m);
      get(d, "M", cfg.dims.M);
      get(d, "digit_dim", cfg.dims.digit_dim);
      get(d, "L", cfg.dims.L);
      get(d, "stride", cfg.dims.stride);
      get(d, "primary_kernel", cfg.dims.primary_kernel);
      get(d, "fc_hidden", cfg.dims.fc_hidden);
    }
    if (j.contains("training")) {
      const auto& t = j["training"];
      get(t, "batch", cfg.training.batch);
      get(t, "lr", cfg.training.lr);
      get(t, "epochs", cfg.training.epochs);
      get(t, "seed", cfg.training.seed);
      get(t, "routing_iters", cfg.training.routing_iters);
      get(t, "threshold", cfg.training.threshold);
      get(t, "threads", cfg.training.threads);
      get(t, "p", cfg.training.p);
      get(t, "m_plus", cfg.training.m_plus);
      get(t, "m_minus", cfg.training.m_minus);
      get(t, "lambda", cfg.training.lambda);
      if (t.contains("routing_gradient")) {
        cfg.training.routing_gradient = routing_gradient_from(t["routing_gradient"].get<std::string>());
      }
    }
    get(j, "labels", cfg.labels);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  return cfg;
}

}  // namespace agcr::model
