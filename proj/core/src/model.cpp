// Copyright 2026 The sedkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "sedkit/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sedkit/errors.hpp"
#include "sedkit/rng.hpp"

namespace sedkit {
namespace {

// Parameter layout. Indices into ModelParams::tensors are derived from the
// config, so forward() and init() must enumerate in the same order.
struct Layout {
  std::size_t conv_begin = 0;  // 2 per conv layer: weight, bias
  std::size_t gru_begin = 0;   // 8 if enabled: fwd w_ih,w_hh,b_ih,b_hh, bwd...
  std::size_t fc = 0;          // weight, bias
  std::size_t event = 0;
  std::size_t sad = 0;
  std::size_t asc = 0;
};

Layout layout_of(const ModelConfig& cfg) {
  Layout l;
  std::size_t i = 2 * cfg.conv_channels.size();
  l.gru_begin = i;
  if (cfg.enable_gru) i += 8;
  l.fc = i;
  i += 2;
  l.event = i;
  i += 2;
  l.sad = i;
  if (cfg.enable_sad_head) i += 2;
  l.asc = i;
  return l;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

RealMatrix to_matrix(const ad::Tensor& t) {
  const auto& s = t.shape();
  return RealMatrix(s[0], s[1], std::vector<double>(t.values().begin(),
                                                    t.values().end()));
}

}  // namespace

void ModelConfig::validate() const {
  const auto positive = [](std::size_t v, const char* what) {
    if (v < 1) throw ConfigError(std::string("model.") + what + " must be >= 1");
  };
  positive(n_mels, "n_mels");
  positive(kernel, "kernel");
  positive(fc_units, "fc_units");
  positive(n_events, "n_events");
  if (enable_gru) positive(gru_units, "gru_units");
  if (enable_asc_head) positive(n_scenes, "n_scenes");
  if (kernel % 2 == 0 || kernel > 7) throw ConfigError("model.kernel must be 1, 3, 5 or 7");
  if (conv_channels.empty()) throw ConfigError("model.conv_channels is empty");
  if (pools.size() != conv_channels.size()) {
    throw ConfigError("model.pools needs one entry per conv layer (" +
                      std::to_string(conv_channels.size()) + ")");
  }
  for (const auto c : conv_channels) positive(c, "conv_channels entries");
  std::size_t freq = n_mels;
  for (const auto p : pools) {
    positive(p, "pools entries");
    if (freq % p != 0) {
      throw ConfigError("model.pools: product of pooling factors must divide "
                        "n_mels = " + std::to_string(n_mels));
    }
    freq /= p;
  }
}

std::size_t ModelConfig::rnn_input_width() const {
  std::size_t freq = n_mels;
  for (const auto p : pools) freq /= p;
  return conv_channels.back() * freq;
}

void ModelConfig::write(KeyValues& kv) const {
  kv.set("model.n_mels", std::to_string(n_mels));
  kv.set("model.conv_channels", join_sizes(conv_channels));
  kv.set("model.kernel", std::to_string(kernel));
  kv.set("model.pools", join_sizes(pools));
  kv.set("model.enable_gru", enable_gru ? "true" : "false");
  kv.set("model.gru_units", std::to_string(gru_units));
  kv.set("model.fc_units", std::to_string(fc_units));
  kv.set("model.n_events", std::to_string(n_events));
  kv.set("model.enable_sad_head", enable_sad_head ? "true" : "false");
  kv.set("model.enable_asc_head", enable_asc_head ? "true" : "false");
  kv.set("model.n_scenes", std::to_string(n_scenes));
}

ModelConfig ModelConfig::read(KeyValues& kv) { return read(kv, ModelConfig{}); }

ModelConfig ModelConfig::read(KeyValues& kv, const ModelConfig& defaults) {
  ModelConfig c = defaults;
  if (auto v = kv.take_size("model.n_mels")) c.n_mels = *v;
  if (auto v = kv.take_size_list("model.conv_channels")) c.conv_channels = *v;
  if (auto v = kv.take_size("model.kernel")) c.kernel = *v;
  if (auto v = kv.take_size_list("model.pools")) c.pools = *v;
  if (auto v = kv.take_bool("model.enable_gru")) c.enable_gru = *v;
  if (auto v = kv.take_size("model.gru_units")) c.gru_units = *v;
  if (auto v = kv.take_size("model.fc_units")) c.fc_units = *v;
  if (auto v = kv.take_size("model.n_events")) c.n_events = *v;
  if (auto v = kv.take_bool("model.enable_sad_head")) c.enable_sad_head = *v;
  if (auto v = kv.take_bool("model.enable_asc_head")) c.enable_asc_head = *v;
  if (auto v = kv.take_size("model.n_scenes")) c.n_scenes = *v;
  return c;
}

const NamedTensor& ModelParams::at(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw DataError("model has no tensor named '" + std::string(name) + "'");
}

NamedTensor& ModelParams::at(std::string_view name) {
  return const_cast<NamedTensor&>(std::as_const(*this).at(name));
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

ModelParams init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams params{config, seed, {}};
  auto add = [&](std::string name, ad::Shape shape, std::size_t fan_in,
                 std::size_t fan_out, bool bias) {
    NamedTensor t{std::move(name), shape, std::vector<double>(ad::numel(shape), 0.0)};
    if (!bias) {
      Rng rng = make_rng(seed, params.tensors.size());
      const double limit =
          std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& v : t.values) v = uniform(rng, -limit, limit);
    }
    params.tensors.push_back(std::move(t));
  };

  const std::size_t k = config.kernel;
  std::size_t in_ch = 1;
  for (std::size_t i = 0; i < config.conv_channels.size(); ++i) {
    const std::size_t out_ch = config.conv_channels[i];
    const std::string prefix = "conv" + std::to_string(i);
    add(prefix + ".weight", {out_ch, in_ch, k, k}, in_ch * k * k, out_ch * k * k,
        false);
    add(prefix + ".bias", {out_ch}, 0, 0, true);
    in_ch = out_ch;
  }
  std::size_t width = config.rnn_input_width();
  if (config.enable_gru) {
    const std::size_t h = config.gru_units;
    for (const char* dir : {"gru.fwd", "gru.bwd"}) {
      const std::string p(dir);
      add(p + ".w_ih", {width, 3 * h}, width, 3 * h, false);
      add(p + ".w_hh", {h, 3 * h}, h, 3 * h, false);
      add(p + ".b_ih", {3 * h}, 0, 0, true);
      add(p + ".b_hh", {3 * h}, 0, 0, true);
    }
    width = 2 * h;
  }
  add("fc.weight", {width, config.fc_units}, width, config.fc_units, false);
  add("fc.bias", {config.fc_units}, 0, 0, true);
  add("event.weight", {config.fc_units, config.n_events}, config.fc_units,
      config.n_events, false);
  add("event.bias", {config.n_events}, 0, 0, true);
  if (config.enable_sad_head) {
    add("sad.weight", {config.fc_units, 1}, config.fc_units, 1, false);
    add("sad.bias", {1}, 0, 0, true);
  }
  if (config.enable_asc_head) {
    add("asc.weight", {config.fc_units, config.n_scenes}, config.fc_units,
        config.n_scenes, false);
    add("asc.bias", {config.n_scenes}, 0, 0, true);
  }
  return params;
}

BoundModel::BoundModel(ad::Tape& tape, const ModelParams& params, bool trainable)
    : tape_(&tape), config_(&params.config) {
  bound_.reserve(params.tensors.size());
  for (const auto& t : params.tensors) {
    bound_.push_back(trainable ? tape.variable(t.shape, t.values)
                               : tape.constant(t.shape, t.values));
  }
}

BoundModel::BoundModel(ad::Tape& tape, const ModelConfig& config,
                       std::vector<ad::Tensor> tensors)
    : tape_(&tape), config_(&config), bound_(std::move(tensors)) {
  const ModelParams ref = init(config, 0);
  if (bound_.size() != ref.tensors.size()) {
    throw std::invalid_argument("BoundModel: expected " +
                                std::to_string(ref.tensors.size()) + " tensors, got " +
                                std::to_string(bound_.size()));
  }
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    if (bound_[i].shape() != ref.tensors[i].shape) {
      throw std::invalid_argument("BoundModel: " + ref.tensors[i].name + " has shape " +
                                  ad::shape_str(bound_[i].shape()) + ", expected " +
                                  ad::shape_str(ref.tensors[i].shape));
    }
  }
}

GraphOutputs BoundModel::forward(const FeatureMatrix& x) const {
  const ModelConfig& cfg = *config_;
  if (x.n_bands() != cfg.n_mels) {
    throw DataError("model expects " + std::to_string(cfg.n_mels) +
                    " bands, features have " + std::to_string(x.n_bands()));
  }
  if (x.n_frames() == 0) throw DataError("model input has zero frames");
  const Layout lay = layout_of(cfg);
  const std::size_t steps = x.n_frames();

  ad::Tensor h = tape_->constant({steps, cfg.n_mels}, x.values.data());
  h = ad::reshape(ad::transpose(h), {1, cfg.n_mels, steps});
  std::size_t freq = cfg.n_mels;
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    h = ad::conv2d(h, get(lay.conv_begin + 2 * i), get(lay.conv_begin + 2 * i + 1));
    h = ad::relu(h);
    h = ad::maxpool2d(h, cfg.pools[i], 1);
    freq /= cfg.pools[i];
  }
  ad::Tensor seq = ad::transpose(
      ad::reshape(h, {cfg.conv_channels.back() * freq, steps}));  // [T x D]

  if (cfg.enable_gru) {
    const std::size_t g = lay.gru_begin;
    const ad::Tensor fwd = ad::gru(seq, get(g), get(g + 1), get(g + 2), get(g + 3), false);
    const ad::Tensor bwd =
        ad::gru(seq, get(g + 4), get(g + 5), get(g + 6), get(g + 7), true);
    seq = ad::concat({fwd, bwd}, 1);
  }

  const ad::Tensor fc =
      ad::relu(ad::add(ad::matmul(seq, get(lay.fc)), get(lay.fc + 1)));
  GraphOutputs out;
  out.events = ad::transpose(
      ad::add(ad::matmul(fc, get(lay.event)), get(lay.event + 1)));
  if (cfg.enable_sad_head) {
    out.sad = ad::transpose(
        ad::add(ad::matmul(fc, get(lay.sad)), get(lay.sad + 1)));
  }
  if (cfg.enable_asc_head) {
    const ad::Tensor pooled = ad::reshape(ad::mean(fc, 0), {1, cfg.fc_units});
    out.asc = ad::reshape(
        ad::add(ad::matmul(pooled, get(lay.asc)), get(lay.asc + 1)),
        {cfg.n_scenes});
  }
  return out;
}

FrameLogits forward(const ModelParams& params, const FeatureMatrix& x) {
  ad::Tape tape;
  const BoundModel model(tape, params, false);
  const GraphOutputs g = model.forward(x);
  FrameLogits out;
  out.y = to_matrix(g.events);
  if (g.sad) out.sad = to_matrix(*g.sad);
  if (g.asc) out.asc = std::vector<double>(g.asc->values().begin(), g.asc->values().end());
  return out;
}

BinaryMatrix predict(const RealMatrix& logits, double threshold) {
  BinaryMatrix out(logits.rows(), logits.cols(), 0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.data()[i] = sigmoid(logits.data()[i]) > threshold ? 1 : 0;
  }
  return out;
}

}  // namespace sedkit
