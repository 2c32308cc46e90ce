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
#include "sedkit/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "sedkit/errors.hpp"

namespace sedkit {
namespace {

constexpr char kMagic[8] = {'S', 'E', 'D', 'K', 'C', 'K', 'P', 'T'};

void write_tensor(std::ostream& os, const NamedTensor& t) {
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
  os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
  for (const auto d : t.shape) detail::write_le<std::uint64_t>(os, d);
  for (const double v : t.values) detail::write_le<double>(os, v);
}

NamedTensor read_tensor(std::istream& is, const char* ctx) {
  NamedTensor t;
  const auto name_len = detail::read_le<std::uint32_t>(is, ctx);
  if (name_len > 4096) throw DataError(std::string(ctx) + ": bad tensor name");
  t.name.resize(name_len);
  is.read(t.name.data(), name_len);
  const auto ndim = detail::read_le<std::uint32_t>(is, ctx);
  if (ndim > 8) throw DataError(std::string(ctx) + ": bad tensor rank");
  for (std::uint32_t i = 0; i < ndim; ++i) {
    t.shape.push_back(detail::read_le<std::uint64_t>(is, ctx));
  }
  const std::size_t n = ad::numel(t.shape);
  if (n > (std::size_t{1} << 32)) throw DataError(std::string(ctx) + ": tensor too large");
  t.values.resize(n);
  for (auto& v : t.values) {
    v = detail::read_le<double>(is, ctx);
    if (!std::isfinite(v)) {
      throw DataError(std::string(ctx) + ": non-finite value in " + t.name);
    }
  }
  return t;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  KeyValues header;
  header.set("format", "sedkit-checkpoint");
  header.set("seed", std::to_string(ckpt.params.seed));
  ckpt.params.config.write(header);
  for (std::size_t i = 0; i < ckpt.event_labels.size(); ++i) {
    header.set("labels.event." + std::to_string(i), ckpt.event_labels[i]);
  }
  for (std::size_t i = 0; i < ckpt.scene_labels.size(); ++i) {
    header.set("labels.scene." + std::to_string(i), ckpt.scene_labels[i]);
  }
  header.set("labels.event.count", std::to_string(ckpt.event_labels.size()));
  header.set("labels.scene.count", std::to_string(ckpt.scene_labels.size()));
  const std::string text = header.to_text();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  detail::write_le<std::uint32_t>(os, kCheckpointVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));

  const bool norm = !ckpt.normalizer.empty();
  detail::write_le<std::uint32_t>(
      os, static_cast<std::uint32_t>(ckpt.params.tensors.size() + (norm ? 2 : 0)));
  for (const auto& t : ckpt.params.tensors) write_tensor(os, t);
  if (norm) {
    const std::size_t bands = ckpt.normalizer.mean.size();
    write_tensor(os, {"norm.mean", {bands}, ckpt.normalizer.mean});
    write_tensor(os, {"norm.std", {bands}, ckpt.normalizer.stddev});
  }
  if (!os) throw DataError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const ModelConfig* expected) {
  const std::string ctx_s = path.string();
  const char* ctx = ctx_s.c_str();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + ctx_s);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || !std::equal(magic, magic + 8, kMagic)) {
    throw DataError(ctx_s + ": not a sedkit checkpoint");
  }
  const auto version = detail::read_le<std::uint32_t>(is, ctx);
  if (version != kCheckpointVersion) {
    throw DataError(ctx_s + ": unsupported checkpoint version " +
                    std::to_string(version));
  }
  const auto header_len = detail::read_le<std::uint32_t>(is, ctx);
  std::string text(header_len, '\0');
  is.read(text.data(), header_len);
  if (!is) throw DataError(ctx_s + ": truncated header");

  KeyValues header;
  try {
    header = KeyValues::parse(text);
  } catch (const ConfigError& e) {
    throw DataError(ctx_s + ": bad header: " + e.what());
  }
  Checkpoint ckpt;
  if (header.take_string("format").value_or("") != "sedkit-checkpoint") {
    throw DataError(ctx_s + ": missing format tag");
  }
  const auto seed = header.take_string("seed");
  if (!seed) throw DataError(ctx_s + ": missing seed");
  ckpt.params.seed = std::stoull(*seed);
  ckpt.params.config = ModelConfig::read(header);
  const auto n_events = header.take_size("labels.event.count").value_or(0);
  const auto n_scenes = header.take_size("labels.scene.count").value_or(0);
  for (std::size_t i = 0; i < n_events; ++i) {
    const auto l = header.take_string("labels.event." + std::to_string(i));
    if (!l) throw DataError(ctx_s + ": missing event label " + std::to_string(i));
    ckpt.event_labels.push_back(*l);
  }
  for (std::size_t i = 0; i < n_scenes; ++i) {
    const auto l = header.take_string("labels.scene." + std::to_string(i));
    if (!l) throw DataError(ctx_s + ": missing scene label " + std::to_string(i));
    ckpt.scene_labels.push_back(*l);
  }
  try {
    header.finish();
    ckpt.params.config.validate();
  } catch (const ConfigError& e) {
    throw DataError(ctx_s + ": " + e.what());
  }

  if (expected && !(*expected == ckpt.params.config)) {
    KeyValues want, have;
    expected->write(want);
    ckpt.params.config.write(have);
    std::string diff;
    for (const auto& [k, v] : want.entries()) {
      const auto& hv = have.entries().at(k);
      if (hv != v) diff += " " + k + " (checkpoint " + hv + ", expected " + v + ")";
    }
    throw ConfigError(ctx_s + ": checkpoint config mismatch:" + diff);
  }

  const ModelParams layout = init(ckpt.params.config, 0);
  const auto count = detail::read_le<std::uint32_t>(is, ctx);
  std::vector<NamedTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) tensors.push_back(read_tensor(is, ctx));
  std::size_t i = 0;
  for (const auto& want : layout.tensors) {
    if (i >= tensors.size() || tensors[i].name != want.name ||
        tensors[i].shape != want.shape) {
      throw DataError(ctx_s + ": tensor layout does not match config at '" +
                      want.name + "'");
    }
    ckpt.params.tensors.push_back(std::move(tensors[i++]));
  }
  if (i < tensors.size()) {
    if (tensors.size() - i != 2 || tensors[i].name != "norm.mean" ||
        tensors[i + 1].name != "norm.std" ||
        tensors[i].values.size() != tensors[i + 1].values.size()) {
      throw DataError(ctx_s + ": unexpected trailing tensors");
    }
    ckpt.normalizer.mean = std::move(tensors[i].values);
    ckpt.normalizer.stddev = std::move(tensors[i + 1].values);
  }
  return ckpt;
}

}  // namespace sedkit
