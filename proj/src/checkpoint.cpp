// Copyright 2026 The gebdkit Authors
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

#include "gebd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "gebd/common.hpp"

namespace gebd::ckpt {

using nlohmann::json;

namespace {

constexpr int kVersion = 1;
constexpr size_t kMagicLen = sizeof(kCheckpointMagic) - 1;  // excluding NUL
constexpr uint64_t kMaxHeaderBytes = uint64_t{1} << 30;

void write_u64_le(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void Checkpoint::add(const std::string& name, Tensor t) {
  GEBD_CHECK_ARG(!has(name), "duplicate checkpoint tensor: " + name);
  tensors.emplace_back(name, std::move(t));
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return true;
  return false;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw Error(ErrorCode::invalid_argument, "checkpoint tensor not found: " + name);
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  json header;
  header["version"] = kVersion;
  header["meta"] = c.meta;
  json entries = json::array();
  int64_t offset = 0;
  for (const auto& [name, t] : c.tensors) {
    json e;
    e["name"] = name;
    e["shape"] = t.shape();
    e["offset"] = offset;
    entries.push_back(e);
    offset += t.numel();
  }
  header["tensors"] = entries;
  std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  GEBD_CHECK_IO(out.good(), "cannot write " + path);
  out.write(kCheckpointMagic, static_cast<std::streamsize>(kMagicLen));
  out.put('\n');
  write_u64_le(out, head.size());
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& [name, t] : c.tensors)
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  GEBD_CHECK_IO(out.good(), "failed while writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  GEBD_CHECK_IO(in.good(), "cannot open " + path);

  char magic[kMagicLen + 1];
  in.read(magic, static_cast<std::streamsize>(kMagicLen + 1));
  GEBD_CHECK_IO(in.gcount() == static_cast<std::streamsize>(kMagicLen + 1) &&
                    std::memcmp(magic, kCheckpointMagic, kMagicLen) == 0 &&
                    magic[kMagicLen] == '\n',
                path + ": not a checkpoint file (bad magic)");

  uint64_t head_len = read_u64_le(in);
  GEBD_CHECK_IO(in.good() && head_len > 0 && head_len < kMaxHeaderBytes,
                path + ": corrupt header length");
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  GEBD_CHECK_IO(in.gcount() == static_cast<std::streamsize>(head_len),
                path + ": truncated header");

  json header;
  try {
    header = json::parse(head);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::io_error, path + ": header parse failure: " + e.what());
  }
  GEBD_CHECK_IO(header.contains("version") && header["version"].is_number_integer(),
                path + ": header missing version");
  GEBD_CHECK_IO(header["version"].get<int>() == kVersion,
                path + ": unsupported checkpoint version " + header["version"].dump());
  GEBD_CHECK_IO(header.contains("tensors") && header["tensors"].is_array(),
                path + ": header missing tensor table");

  Checkpoint c;
  c.meta = header.value("meta", json::object());
  int64_t expect_offset = 0;
  for (const auto& e : header["tensors"]) {
    GEBD_CHECK_IO(e.contains("name") && e.contains("shape") && e.contains("offset"),
                  path + ": malformed tensor entry");
    std::string name = e["name"].get<std::string>();
    Shape shape = e["shape"].get<Shape>();
    int64_t offset = e["offset"].get<int64_t>();
    GEBD_CHECK_IO(offset == expect_offset, path + ": non-contiguous offset for " + name);
    int64_t count = 1;
    for (int64_t d : shape) {
      GEBD_CHECK_IO(d >= 0 && d <= (int64_t{1} << 32), path + ": bad shape for " + name);
      count *= d;
      GEBD_CHECK_IO(count <= (int64_t{1} << 37), path + ": oversized tensor " + name);
    }
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    GEBD_CHECK_IO(in.gcount() == static_cast<std::streamsize>(t.numel() * sizeof(double)),
                  path + ": truncated payload at " + name);
    expect_offset += t.numel();
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  in.peek();
  GEBD_CHECK_IO(in.eof(), path + ": trailing bytes after payload");
  return c;
}

json encoder_config_to_json(const enc::EncoderConfig& c) {
  json j;
  j["variant"] = c.variant == enc::Variant::full ? "full" : "tiny";
  j["input_side"] = c.input_side;
  j["stem_channels"] = c.stem_channels;
  j["channels_per_stage"] = c.channels_per_stage;
  j["blocks_per_stage"] = c.blocks_per_stage;
  j["ms_after_stage"] = c.ms_after_stage;
  j["tsm_shift_fraction"] = c.tsm_shift_fraction;
  j["temporal_modules_enabled_default"] = c.temporal_modules_enabled_default;
  j["feature_dim"] = c.feature_dim;
  j["embedding_dim"] = c.embedding_dim;
  j["segments"] = c.segments;
  j["ms_l"] = c.ms.l;
  j["ms_softmax_temperature"] = c.ms.softmax_temperature;
  j["ms_kernel_sigma"] = c.ms.kernel_sigma;
  return j;
}

enc::EncoderConfig encoder_config_from_json(const json& j) {
  enc::EncoderConfig c;
  std::string variant = j.at("variant").get<std::string>();
  GEBD_CHECK_IO(variant == "full" || variant == "tiny", "unknown encoder variant " + variant);
  c.variant = variant == "full" ? enc::Variant::full : enc::Variant::tiny;
  c.input_side = j.at("input_side").get<int>();
  c.stem_channels = j.at("stem_channels").get<int64_t>();
  c.channels_per_stage = j.at("channels_per_stage").get<std::vector<int64_t>>();
  c.blocks_per_stage = j.at("blocks_per_stage").get<std::vector<int>>();
  c.ms_after_stage = j.at("ms_after_stage").get<int>();
  c.tsm_shift_fraction = j.at("tsm_shift_fraction").get<double>();
  c.temporal_modules_enabled_default = j.at("temporal_modules_enabled_default").get<bool>();
  c.feature_dim = j.at("feature_dim").get<int64_t>();
  c.embedding_dim = j.at("embedding_dim").get<int64_t>();
  c.segments = j.at("segments").get<int>();
  c.ms.l = j.at("ms_l").get<int>();
  c.ms.softmax_temperature = j.at("ms_softmax_temperature").get<double>();
  c.ms.kernel_sigma = j.at("ms_kernel_sigma").get<double>();
  c.validate();
  return c;
}

void put_store(Checkpoint& c, const std::string& prefix, const nn::ParamStore& store) {
  for (const auto& [name, v] : store.entries()) c.add(prefix + "." + name, v.val());
}

void read_store(const Checkpoint& c, const std::string& prefix, const nn::ParamStore& store) {
  for (const auto& [name, v] : store.entries()) {
    std::string key = prefix + "." + name;
    GEBD_CHECK_ARG(c.has(key), "checkpoint missing parameter " + key);
    const Tensor& t = c.get(key);
    GEBD_CHECK_ARG(t.same_shape(v.val()), "checkpoint shape mismatch for " + key);
    v.mutable_value() = t;
  }
}

void put_optimizer(Checkpoint& c, const nn::SgdOptimizer& opt) {
  const auto& names = opt.names();
  const auto& velocity = opt.velocity();
  for (size_t i = 0; i < names.size(); ++i) c.add("opt.velocity." + names[i], velocity[i]);
  c.meta["optimizer"] = json{{"step", opt.step_count()}};
}

void read_optimizer(const Checkpoint& c, nn::SgdOptimizer& opt) {
  const auto& names = opt.names();
  auto& velocity = opt.velocity();
  for (size_t i = 0; i < names.size(); ++i) {
    std::string key = "opt.velocity." + names[i];
    GEBD_CHECK_ARG(c.has(key), "checkpoint missing optimizer state " + key);
    const Tensor& t = c.get(key);
    GEBD_CHECK_ARG(t.same_shape(velocity[i]), "checkpoint shape mismatch for " + key);
    velocity[i] = t;
  }
  GEBD_CHECK_ARG(c.meta.contains("optimizer") && c.meta["optimizer"].contains("step"),
                 "checkpoint missing optimizer step");
  opt.set_step(c.meta["optimizer"]["step"].get<int64_t>());
}

Checkpoint make_encoder_checkpoint(const enc::DualEncoder& dual) {
  Checkpoint c;
  c.meta["config"] = encoder_config_to_json(dual.config());
  c.meta["momentum"] = dual.momentum();
  put_store(c, "query", dual.query_params());
  put_store(c, "key", dual.key_params());
  return c;
}

void restore_encoder(const Checkpoint& c, enc::DualEncoder& dual) {
  GEBD_CHECK_ARG(c.meta.contains("config"), "checkpoint missing encoder config");
  enc::EncoderConfig stored = encoder_config_from_json(c.meta["config"]);
  json want = encoder_config_to_json(dual.config());
  GEBD_CHECK_ARG(encoder_config_to_json(stored) == want,
                 "checkpoint encoder config does not match the target encoder");
  read_store(c, "query", dual.query_params());
  read_store(c, "key", dual.key_params());
  if (c.meta.contains("momentum")) dual.set_momentum(c.meta["momentum"].get<double>());
}

}  // namespace gebd::ckpt
