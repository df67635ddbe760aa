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

#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "gebd/common.hpp"

namespace gebd {

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  GEBD_CHECK_IO(in.good(), "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::io_error, "failed to parse " + path + ": " + e.what());
  }
  return j;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  GEBD_CHECK_IO(out.good(), "cannot write " + path);
  out << j.dump(2) << "\n";
  GEBD_CHECK_IO(out.good(), "failed while writing " + path);
}

}  // namespace gebd
