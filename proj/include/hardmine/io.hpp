/*
 * Copyright 2026 The hardmine Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hardmine/dataset.hpp"
#include "hardmine/detector.hpp"
#include "hardmine/evaluation.hpp"
#include "hardmine/trainer.hpp"

namespace hardmine {

// File formats:
//   dataset      directory of binary PGM frames + groundtruth.jsonl
//   ground truth one JSON object per line: {"frame":N} or
//                {"frame":N,"box":[x1,y1,x2,y2]}
//   detections   one JSON object per line:
//                {"frame":N,"box":[x1,y1,x2,y2],"confidence":c}
//   model        one-line JSON header, then the raw little-endian
//                float64 parameter vector
// All writers are deterministic: identical inputs produce identical bytes.

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  return f;
}

inline std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw DataError("cannot open for reading: " + path.string());
  return f;
}

inline std::string frame_file_name(std::int64_t frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06lld.pgm",
                static_cast<long long>(frame_id));
  return buf;
}

inline nlohmann::json box_to_json(const Box& b) {
  return nlohmann::json::array({b.x1, b.y1, b.x2, b.y2});
}

inline Box box_from_json(const nlohmann::json& j, const char* where) {
  if (!j.is_array() || j.size() != 4)
    throw DataError(std::string(where) + ": box must be [x1,y1,x2,y2]");
  return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
             j[3].get<double>()};
}

}  // namespace detail

inline void write_pgm(const std::filesystem::path& path, int size,
                      const std::vector<std::uint8_t>& pixels) {
  auto f = detail::open_out(path, true);
  f << "P5\n" << size << " " << size << "\n255\n";
  f.write(reinterpret_cast<const char*>(pixels.data()),
          static_cast<std::streamsize>(pixels.size()));
}

struct PgmImage {
  int size = 0;  // square
  std::vector<std::uint8_t> pixels;
};

inline PgmImage read_pgm(const std::filesystem::path& path) {
  auto f = detail::open_in(path, true);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255)
    throw DataError("read_pgm: unsupported format in " + path.string());
  if (w != h || w <= 0)
    throw DataError("read_pgm: expected a square image in " + path.string());
  f.get();  // single whitespace after the header
  PgmImage img;
  img.size = w;
  img.pixels.resize(static_cast<std::size_t>(w) * h);
  f.read(reinterpret_cast<char*>(img.pixels.data()),
         static_cast<std::streamsize>(img.pixels.size()));
  if (!f) throw DataError("read_pgm: truncated file " + path.string());
  return img;
}

inline void write_ground_truth(const std::filesystem::path& path,
                               const std::vector<FrameGt>& gts) {
  auto f = detail::open_out(path, false);
  for (const FrameGt& g : gts) {
    nlohmann::json j;
    j["frame"] = g.frame_id;
    if (g.box.has_value()) j["box"] = detail::box_to_json(*g.box);
    f << j.dump() << "\n";
  }
}

inline std::vector<FrameGt> read_ground_truth(
    const std::filesystem::path& path) {
  auto f = detail::open_in(path, false);
  std::vector<FrameGt> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("ground truth: bad JSON line: " + std::string(e.what()));
    }
    FrameGt g;
    if (!j.contains("frame"))
      throw DataError("ground truth: line missing 'frame'");
    g.frame_id = j["frame"].get<std::int64_t>();
    if (j.contains("box") && !j["box"].is_null())
      g.box = detail::box_from_json(j["box"], "ground truth");
    out.push_back(g);
  }
  return out;
}

inline void write_detections(const std::filesystem::path& path,
                             const std::vector<Detection>& dets) {
  auto f = detail::open_out(path, false);
  for (const Detection& d : dets) {
    nlohmann::json j;
    j["frame"] = d.frame_id;
    j["box"] = detail::box_to_json(d.box);
    j["confidence"] = d.confidence;
    f << j.dump() << "\n";
  }
}

inline std::vector<Detection> read_detections(
    const std::filesystem::path& path) {
  auto f = detail::open_in(path, false);
  std::vector<Detection> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("detections: bad JSON line: " + std::string(e.what()));
    }
    if (!j.contains("frame") || !j.contains("box") || !j.contains("confidence"))
      throw DataError("detections: line missing frame/box/confidence");
    Detection d;
    d.frame_id = j["frame"].get<std::int64_t>();
    d.box = detail::box_from_json(j["box"], "detections");
    d.confidence = j["confidence"].get<double>();
    out.push_back(d);
  }
  return out;
}

inline std::vector<FrameGt> dataset_ground_truth(const Dataset& data) {
  std::vector<FrameGt> gts;
  gts.reserve(data.frames.size());
  for (const Frame& f : data.frames)
    gts.push_back(FrameGt{f.frame_id, f.box});
  return gts;
}

inline void export_dataset(const Dataset& data,
                           const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create dataset directory: " + dir.string());
  for (const Frame& f : data.frames)
    write_pgm(dir / detail::frame_file_name(f.frame_id), f.image_size,
              f.pixels);
  write_ground_truth(dir / "groundtruth.jsonl", dataset_ground_truth(data));
}

inline Dataset import_dataset(const std::filesystem::path& dir) {
  const auto gts = read_ground_truth(dir / "groundtruth.jsonl");
  if (gts.empty())
    throw DataError("import_dataset: no frames listed in " + dir.string());
  Dataset data;
  data.frames.reserve(gts.size());
  for (const FrameGt& g : gts) {
    PgmImage img = read_pgm(dir / detail::frame_file_name(g.frame_id));
    if (data.frames.empty()) data.image_size = img.size;
    if (img.size != data.image_size)
      throw DataError("import_dataset: frames disagree on image size");
    Frame f;
    f.frame_id = g.frame_id;
    f.image_size = img.size;
    f.pixels = std::move(img.pixels);
    f.box = g.box;
    data.frames.push_back(std::move(f));
  }
  return data;
}

inline void save_model(const DetectorModel& model,
                       const std::filesystem::path& path) {
  nlohmann::json header;
  header["format"] = "hardmine-detector";
  header["version"] = 1;
  header["image_size"] = model.grid.image_size;
  header["cells"] = model.grid.cells;
  header["channels"] = model.channels;
  header["param_count"] = model.params.size();
  header["seed"] = model.init_seed;
  auto f = detail::open_out(path, true);
  f << header.dump() << "\n";
  f.write(reinterpret_cast<const char*>(model.params.data()),
          static_cast<std::streamsize>(model.params.size() * sizeof(double)));
}

inline DetectorModel load_model(const std::filesystem::path& path) {
  auto f = detail::open_in(path, true);
  std::string header_line;
  if (!std::getline(f, header_line))
    throw DataError("load_model: missing header in " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_model: bad header: " + std::string(e.what()));
  }
  if (header.value("format", "") != "hardmine-detector")
    throw DataError("load_model: not a detector file: " + path.string());

  DetectorModel m;
  m.grid.image_size = header.at("image_size").get<int>();
  const auto cells = header.at("cells").get<std::vector<int>>();
  if (cells.size() != kNumScales)
    throw DataError("load_model: header must list three grid sizes");
  for (int s = 0; s < kNumScales; ++s) m.grid.cells[s] = cells[s];
  m.channels = header.at("channels").get<int>();
  m.init_seed = header.at("seed").get<std::uint64_t>();
  const auto count = header.at("param_count").get<std::size_t>();
  if (count != m.layout().total)
    throw DataError("load_model: parameter count does not match geometry");
  m.params.resize(count);
  f.read(reinterpret_cast<char*>(m.params.data()),
         static_cast<std::streamsize>(count * sizeof(double)));
  if (!f) throw DataError("load_model: truncated parameters in " + path.string());
  return m;
}

inline void write_training_log(const std::filesystem::path& path,
                               const std::vector<EpochStats>& history) {
  auto f = detail::open_out(path, false);
  for (std::size_t i = 0; i < history.size(); ++i) {
    nlohmann::json j;
    j["epoch"] = i + 1;
    j["total"] = history[i].total;
    j["objectness"] = history[i].objectness;
    j["box"] = history[i].box;
    f << j.dump() << "\n";
  }
}

}  // namespace hardmine
