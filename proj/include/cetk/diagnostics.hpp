// diagnostics.hpp
// On-disk dump of diagnostic grids: one flat binary file of row-major 32-bit
// floats per quantity plus a JSON header describing dimensions and axes.

#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cetk/pipeline.hpp"

namespace cetk {

inline void write_grid(const std::string& path_base, const std::vector<float>& grid, int rows,
                       int cols, double frame_rate_hz, const std::vector<double>& freq_hz) {
  if (static_cast<size_t>(rows) * cols != grid.size())
    throw std::invalid_argument("write_grid: dimension mismatch");
  {
    std::ofstream f(path_base + ".f32", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write grid: " + path_base + ".f32");
    f.write(reinterpret_cast<const char*>(grid.data()),
            static_cast<std::streamsize>(grid.size() * sizeof(float)));
  }
  nlohmann::json j;
  j["rows"] = rows;
  j["cols"] = cols;
  j["dtype"] = "float32";
  j["layout"] = "row-major";
  j["row_axis"] = "frame";
  j["col_axis"] = "frequency_bin";
  j["frame_rate_hz"] = frame_rate_hz;
  j["freq_hz"] = freq_hz;
  j["data_file"] = std::filesystem::path(path_base + ".f32").filename().string();
  std::ofstream h(path_base + ".json");
  if (!h) throw std::runtime_error("cannot write grid header: " + path_base + ".json");
  h << j.dump(2) << "\n";
}

inline void dump_diagnostics(const std::string& dir, const Diagnostics& d) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto base = [&](const char* name) { return (fs::path(dir) / name).string(); };
  write_grid(base("mean_diffuseness"), d.mean_diffuseness, d.frames, d.bins, d.frame_rate_hz,
             d.freq_hz);
  write_grid(base("cdr_input"), d.cdr_input, d.frames, d.bins, d.frame_rate_hz, d.freq_hz);
  write_grid(base("cdr_bf"), d.cdr_bf, d.frames, d.bins, d.frame_rate_hz, d.freq_hz);
  write_grid(base("gain"), d.gain, d.frames, d.bins, d.frame_rate_hz, d.freq_hz);

  nlohmann::json j;
  j["frames"] = d.frames;
  j["channels"] = d.channels;
  j["frame_rate_hz"] = d.frame_rate_hz;
  j["tdoa_s"] = d.tdoa_s;
  j["frame_flags"] = d.frame_flags;
  j["low_energy_bins"] = d.low_energy_bins;
  j["clamped_bins"] = d.clamped_bins;
  std::ofstream f((fs::path(dir) / "track.json").string());
  if (!f) throw std::runtime_error("cannot write diagnostics track: " + dir);
  f << j.dump(2) << "\n";
}

inline std::vector<float> read_grid(const std::string& path_base, int* rows = nullptr,
                                    int* cols = nullptr) {
  std::ifstream h(path_base + ".json");
  if (!h) throw std::runtime_error("cannot open grid header: " + path_base + ".json");
  nlohmann::json j;
  h >> j;
  const int r = j.at("rows").get<int>(), c = j.at("cols").get<int>();
  if (rows) *rows = r;
  if (cols) *cols = c;
  std::ifstream f(path_base + ".f32", std::ios::binary);
  if (!f) throw std::runtime_error("cannot open grid data: " + path_base + ".f32");
  std::vector<float> grid(static_cast<size_t>(r) * c);
  f.read(reinterpret_cast<char*>(grid.data()),
         static_cast<std::streamsize>(grid.size() * sizeof(float)));
  if (!f) throw std::runtime_error("grid data truncated: " + path_base + ".f32");
  return grid;
}

}  // namespace cetk
