#pragma once

// File emitters: CSV tables and traces, 8-bit PGM images, mask index lists.
// All numeric output goes through one shortest-roundtrip formatter so
// repeated runs are byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsfpp/engine.hpp"
#include "tsfpp/mri.hpp"

namespace tsfpp {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "");
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i)
      out << format_number(row[i]) << (i + 1 < row.size() ? "," : "");
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Per-iteration solver trace. The compact form carries the solve command's
// columns; the full form adds the experiment metrics.
inline void write_trace_csv(const std::string& path, const RunTrace& trace,
                            bool full = false) {
  std::vector<std::string> header{"k", "step_norm_sq", "kkt", "objective", "eps2"};
  if (full) header = {"k",    "step_norm_sq", "kkt",  "objective",
                      "eps1", "eps2",         "psnr", "seconds"};
  std::vector<std::vector<double>> rows;
  rows.reserve(trace.size());
  for (const auto& r : trace) {
    if (full)
      rows.push_back({static_cast<double>(r.k), r.step_norm_sq, r.kkt, r.objective,
                      r.eps1, r.eps2, r.psnr, r.seconds});
    else
      rows.push_back({static_cast<double>(r.k), r.step_norm_sq, r.kkt, r.objective,
                      r.eps2});
  }
  write_csv(path, header, rows);
}

// 8-bit binary PGM; the column-major image vector is rasterized row by row.
// Values are clamped to [0, 1] then scaled to 0..255.
inline void write_pgm(const std::string& path, const Vec& image, Index d1, Index d2) {
  if (image.size() != d1 * d2) throw std::invalid_argument("write_pgm: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P5\n" << d2 << " " << d1 << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(d2));
  for (Index i = 0; i < d1; ++i) {
    for (Index j = 0; j < d2; ++j) {
      const double v = std::min(1.0, std::max(0.0, image[i + j * d1]));
      row[static_cast<size_t>(j)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Raw image values as CSV, one image row per line.
inline void write_image_csv(const std::string& path, const Vec& image, Index d1,
                            Index d2) {
  if (image.size() != d1 * d2) throw std::invalid_argument("write_image_csv: size mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (Index i = 0; i < d1; ++i) {
    for (Index j = 0; j < d2; ++j)
      out << format_number(image[i + j * d1]) << (j + 1 < d2 ? "," : "");
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Sorted frequency-index list, one index per line.
inline void write_mask(const std::string& path, std::vector<Index> mask) {
  std::sort(mask.begin(), mask.end());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (Index f : mask) out << f << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_benchmark_csv(const std::string& path,
                                const std::vector<BenchmarkEntry>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "family,epsilon,iterations,psnr_db,seconds\n";
  for (const auto& e : rows) {
    out << e.family << "," << format_number(e.epsilon) << ",";
    if (e.iterations < 0)
      out << "-,-,-\n";  // never reached the tolerance
    else
      out << e.iterations << "," << format_number(e.psnr_db) << ","
          << format_number(e.seconds) << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace tsfpp
