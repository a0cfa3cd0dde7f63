#pragma once

// Deterministic CSV/JSON emission: fixed 17-significant-digit floats so that
// identical configs produce byte-identical artifacts, plus a config hash for
// sidecar provenance.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace g2flow::io {

/// Shortest-faithful printing is avoided on purpose: always 17 significant
/// digits, so files are stable across platforms and library versions.
std::string fmt17(double v);

std::uint64_t fnv1a(const std::string& data);
std::string hex64(std::uint64_t v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<double>& values);
  void row_mixed(const std::vector<std::string>& values);
  const std::string& text() const { return buf_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::string buf_;
  std::size_t width_;
};

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace g2flow::io
