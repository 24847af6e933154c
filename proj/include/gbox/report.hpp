#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace gbox {

inline constexpr const char* kToolVersion = "0.1.0";

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Static SVG line chart.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

/// Provenance record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::string config_hash;
  std::map<std::string, std::string> input_checksums;  // path -> crc32 hex
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> outputs;
  std::string started_at;
  std::string finished_at;
};

std::string utc_timestamp();
std::string file_checksum(const std::filesystem::path& path);
std::string format_manifest(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);

}  // namespace gbox
