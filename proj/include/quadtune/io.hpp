#ifndef QUADTUNE_IO_HPP
#define QUADTUNE_IO_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "quadtune/endor.hpp"
#include "quadtune/fit.hpp"

namespace quadtune {

// FNV-1a over the raw bytes; stable across platforms, used to fingerprint
// config files in run manifests.
std::uint64_t fnv1a64(std::string_view data);
std::string hash_hex(std::uint64_t h);

// Rectangular numeric table. Written with a header row, '.' decimal,
// %.17g values and LF line endings so identical data is byte-identical.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void validate() const;  // rectangular, finite cells, non-empty header
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable parse_csv(const std::string& text, const std::string& name = "csv");
CsvTable read_csv(const std::string& path);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// Provenance record accompanying every set of output files. The manifest is
// written once before the outputs with complete = false and rewritten after
// the last output, so an interrupted run is recognizable on disk.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  bool complete = false;
  double wall_time_s = 0.0;
  std::string version;
};

nlohmann::ordered_json manifest_json(const RunManifest& m);

// Spectrum round-trip through JSON; b0_t rides along so field-dependent fits
// can consume spectra from separate runs. from_json throws invalid_argument
// naming the first missing or malformed field.
nlohmann::ordered_json spectrum_json(const Spectrum& s, double b0_t);
Spectrum spectrum_from_json(const nlohmann::json& j, double& b0_t);

nlohmann::ordered_json fit_result_json(const FitResult& r);

}  // namespace quadtune

#endif
