#include "quadtune/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace quadtune {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void CsvTable::validate() const {
  if (columns.empty()) throw std::invalid_argument("csv table needs a header");
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != columns.size())
      throw std::invalid_argument("csv row " + std::to_string(r) +
                                  " does not match the header width");
    for (double v : rows[r])
      if (!std::isfinite(v))
        throw std::domain_error("csv row " + std::to_string(r) +
                                " contains a non-finite value");
  }
}

void write_csv(const std::string& path, const CsvTable& table) {
  table.validate();
  std::string out;
  for (size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += table.columns[c];
  }
  out += '\n';
  char buf[40];
  for (const auto& row : table.rows) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", row[c]);
      out += buf;
    }
    out += '\n';
  }
  write_text(path, out);
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_text(path), path); }

CsvTable parse_csv(const std::string& text, const std::string& path) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw std::invalid_argument(path + ": missing csv header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::istringstream head(line);
  std::string cell;
  while (std::getline(head, cell, ',')) table.columns.push_back(cell);

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream cells(line);
    while (std::getline(cells, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                    ": non-numeric cell '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != table.columns.size())
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": row width does not match the header");
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::ordered_json manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["config"] = m.config_path;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["outputs"] = m.outputs;
  j["complete"] = m.complete;
  j["wall_time_s"] = m.wall_time_s;
  j["version"] = m.version;
  return j;
}

nlohmann::ordered_json spectrum_json(const Spectrum& s, double b0_t) {
  nlohmann::ordered_json j;
  j["kind"] = "spectrum";
  j["ionize_m"] = s.ionize_m;
  j["read_m"] = s.read_m;
  j["b0_t"] = b0_t;
  j["f0_hz"] = s.f0_hz;
  j["fq_hz"] = s.fq_hz;
  j["theta_rad"] = s.theta_rad;
  j["warning"] = s.warning;
  j["frequency_hz"] = s.frequency_hz;
  j["signal"] = s.signal;
  return j;
}

namespace {
double require_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number())
    throw std::invalid_argument(std::string("spectrum json: missing numeric '") +
                                key + "'");
  return j[key].get<double>();
}
}  // namespace

Spectrum spectrum_from_json(const nlohmann::json& j, double& b0_t) {
  Spectrum s;
  s.ionize_m = require_number(j, "ionize_m");
  s.read_m = require_number(j, "read_m");
  b0_t = require_number(j, "b0_t");
  s.f0_hz = require_number(j, "f0_hz");
  s.fq_hz = require_number(j, "fq_hz");
  s.theta_rad = require_number(j, "theta_rad");
  if (!j.contains("frequency_hz") || !j["frequency_hz"].is_array() ||
      !j.contains("signal") || !j["signal"].is_array())
    throw std::invalid_argument("spectrum json: missing frequency_hz/signal arrays");
  s.frequency_hz = j["frequency_hz"].get<std::vector<double>>();
  s.signal = j["signal"].get<std::vector<double>>();
  if (s.frequency_hz.size() != s.signal.size() || s.frequency_hz.size() < 3)
    throw std::invalid_argument("spectrum json: frequency_hz/signal length mismatch");
  return s;
}

nlohmann::ordered_json fit_result_json(const FitResult& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (int i = 0; i < r.estimate.size(); ++i) {
    nlohmann::ordered_json p;
    p["name"] = i < static_cast<int>(r.names.size()) ? r.names[i]
                                                     : "p" + std::to_string(i);
    p["estimate"] = r.estimate(i);
    p["sigma"] = r.sigma(i);
    params.push_back(std::move(p));
  }
  j["parameters"] = std::move(params);
  j["residual_norm"] = r.residual_norm;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  return j;
}

}  // namespace quadtune
