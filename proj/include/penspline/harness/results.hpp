#pragma once

// Long-format result records, their CSV form and the run manifest.

#include <openssl/evp.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "penspline/error.hpp"
#include "penspline/harness/config.hpp"

namespace penspline::harness {

inline constexpr int kSchemaVersion = 1;

struct Record {
  std::string cell;   // factor levels, "key=value;key=value"
  int replicate = 0;  // -1 for across-replicate summaries
  std::string metric;
  int index = -1;  // position along a curve, -1 for scalars
  double value = 0.0;
};

struct ResultTable {
  std::string experiment;
  std::uint64_t seed = 0;
  std::vector<Record> records;

  void add(std::string cell, int replicate, std::string metric, double value, int index = -1) {
    require(std::isfinite(value), ErrorKind::NonFiniteLogPosterior,
            "non-finite metric " + metric + " in cell " + cell);
    records.push_back({std::move(cell), replicate, std::move(metric), index, value});
  }

  void append(const std::vector<Record>& more) { records.insert(records.end(), more.begin(), more.end()); }

  /// First value of (cell, replicate, metric, index); throws if absent.
  double value(const std::string& cell, int replicate, const std::string& metric, int index = -1) const {
    for (const auto& r : records)
      if (r.cell == cell && r.replicate == replicate && r.metric == metric && r.index == index) return r.value;
    fail(ErrorKind::InvalidArgument, "no record " + cell + " / " + std::to_string(replicate) + " / " + metric);
  }

  std::vector<double> values(const std::string& cell, const std::string& metric) const {
    std::vector<double> out;
    for (const auto& r : records)
      if (r.cell == cell && r.metric == metric && r.replicate >= 0) out.push_back(r.value);
    return out;
  }
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// RFC 4180: quote fields containing a comma, quote or line break.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string to_csv(const ResultTable& table) {
  std::ostringstream out;
  out << "schema_version,experiment,seed,cell,replicate,metric,index,value\r\n";
  for (const auto& r : table.records) {
    out << kSchemaVersion << ',' << csv_field(table.experiment) << ',' << table.seed << ',' << csv_field(r.cell)
        << ',' << r.replicate << ',' << csv_field(r.metric) << ',' << r.index << ',' << format_double(r.value)
        << "\r\n";
  }
  return out.str();
}

inline std::string sha1_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  require(EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha1(), nullptr) == 1, ErrorKind::InvalidArgument,
          "SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

struct RunInfo {
  int threads = 1;
  double seconds = 0.0;
  std::vector<std::pair<std::string, std::string>> files;  // name, sha1
};

inline Json manifest(const ExperimentConfig& config, const ResultTable& table, const RunInfo& info) {
  Json files = Json::array();
  for (const auto& [name, hash] : info.files) files.push_back({{"name", name}, {"sha1", hash}});
  return Json{{"schema_version", kSchemaVersion},
              {"experiment", table.experiment},
              {"seed", table.seed},
              {"threads", info.threads},
              {"records", table.records.size()},
              {"elapsed_seconds", info.seconds},
              {"files", files},
              {"config", config.source}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::ConfigError, "cannot write " + path.string());
  out << text;
}

}  // namespace penspline::harness
