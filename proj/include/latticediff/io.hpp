#pragma once

#include "error.hpp"

#include <json.hpp>

#include <Eigen/Core>
#include <boost/version.hpp>

#include <array>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace latticediff::io {

using json = nlohmann::json;

inline constexpr const char* version = "0.1.0";

// shortest round-trip form, independent of the global locale
inline std::string fmt(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), end);
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

// nlohmann's default object is a std::map, so keys already come out sorted
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw ConfigError("write to '" + path + "' failed");
}

inline void write_json(const std::string& path, const json& j) { write_text(path, dump(j)); }

class CsvWriter {
 public:
  // The first line is a comment tying the file to its run manifest; the header row follows.
  CsvWriter(const std::string& path, const std::vector<std::string>& header, const std::string& manifest_hash)
      : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw ConfigError("cannot open '" + path + "' for writing");
    out_ << "# manifest " << manifest_hash << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }

  void row(std::initializer_list<double> vals) {
    bool first = true;
    for (double v : vals) {
      out_ << (first ? "" : ",") << fmt(v);
      first = false;
    }
    out_ << "\n";
  }
  void row(const std::vector<double>& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) out_ << (i ? "," : "") << fmt(vals[i]);
    out_ << "\n";
  }

  ~CsvWriter() = default;

 private:
  std::ofstream out_;
  std::string path_;
};

// Hash covers what determines the outputs: config, command, flags, seed. Threads and wall time excluded.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> flags;
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;

  std::string config_hash() const { return hex(fnv1a(config.dump())); }

  std::string hash() const {
    std::uint64_t h = fnv1a(config.dump());
    h = fnv1a(command, h);
    for (const auto& [k, v] : flags) h = fnv1a(k + "=" + v + ";", h);
    h = fnv1a(std::to_string(seed), h);
    return hex(h);
  }

  json to_json() const {
    json j;
    j["manifest_hash"] = hash();
    j["config_hash"] = config_hash();
    j["command"] = command;
    j["flags"] = flags;
    j["seed"] = seed;
    j["outputs"] = outputs;
    j["wall_seconds"] = wall_seconds;
    j["versions"] = {{"latticediff", version},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000)},
                     {"compiler", __VERSION__}};
    return j;
  }
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace latticediff::io
