#pragma once
// Plain-text key=value configuration with [section] headers, fixed-format
// CSV emission, FNV-1a checksums, and the run manifest. Every run directory
// holds manifest.txt (config echo plus per-file checksums, written last) and
// results.json under the versioned schema.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "thinfb/core.hpp"

namespace thinfb {

inline constexpr const char* kResultsSchema = "thinfb-results-v1";

class Config {
 public:
  static Config parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        require(line.back() == ']', Err::ConfigError,
                "config line " + std::to_string(lineno) + ": unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      size_t eq = line.find('=');
      require(eq != std::string::npos, Err::ConfigError,
              "config line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
      require(!key.empty(), Err::ConfigError,
              "config line " + std::to_string(lineno) + ": empty key");
      c.kv_[section.empty() ? key : section + "." + key] = value;
    }
    return c;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), Err::ConfigError, "cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  std::string str(const std::string& key) const {
    auto it = kv_.find(key);
    require(it != kv_.end(), Err::ConfigError, "missing config key: " + key);
    return it->second;
  }
  std::string str_or(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }
  double num(const std::string& key) const {
    try {
      return std::stod(str(key));
    } catch (const std::logic_error&) {
      fail(Err::ConfigError, "config key is not a number: " + key);
    }
  }
  double num_or(const std::string& key, double fallback) const {
    return has(key) ? num(key) : fallback;
  }
  long integer_or(const std::string& key, long fallback) const {
    return has(key) ? static_cast<long>(std::llround(num(key))) : fallback;
  }
  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::string s = str(key);
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      try {
        out.push_back(std::stod(tok));
      } catch (const std::logic_error&) {
        fail(Err::ConfigError, "config key is not a number list: " + key);
      }
    }
    require(!out.empty(), Err::ConfigError, "empty list for config key: " + key);
    return out;
  }
  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

inline uint64_t fnv1a(const std::string& data) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), Err::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), Err::IoError, "cannot open " + path + " for writing");
  f << content;
  require(f.good(), Err::IoError, "write failed: " + path);
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// A measured quantity compared against a threshold; tolerance is the slack
/// already folded into the comparison (reported alongside per the schema).
struct Assertion {
  std::string name;
  double value = 0;
  std::string cmp;  // ">=", "<=", "in" (value within [threshold - tol, threshold + tol])
  double threshold = 0;
  double tolerance = 0;
  bool pass = false;

  static Assertion ge(const std::string& name, double value, double threshold) {
    return {name, value, ">=", threshold, 0.0, value >= threshold};
  }
  static Assertion le(const std::string& name, double value, double threshold,
                      double tolerance = 0.0) {
    return {name, value, "<=", threshold + tolerance, tolerance, value <= threshold + tolerance};
  }
  static Assertion within(const std::string& name, double value, double target, double tolerance) {
    return {name, value, "in", target, tolerance, std::fabs(value - target) <= tolerance};
  }
  static Assertion truth(const std::string& name, bool ok) {
    return {name, ok ? 1.0 : 0.0, ">=", 1.0, 0.0, ok};
  }
};

struct RunResult {
  std::string kind;
  uint64_t seed = 0;
  std::vector<Assertion> assertions;
  nlohmann::ordered_json measured = nlohmann::ordered_json::object();
  std::vector<std::string> files;  // files written, relative to the run dir

  bool pass() const {
    for (const auto& a : assertions)
      if (!a.pass) return false;
    return true;
  }
};

inline nlohmann::ordered_json assertions_json(const std::vector<Assertion>& as) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& a : as) {
    nlohmann::ordered_json j;
    j["name"] = a.name;
    j["value"] = a.value;
    j["cmp"] = a.cmp;
    j["threshold"] = a.threshold;
    j["tolerance"] = a.tolerance;
    j["pass"] = a.pass;
    arr.push_back(j);
  }
  return arr;
}

/// Writes results.json plus the manifest with checksums; returns the full
/// results path. The manifest goes last so its checksums cover every file.
inline std::string finalize_run(const std::string& dir, const Config& spec, RunResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::ordered_json j;
  j["schema"] = kResultsSchema;
  j["kind"] = result.kind;
  j["seed"] = result.seed;
  j["pass"] = result.pass();
  j["assertions"] = assertions_json(result.assertions);
  j["measured"] = result.measured;
  std::string results_path = dir + "/results.json";
  write_file(results_path, j.dump(2) + "\n");
  result.files.push_back("results.json");

  std::ostringstream m;
  m << "# thinfb run manifest\n";
  m << "schema = " << kResultsSchema << "\n";
  for (const auto& [k, v] : spec.entries()) m << k << " = " << v << "\n";
  m << "[checksums]\n";
  std::sort(result.files.begin(), result.files.end());
  result.files.erase(std::unique(result.files.begin(), result.files.end()), result.files.end());
  for (const std::string& f : result.files) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(read_file(dir + "/" + f))));
    m << f << " = fnv1a:" << buf << "\n";
  }
  write_file(dir + "/manifest.txt", m.str());
  return results_path;
}

struct ReportLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Report {
  std::string kind;
  bool manifest_ok = false;
  bool checksums_ok = false;
  std::vector<ReportLine> lines;
  std::vector<std::string> inventory;
  bool pass() const {
    if (!manifest_ok || !checksums_ok) return false;
    for (const auto& l : lines)
      if (!l.pass) return false;
    return true;
  }
};

/// Reads a run directory back: verifies the manifest checksums and lists
/// assertion outcomes and measured values.
inline Report read_report(const std::string& dir) {
  namespace fs = std::filesystem;
  Report rep;
  require(fs::exists(dir + "/manifest.txt"), Err::MissingManifest,
          "no manifest.txt under " + dir);
  Config manifest = Config::parse_file(dir + "/manifest.txt");
  rep.manifest_ok = true;
  rep.checksums_ok = true;
  for (const auto& [k, v] : manifest.entries()) {
    if (k.rfind("checksums.", 0) != 0) continue;
    std::string file = k.substr(10);
    rep.inventory.push_back(file);
    std::string want = v;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(read_file(dir + "/" + file))));
    if (want != std::string("fnv1a:") + buf) {
      rep.checksums_ok = false;
      rep.lines.push_back({"checksum:" + file, false, "mismatch (tampered or truncated)"});
    }
  }
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(read_file(dir + "/results.json"));
  require(j["schema"] == kResultsSchema, Err::IoError, "unknown results schema in " + dir);
  rep.kind = j["kind"].get<std::string>();
  for (const auto& a : j["assertions"]) {
    ReportLine l;
    l.name = a["name"].get<std::string>();
    l.pass = a["pass"].get<bool>();
    std::ostringstream d;
    d << fmt_double(a["value"].get<double>()) << " " << a["cmp"].get<std::string>() << " "
      << fmt_double(a["threshold"].get<double>());
    l.detail = d.str();
    rep.lines.push_back(l);
  }
  return rep;
}

}  // namespace thinfb
