#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "metacausal/experiments.hpp"

namespace metacausal::experiments {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const char* key, const std::string& value, const char* kind) {
  throw ConfigError(std::string("config key '") + key + "': expected " + kind + ", got '" +
                    value + "'");
}

}  // namespace

Profile parse_profile(const std::string& name) {
  if (name == "desk") return Profile::desk;
  if (name == "paper") return Profile::paper;
  throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

std::string to_string(Profile p) { return p == Profile::desk ? "desk" : "paper"; }

Config Config::parse(std::istream& in) {
  Config c;
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line.size() < 3 || line.front() != '[' || line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) +
                          ": expected an experiment header like [bivariate-discrete]");
      c.experiment_ = trim(line.substr(1, line.size() - 2));
      header = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (c.values_.count(key) != 0)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    c.values_[key] = trim(line.substr(eq + 1));
  }
  if (!header) throw ConfigError("config has no experiment header");
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse(in);
}

const std::string* ConfigReader::find(const char* key) {
  seen_.insert(key);
  const auto it = config_.values().find(key);
  return it == config_.values().end() ? nullptr : &it->second;
}

void ConfigReader::operator()(const char* key, int& v) {
  const std::string* s = find(key);
  if (s == nullptr) return;
  std::size_t used = 0;
  try {
    const long long x = std::stoll(*s, &used);
    if (used != s->size() || x < INT32_MIN || x > INT32_MAX) bad_value(key, *s, "an integer");
    v = static_cast<int>(x);
  } catch (const std::logic_error&) {
    bad_value(key, *s, "an integer");
  }
}

void ConfigReader::operator()(const char* key, std::uint64_t& v) {
  const std::string* s = find(key);
  if (s == nullptr) return;
  std::size_t used = 0;
  try {
    if (!s->empty() && s->front() == '-') bad_value(key, *s, "an unsigned integer");
    v = std::stoull(*s, &used);
    if (used != s->size()) bad_value(key, *s, "an unsigned integer");
  } catch (const std::logic_error&) {
    bad_value(key, *s, "an unsigned integer");
  }
}

void ConfigReader::operator()(const char* key, double& v) {
  const std::string* s = find(key);
  if (s == nullptr) return;
  std::size_t used = 0;
  try {
    v = std::stod(*s, &used);
    if (used != s->size() || !std::isfinite(v)) bad_value(key, *s, "a finite number");
  } catch (const std::logic_error&) {
    bad_value(key, *s, "a finite number");
  }
}

void ConfigReader::operator()(const char* key, bool& v) {
  const std::string* s = find(key);
  if (s == nullptr) return;
  if (*s == "true" || *s == "1") v = true;
  else if (*s == "false" || *s == "0") v = false;
  else bad_value(key, *s, "true or false");
}

void ConfigReader::operator()(const char* key, std::string& v) {
  if (const std::string* s = find(key)) v = *s;
}

void ConfigReader::operator()(const char* key, std::vector<int>& v) {
  const std::string* s = find(key);
  if (s == nullptr) return;
  std::vector<int> out;
  std::stringstream ss(*s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    int x = 0;
    Config one;
    one.set(key, item);
    ConfigReader r(one);
    r(key, x);
    out.push_back(x);
  }
  if (out.empty()) bad_value(key, *s, "a comma-separated integer list");
  v = std::move(out);
}

void ConfigReader::finish() const {
  for (const auto& [k, _] : config_.values())
    if (seen_.count(k) == 0) throw ConfigError("unknown config key '" + k + "'");
}

std::string ConfigWriter::format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string ConfigWriter::format(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i != 0) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

void write_table(const Table& t, Profile profile, const std::filesystem::path& dir) {
  std::ostringstream os;
  if (t.with_profile) os << "profile,";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  const std::string prof = to_string(profile);
  char buf[32];
  for (const auto& row : t.rows) {
    if (row.size() != t.columns.size())
      throw std::logic_error("table '" + t.file + "': row width does not match header");
    if (t.with_profile) os << prof << ',';
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!std::isfinite(row[i]))
        throw NumericalError("non-finite value in column '" + t.columns[i] + "' of " + t.file);
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      os << (i ? "," : "") << buf;
    }
    os << '\n';
  }
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / t.file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / t.file).string());
  out << os.str();
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string manifest_config_text(const RunManifest& m) {
  std::string s = "[" + m.experiment + "]\n";
  for (const auto& [k, v] : m.config) s += k + " = " + v + "\n";
  return s;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["experiment"] = m.experiment;
  j["profile"] = to_string(m.profile);
  j["seed"] = m.seed;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.config) cfg[k] = v;
  j["config"] = cfg;
  j["stream_ids"] = m.streams;
  j["version"] = m.version;
  j["outputs"] = m.outputs;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest '" + path.string() + "'");
  nlohmann::ordered_json j;
  try {
    in >> j;
    RunManifest m;
    m.experiment = j.at("experiment").get<std::string>();
    m.profile = parse_profile(j.at("profile").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("config").items()) m.config.emplace_back(k, v.get<std::string>());
    m.streams = j.at("stream_ids").get<std::vector<std::uint64_t>>();
    m.version = j.at("version").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest '" + path.string() + "': " + e.what());
  }
}

}  // namespace metacausal::experiments
