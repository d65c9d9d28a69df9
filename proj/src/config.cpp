#include "config.hpp"

#include <cstdio>
#include <sstream>

namespace dodo {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::uint32_t parse_u32(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long x = std::stoul(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint32_t>(x);
  } catch (const std::exception&) {
    fail(Errc::kConfig, "config: bad integer for " + key + ": '" + v + "'");
  }
}

double parse_f64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    fail(Errc::kConfig, "config: bad number for " + key + ": '" + v + "'");
  }
}

std::string fmt_f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      fail(Errc::kConfig, "config: line " + std::to_string(lineno) + " is not key=value: '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key.empty()) fail(Errc::kConfig, "config: empty key on line " + std::to_string(lineno));
    out[key] = val;
  }
  return out;
}

void apply_config_text(ModelConfig& cfg, const std::string& text) {
  for (const auto& [key, val] : parse_kv_text(text)) {
    if (key == "layers") cfg.layers = parse_u32(key, val);
    else if (key == "width") cfg.width = parse_u32(key, val);
    else if (key == "heads") cfg.heads = parse_u32(key, val);
    else if (key == "vocab") cfg.vocab = parse_u32(key, val);
    else if (key == "max_pos") cfg.max_pos = parse_u32(key, val);
    else if (key == "feature_layer") cfg.feature_layer = parse_u32(key, val);
    else if (key == "ratio") cfg.ratio = parse_f64(key, val);
    else if (key == "tau") cfg.tau = parse_u32(key, val);
    else if (key == "lambda") cfg.lambda = parse_f64(key, val);
    else if (key == "segment") cfg.segment = parse_u32(key, val);
    else fail(Errc::kConfig, "config: unknown key '" + key + "'");
  }
  cfg.validate();
}

std::string config_to_text(const ModelConfig& cfg) {
  std::string s;
  s += "layers=" + std::to_string(cfg.layers) + "\n";
  s += "width=" + std::to_string(cfg.width) + "\n";
  s += "heads=" + std::to_string(cfg.heads) + "\n";
  s += "vocab=" + std::to_string(cfg.vocab) + "\n";
  s += "max_pos=" + std::to_string(cfg.max_pos) + "\n";
  s += "feature_layer=" + std::to_string(cfg.feature_layer) + "\n";
  s += "ratio=" + fmt_f64(cfg.ratio) + "\n";
  s += "tau=" + std::to_string(cfg.tau) + "\n";
  s += "lambda=" + fmt_f64(cfg.lambda) + "\n";
  s += "segment=" + std::to_string(cfg.segment) + "\n";
  return s;
}

}  // namespace dodo
