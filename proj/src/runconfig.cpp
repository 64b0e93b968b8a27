#include "gm/runconfig.hpp"

#include <fstream>

namespace gm {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int64_t parse_int(const std::string& key, const std::string& value) {
  size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size())
    raise(ErrorKind::InvalidArgument, key + " needs an integer, got \"" + value + "\"");
  return v;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || value[0] == '-')
    raise(ErrorKind::InvalidArgument, key + " needs a nonnegative integer, got \"" + value + "\"");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size())
    raise(ErrorKind::InvalidArgument, key + " needs a number, got \"" + value + "\"");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  raise(ErrorKind::InvalidArgument, key + " needs true/false/1/0, got \"" + value + "\"");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "model.patch_size") model.patch_size = parse_int(key, value);
  else if (key == "model.bands") model.bands = parse_int(key, value);
  else if (key == "model.classes") model.classes = parse_int(key, value);
  else if (key == "model.feature_dim") model.feature_dim = parse_int(key, value);
  else if (key == "model.state_dim") model.state_dim = parse_int(key, value);
  else if (key == "model.spectral_tokens") model.spectral_tokens = parse_int(key, value);
  else if (key == "model.spectral_group") model.spectral_group = parse_int(key, value);
  else if (key == "model.top_tokens") model.top_tokens = parse_int(key, value);
  else if (key == "model.lambda") model.lambda = parse_double(key, value);
  else if (key == "train.epochs") train.epochs = parse_int(key, value);
  else if (key == "train.batch_size") train.batch_size = parse_int(key, value);
  else if (key == "train.learning_rate") train.learning_rate = parse_double(key, value);
  else if (key == "train.seed") train.seed = parse_u64(key, value);
  else if (key == "train.fraction") train.fraction = parse_double(key, value);
  else if (key == "train.epoch_eval") train.epoch_eval = parse_bool(key, value);
  else if (key == "data.cube") data.cube = value;
  else if (key == "data.normalize") data.normalize = parse_bool(key, value);
  else if (key == "synth.height") synth.height = parse_int(key, value);
  else if (key == "synth.width") synth.width = parse_int(key, value);
  else if (key == "synth.bands") synth.bands = parse_int(key, value);
  else if (key == "synth.classes") synth.classes = parse_int(key, value);
  else if (key == "synth.noise") synth.noise = parse_double(key, value);
  else if (key == "eval.checkpoint") eval.checkpoint = value;
  else if (key == "predict.checkpoint") predict.checkpoint = value;
  else raise(ErrorKind::InvalidArgument, "unknown config key \"" + key + "\"");
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::string section;
  size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']')
        raise(ErrorKind::InvalidArgument, where + ": unterminated section header " + line);
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) raise(ErrorKind::InvalidArgument, where + ": empty section name");
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      raise(ErrorKind::InvalidArgument, where + ": expected key = value, got \"" + line + "\"");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) raise(ErrorKind::InvalidArgument, where + ": empty key");
    if (section.empty())
      raise(ErrorKind::InvalidArgument, where + ": key \"" + key + "\" before any [section]");
    try {
      cfg.set(section + "." + key, value);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InvalidArgument) throw;
      raise(ErrorKind::InvalidArgument, where + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::IoError, "cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text, path);
}

}  // namespace gm
