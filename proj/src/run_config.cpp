#include "catvrnn/run_config.hpp"

#include <fstream>

#include "catvrnn/errors.hpp"

namespace catvrnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_key_value_config(std::istream& in,
                                                                        const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    const std::string value = trim(line.substr(eq + 1));
    std::erase_if(out, [&](const auto& kv) { return kv.first == key; });
    out.emplace_back(key, value);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> load_key_value_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse_key_value_config(in, path.string());
}

std::vector<std::string> expand_config_args(const std::vector<std::string>& args,
                                            std::vector<std::string>* file_keys) {
  std::vector<std::string> rest;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file argument");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_path.empty()) return rest;

  std::vector<std::string> from_file;
  for (const auto& [k, v] : load_key_value_config(config_path)) {
    from_file.push_back("--" + k + "=" + v);
    if (file_keys) file_keys->push_back(k);
  }
  // Insert after the program name and the subcommand token.
  std::size_t at = std::min<std::size_t>(rest.size(), 1);
  if (at < rest.size() && !rest[at].empty() && rest[at][0] != '-') ++at;
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(at), from_file.begin(), from_file.end());
  return rest;
}

}  // namespace catvrnn
