#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <utility>
#include <vector>

namespace catvrnn {

/// Flat `key = value` file: one pair per line, '#' starts a comment, blank
/// lines ignored. Keys are option names without the leading dashes. Later
/// duplicates override earlier ones.
std::vector<std::pair<std::string, std::string>> parse_key_value_config(std::istream& in,
                                                                        const std::string& source);
std::vector<std::pair<std::string, std::string>> load_key_value_config(const std::filesystem::path& path);

/// Rewrites argv so values from `--config FILE` come first and explicit flags
/// later, giving flags > file > defaults under a take-last option policy.
/// Returns the rewritten arguments; `file_keys` receives the keys read.
std::vector<std::string> expand_config_args(const std::vector<std::string>& args,
                                            std::vector<std::string>* file_keys = nullptr);

}  // namespace catvrnn
