#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "htt/common/text.hpp"

#ifndef HTT_ASSET_DIR
#define HTT_ASSET_DIR "assets"
#endif

namespace htt {

// Prompt templates and fixtures. HTT_ASSETS overrides the compiled-in location.
inline std::filesystem::path asset_dir() {
  if (const char* env = std::getenv("HTT_ASSETS"); env && *env) return env;
  return HTT_ASSET_DIR;
}

inline std::filesystem::path asset_path(const std::string& relative) { return asset_dir() / relative; }

// Template text without the file's final newline.
inline std::string read_prompt_asset(const std::string& relative) {
  std::string s = text::read_file(asset_path(relative).string());
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

}  // namespace htt
