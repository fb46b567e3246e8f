#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace hotspots::docs {

struct Anchor {
  std::string id;           // as written in the map's first column
  std::string description;  // what in the method it stands for
};

// Every method component the code base implements; each must be mapped
// exactly once in docs/method_code_map.md.
const std::vector<Anchor>& RequiredAnchors();

struct LintReport {
  bool pass = true;
  std::vector<std::string> problems;
  int mapped_anchors = 0;
  int documented_keys = 0;

  std::string Text() const;
};

// Markdown tables: rows start with '|' and their first cell holds a
// backticked identifier.
std::vector<std::string> TableKeys(const std::string& markdown);

LintReport LintTexts(const std::string& code_map, const std::string& config_reference);
// Reads docs/method_code_map.md and docs/config_reference.md under `root`.
LintReport DocLint(const std::filesystem::path& root);

}  // namespace hotspots::docs
