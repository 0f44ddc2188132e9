#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dstdoctor/model.hpp"

namespace testutil {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(DSTDOCTOR_TEST_DATA) / name;
}

inline std::filesystem::path golden_path(const std::string& name) {
  return std::filesystem::path(DSTDOCTOR_GOLDEN) / name;
}

inline std::filesystem::path rules_path(const std::string& name) {
  return std::filesystem::path(DSTDOCTOR_RULES_DIR) / name;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::mt19937_64 rng(std::random_device{}());
    for (int attempt = 0; attempt < 64; ++attempt) {
      auto candidate = base / ("dstdoctor_test_" + std::to_string(rng()));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

inline std::string shell_quote(const std::string& arg) {
  std::string out = "'";
  for (char c : arg) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  out += "'";
  return out;
}

/// Runs the installed tool binary with the given arguments, capturing output.
/// `env` entries are NAME=VALUE pairs exported for the child only.
inline RunResult run_tool(const std::vector<std::string>& args,
                          const std::vector<std::string>& env = {}) {
  std::string command = "env";
  for (const std::string& pair : env) command += " " + shell_quote(pair);
  command += " " + shell_quote(DSTDOCTOR_TOOL);
  for (const std::string& arg : args) command += " " + shell_quote(arg);
  command += " 2>&1";

  FILE* pipe = popen(command.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("popen failed for: " + command);
  RunResult result;
  char buffer[4096];
  std::size_t n = 0;
  while ((n = fread(buffer, 1, sizeof buffer, pipe)) > 0) result.output.append(buffer, n);
  int status = pclose(pipe);
  result.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  return result;
}

/// Canonical per-turn states of a dialog, for order-insensitive comparisons.
inline std::vector<std::vector<dstdoctor::SlotTriple>> turn_states(const dstdoctor::Dialog& d) {
  std::vector<std::vector<dstdoctor::SlotTriple>> out;
  for (const auto& turn : d.turns) out.push_back(turn.state);
  return out;
}

}  // namespace testutil
