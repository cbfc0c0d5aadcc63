#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dbmc/frontend.hpp"
#include "dbmc/program.hpp"

namespace testing {

inline std::string data(const std::string& rel) { return std::string(DBMC_TEST_DATA) + "/" + rel; }

inline dbmc::CoreProgram load(const std::string& rel, int depth = 2) {
  return dbmc::compile(dbmc::read_file(data(rel)), depth);
}

/// "main/L1.foo/L5.bar" -> dynamic callsite.
inline dbmc::DynamicCallsite site(const std::string& path) {
  std::vector<dbmc::StaticCallsite> frames{dbmc::kMainFrame};
  std::size_t pos = path.find('/');
  while (pos != std::string::npos) {
    std::size_t next = path.find('/', pos + 1);
    std::string frame = path.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1);
    auto dot = frame.find('.');
    frames.push_back({frame.substr(0, dot), frame.substr(dot + 1)});
    pos = next;
  }
  return dbmc::DynamicCallsite::from_frames(frames);
}

/// Sorted list of files with the given extension in a data directory.
inline std::vector<std::string> files(const std::string& rel_dir, const std::string& ext) {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(data(rel_dir)))
    if (e.path().extension() == ext) out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

/// Value of a `// key: value` header line.
inline std::string header(const std::string& source, const std::string& key) {
  const std::string tag = "// " + key + ": ";
  auto p = source.find(tag);
  if (p == std::string::npos) return {};
  auto e = source.find('\n', p);
  return source.substr(p + tag.size(), e - p - tag.size());
}

struct CommandResult {
  int exit_code;
  std::string output;
};

inline CommandResult run_command(const std::string& cmd) {
  CommandResult r{-1, {}};
  FILE* f = ::popen((cmd + " 2>&1").c_str(), "r");
  if (!f) return r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, f)) r.output.append(buf, n);
  int status = ::pclose(f);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace testing
