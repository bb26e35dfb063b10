#pragma once

// Helpers for driving the installed CLI binary from tests. The binary path
// comes from the THRESHCAL_CLI environment variable set by CTest.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace cli {

inline std::string binary_path() {
  const char* p = std::getenv("THRESHCAL_CLI");
  return p ? p : "./threshcal";
}

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::filesystem::path temp_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("threshcal_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::filesystem::path write_file(const std::string& name, const std::string& body) {
  const auto p = temp_dir() / name;
  std::ofstream out(p, std::ios::binary);
  out << body;
  return p;
}

inline CmdResult run(const std::string& args) {
  static int counter = 0;
  const auto out_path = temp_dir() / ("out_" + std::to_string(counter) + ".txt");
  const auto err_path = temp_dir() / ("err_" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = binary_path() + " " + args + " > " + out_path.string() + " 2> " +
                          err_path.string();
  const int status = std::system(cmd.c_str());
  CmdResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.out = slurp(out_path);
  res.err = slurp(err_path);
  return res;
}

}  // namespace cli
