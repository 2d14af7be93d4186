#pragma once

// Runs the mrfup binary and captures exit code and output.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>
#include <string>

namespace cli {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline Run run(const std::string& args, const fs::path& workdir) {
  const fs::path out = workdir / "stdout.txt", err = workdir / "stderr.txt";
  const std::string cmd = std::string("\"") + MRFUP_CLI + "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

inline fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mrfup_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

/// Two-plane scene spec for synth runs.
inline std::string scene_json(int w, int h) {
  return R"({"name": "two", "width": )" + std::to_string(w) + R"(, "height": )" +
         std::to_string(h) + R"(,
  "planes": [
    {"normal": [0.3, -0.2, 1.0], "offset": 5.0, "rgb": [0.7, 0.3, 0.2]},
    {"normal": [-0.2, 0.1, 1.0], "offset": 4.0, "rgb": [0.2, 0.4, 0.8], "region": [)" +
         std::to_string(w / 2) + ", 0, " + std::to_string(w) + ", " + std::to_string(h) + R"(]}
  ]})";
}

/// CSV text with the runtime_s column blanked.
inline std::string strip_runtime(const std::string& csv) {
  std::string out, line;
  std::istringstream in(csv);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() > 9) cells[9].clear();
    for (std::size_t k = 0; k < cells.size(); ++k) out += (k ? "," : "") + cells[k];
    out += "\n";
  }
  return out;
}

}  // namespace cli
