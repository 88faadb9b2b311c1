#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <csignal>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include <sizegraph/sizegraph.hpp>

namespace testsupport {

inline const sizegraph::Category& shoes() {
  static const sizegraph::Category c(sizegraph::Gender::Men, "Sports Shoes");
  return c;
}

inline sizegraph::InteractionEvent event(const std::string& user, const std::string& brand,
                                         sizegraph::EventKind kind, std::int64_t ts = 0,
                                         std::optional<double> size = std::nullopt,
                                         const sizegraph::Category& category = shoes()) {
  sizegraph::InteractionEvent e;
  e.user_id = user;
  e.brand_id = brand;
  e.category = category;
  e.kind = kind;
  e.timestamp = ts;
  if (size) e.size = sizegraph::UkSize::from_value(*size);
  if (kind == sizegraph::EventKind::Purchase) e.order_id = user + "-" + std::to_string(ts);
  return e;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sizegraph-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct RunResult {
  int exit_code = -1;
  std::string out;  // stdout only; stderr goes to a file when requested
};

/// Runs a shell command and captures stdout.
inline RunResult run(const std::string& command) {
  RunResult r;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

/// A `sizegraph serve` child started on an ephemeral port. The shell prints its
/// pid before exec so the process can be stopped again.
class ServerProcess {
 public:
  explicit ServerProcess(const std::string& command) {
    pipe_ = ::popen(("echo $$; exec " + command).c_str(), "r");
    if (!pipe_) return;
    std::array<char, 256> line{};
    if (std::fgets(line.data(), line.size(), pipe_)) pid_ = std::atoi(line.data());
    if (std::fgets(line.data(), line.size(), pipe_)) {
      const std::string text(line.data());
      const auto colon = text.rfind(':');
      if (text.rfind("listening ", 0) == 0 && colon != std::string::npos) {
        port_ = std::atoi(text.c_str() + colon + 1);
      }
    }
  }
  ~ServerProcess() {
    if (pid_ > 0) ::kill(pid_, SIGTERM);
    if (pipe_) ::pclose(pipe_);
  }
  ServerProcess(const ServerProcess&) = delete;
  ServerProcess& operator=(const ServerProcess&) = delete;

  int port() const { return port_; }

 private:
  FILE* pipe_ = nullptr;
  int pid_ = 0;
  int port_ = 0;
};

/// Random antisymmetric size graph with up to `max_brands` brands plus a random
/// similarity graph over the same brands.
struct RandomWorld {
  sizegraph::SizeGraph sizes;
  sizegraph::BrandSimilarityGraph sims;
  std::vector<std::string> brands;
};

inline RandomWorld random_world(std::mt19937_64& rng, std::size_t max_brands, int max_count,
                                double edge_probability = 0.6) {
  using namespace sizegraph;
  std::uniform_int_distribution<std::size_t> nb(2, max_brands);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> count(0, max_count);
  RandomWorld w;
  const std::size_t n = nb(rng);
  for (std::size_t i = 0; i < n; ++i) w.brands.push_back("B" + std::to_string(i));
  w.sizes = SizeGraph(testsupport::shoes());
  for (const auto& b : w.brands) w.sizes.add_vertex(b);
  std::map<std::pair<std::string, std::string>, double> sim;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sim[{w.brands[i], w.brands[j]}] = u01(rng);
      if (u01(rng) >= edge_probability) continue;
      for (int d = -2; d <= 2; ++d) {
        if (u01(rng) < 0.5) continue;
        const int c = count(rng);
        if (c > 0) w.sizes.add(w.brands[i], w.brands[j], d, c);
      }
    }
  }
  w.sims = BrandSimilarityGraph(testsupport::shoes(), w.brands, std::move(sim));
  return w;
}

}  // namespace testsupport
