#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "derprop/rng.hpp"
#include "derprop/tensor.hpp"

namespace derprop::testing {

inline Tensor random_tensor(std::vector<std::size_t> dims, std::uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(dims));
  CounterRng rng(seed);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

inline Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  return random_tensor({rows, cols}, seed, scale);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("derprop_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace derprop::testing
