#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "slt/config.hpp"
#include "slt/rng.hpp"
#include "slt/tensor.hpp"

namespace slt::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("slt_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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
  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0, bool grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

// A ten-sentence corpus with one repetition each: big enough for every
// split, small enough to train in seconds.
inline CorpusConfig small_corpus() {
  CorpusConfig c;
  c.affirmative = 6;
  c.negative = 2;
  c.interrogative = 2;
  c.repetitions = 1;
  return c;
}

// Cheap model for pipeline tests: 16x16 frames are not supported by the
// corpus, so only the decoder is shrunk.
inline ModelConfig quick_model() {
  ModelConfig m;
  m.decoder_ff = 32;
  m.epochs = 2;
  m.max_decode_len = 10;
  return m;
}

}  // namespace slt::testing
