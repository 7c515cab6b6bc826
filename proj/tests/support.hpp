#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "npad/model.hpp"
#include "npad/tasks.hpp"

namespace npad::testing {

// Random model with weights uniform in [-scale, scale] and random biases of
// the same scale, so small vocabularies get peaked, varied distributions.
ModelParams random_model(const ModelDims& dims, std::uint64_t seed, double scale = 1.0);

// Random source of length in [1, max_len] over content symbols of `src_vocab`.
TokenSeq random_source(std::size_t src_vocab, std::size_t max_len, std::uint64_t seed);

// Garden-path model over target symbols <pad> <s> </s> A B (A = 3, B = 4),
// d_emb = 5, d_hid = 6:
//   step 1 slightly prefers A over B,
//   after A the next distribution is nearly flat (</s> only mildly preferred),
//   after B </s> is almost certain.
// So greedy returns [A, </s>] while the most probable sequence is [B, </s>].
// Hidden unit 5 is driven only by the perturbed previous state and raises B's
// logit, so noise can flip the first choice.
ModelParams garden_path_model();
inline constexpr TokenId kTokA = 3;
inline constexpr TokenId kTokB = 4;

// Zero-readout model: every step is uniform over the target vocabulary.
ModelParams uniform_model(const ModelDims& dims);

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace npad::testing
