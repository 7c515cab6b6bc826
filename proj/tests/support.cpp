#include "support.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace npad::testing {

ModelParams random_model(const ModelDims& dims, std::uint64_t seed, double scale) {
  RngStream rng(seed);
  ModelParams p = ModelParams::random_uniform(dims, rng, scale);
  p.for_each_tensor([&](const std::string& name, Mat& m) {
    if (!is_bias_tensor(name)) return;
    for (double& x : m.flat()) x = scale * (2.0 * rng.uniform() - 1.0);
  });
  return p;
}

TokenSeq random_source(std::size_t src_vocab, std::size_t max_len, std::uint64_t seed) {
  RngStream rng(seed);
  const std::size_t content = src_vocab - 3;
  const auto len = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_len));
  TokenSeq s;
  for (std::size_t i = 0; i < std::min(len, max_len); ++i) {
    const auto j = std::min(content - 1, static_cast<std::size_t>(rng.uniform() * content));
    s.push_back(static_cast<TokenId>(3 + j));
  }
  return s;
}

ModelParams garden_path_model() {
  const ModelDims dims{4, 5, 5, 6};
  ModelParams p = ModelParams::zeros(dims);
  constexpr double kEmbed = 5.0;
  for (std::size_t j = 0; j < 5; ++j) p.tgt_embed(j, j) = kEmbed;
  // z = 1 and r = 1: the new state is the candidate tanh(Wh x + Uh q + b).
  for (std::size_t k = 0; k < 6; ++k) {
    p.dec.bias_z(k, 0) = 40.0;
    p.dec.bias_r(k, 0) = 40.0;
  }
  for (std::size_t j = 0; j < 5; ++j) p.dec.wh(j, j) = 1.0;  // unit j <- previous token j
  p.dec.uh(5, 5) = 10.0;                                     // unit 5 <- perturbed state
  const auto A = static_cast<std::size_t>(kTokA);
  const auto B = static_cast<std::size_t>(kTokB);
  const auto eos = static_cast<std::size_t>(Vocab::kEos);
  const auto bos = static_cast<std::size_t>(Vocab::kBos);
  p.out_hidden(A, bos) = 1.0;
  p.out_hidden(B, bos) = 0.8;
  p.out_hidden(B, 5) = 3.0;
  p.out_hidden(eos, A) = 0.5;
  p.out_hidden(eos, B) = 5.0;
  // after </s> or <pad>, stop again
  p.out_hidden(eos, eos) = 5.0;
  p.out_hidden(eos, 0) = 5.0;
  return p;
}

ModelParams uniform_model(const ModelDims& dims) {
  ModelParams p = random_model(dims, 99, 0.5);
  p.out_hidden.fill(0.0);
  p.out_context.fill(0.0);
  p.out_bias.fill(0.0);
  return p;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("npad-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace npad::testing
