#include "npad/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "npad/errors.hpp"

namespace npad {

static_assert(std::endian::native == std::endian::little,
              "model container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'N', 'P', 'A', 'D', 'M', 'O', 'D', 'L'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw FormatError(std::string("model file truncated while reading ") + what);
  }
  return value;
}

}  // namespace

void write_model(std::ostream& out, const ModelParams& params) {
  params.validate();
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kModelFormatVersion);
  put<std::uint64_t>(out, params.dims.src_vocab);
  put<std::uint64_t>(out, params.dims.tgt_vocab);
  put<std::uint64_t>(out, params.dims.d_emb);
  put<std::uint64_t>(out, params.dims.d_hid);
  std::uint32_t count = 0;
  params.for_each_tensor([&](const std::string&, const Mat&) { ++count; });
  put<std::uint32_t>(out, count);
  params.for_each_tensor([&](const std::string& name, const Mat& m) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, m.rows());
    put<std::uint64_t>(out, m.cols());
    out.write(reinterpret_cast<const char*>(m.flat().data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  });
  if (!out) throw FormatError("failed writing model container");
}

ModelParams read_model(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a model file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version));
  }
  ModelDims dims;
  dims.src_vocab = get<std::uint64_t>(in, "header");
  dims.tgt_vocab = get<std::uint64_t>(in, "header");
  dims.d_emb = get<std::uint64_t>(in, "header");
  dims.d_hid = get<std::uint64_t>(in, "header");
  if (dims.src_vocab < 3 || dims.tgt_vocab < 3 || dims.d_emb == 0 || dims.d_hid == 0 ||
      dims.src_vocab > (1u << 24) || dims.tgt_vocab > (1u << 24) || dims.d_emb > 65536 ||
      dims.d_hid > 65536) {
    throw FormatError("model header has implausible dimensions");
  }
  const auto count = get<std::uint32_t>(in, "tensor count");

  std::map<std::string, Mat> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in, "tensor name length");
    if (name_len == 0 || name_len > 256) throw FormatError("bad tensor name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw FormatError("model file truncated in tensor name");
    const auto rows = get<std::uint64_t>(in, "tensor rows");
    const auto cols = get<std::uint64_t>(in, "tensor cols");
    if (rows > (1u << 24) || cols > (1u << 24) || rows * cols > (1ull << 30)) {
      throw FormatError("tensor " + name + " has implausible shape");
    }
    std::vector<double> data(rows * cols);
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw FormatError("model file truncated in tensor " + name);
    }
    if (!tensors.emplace(name, Mat(rows, cols, std::move(data))).second) {
      throw FormatError("duplicate tensor " + name);
    }
  }

  ModelParams params = ModelParams::zeros(dims);
  std::size_t matched = 0;
  params.for_each_tensor([&](const std::string& name, Mat& m) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("model file is missing tensor " + name);
    if (!it->second.same_shape(m)) throw FormatError("tensor " + name + " has the wrong shape");
    m = std::move(it->second);
    ++matched;
  });
  if (matched != tensors.size()) throw FormatError("model file contains unknown tensors");
  try {
    params.validate();
  } catch (const ContractViolation& e) {
    throw FormatError(e.what());
  }
  return params;
}

void save_model(const std::filesystem::path& path, const ModelParams& params) {
  write_file_atomically(path, [&](std::ostream& out) { write_model(out, params); }, true);
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string());
  return read_model(in);
}

void write_file_atomically(const std::filesystem::path& path,
                           const std::function<void(std::ostream&)>& writer, bool binary) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    try {
      writer(out);
      out.flush();
      if (!out) throw FormatError("write to " + tmp.string() + " failed");
    } catch (...) {
      out.close();
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw;
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace npad
