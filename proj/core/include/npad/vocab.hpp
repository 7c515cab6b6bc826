#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace npad {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Symbol table. Indices 0, 1, 2 are always <pad>, <s>, </s>; the vocab file
// format is one symbol per line with index == line number.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr std::string_view kPadSymbol = "<pad>";
  static constexpr std::string_view kBosSymbol = "<s>";
  static constexpr std::string_view kEosSymbol = "</s>";

  // Reserved symbols followed by `content`.
  static Vocab with_content(const std::vector<std::string>& content);
  // Full symbol list; must start with the reserved symbols.
  static Vocab from_symbols(std::vector<std::string> symbols);
  // Reserved symbols followed by `prefix`0 .. `prefix`(n-1).
  static Vocab synthetic(std::size_t content_size, std::string_view prefix);

  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(TokenId id) const;
  TokenId index_of(std::string_view symbol) const;
  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < size(); }

  TokenSeq encode(const std::vector<std::string>& symbols) const;
  std::vector<std::string> decode(const TokenSeq& tokens) const;

  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  explicit Vocab(std::vector<std::string> symbols);

  std::vector<std::string> symbols_;
  std::unordered_map<std::string, TokenId> index_;
};

std::vector<std::string> split_whitespace(std::string_view line);

}  // namespace npad
