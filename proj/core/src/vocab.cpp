#include "npad/vocab.hpp"

#include <fstream>
#include <sstream>

#include "npad/errors.hpp"

namespace npad {

Vocab::Vocab(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.size() < 3 || symbols_[kPad] != kPadSymbol || symbols_[kBos] != kBosSymbol ||
      symbols_[kEos] != kEosSymbol) {
    throw VocabularyError("vocabulary must start with <pad>, <s>, </s>");
  }
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty()) throw VocabularyError("empty symbol at index " + std::to_string(i));
    if (!index_.emplace(symbols_[i], static_cast<TokenId>(i)).second) {
      throw VocabularyError("duplicate symbol '" + symbols_[i] + "'");
    }
  }
}

Vocab Vocab::with_content(const std::vector<std::string>& content) {
  std::vector<std::string> all{std::string(kPadSymbol), std::string(kBosSymbol),
                               std::string(kEosSymbol)};
  all.insert(all.end(), content.begin(), content.end());
  return Vocab(std::move(all));
}

Vocab Vocab::from_symbols(std::vector<std::string> symbols) { return Vocab(std::move(symbols)); }

Vocab Vocab::synthetic(std::size_t content_size, std::string_view prefix) {
  std::vector<std::string> content;
  content.reserve(content_size);
  for (std::size_t i = 0; i < content_size; ++i) content.push_back(std::string(prefix) + std::to_string(i));
  return with_content(content);
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw VocabularyError("cannot open vocabulary file " + path.string());
  std::vector<std::string> symbols;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    symbols.push_back(line);
  }
  return Vocab(std::move(symbols));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw VocabularyError("cannot write vocabulary file " + path.string());
  for (const auto& s : symbols_) out << s << '\n';
}

const std::string& Vocab::symbol(TokenId id) const {
  if (!contains(id)) throw VocabularyError("token index " + std::to_string(id) + " out of range");
  return symbols_[static_cast<std::size_t>(id)];
}

TokenId Vocab::index_of(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  if (it == index_.end()) throw VocabularyError("unknown token '" + std::string(symbol) + "'");
  return it->second;
}

TokenSeq Vocab::encode(const std::vector<std::string>& symbols) const {
  TokenSeq out;
  out.reserve(symbols.size());
  for (const auto& s : symbols) out.push_back(index_of(s));
  return out;
}

std::vector<std::string> Vocab::decode(const TokenSeq& tokens) const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) out.push_back(symbol(t));
  return out;
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

}  // namespace npad
