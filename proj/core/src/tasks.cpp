#include "npad/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "npad/errors.hpp"
#include "npad/model_io.hpp"
#include "npad/numeric.hpp"

namespace npad {

namespace {

constexpr TokenId kFirstContent = 3;

std::size_t uniform_index(RngStream& rng, std::size_t n) {
  const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
  return std::min(i, n - 1);
}

void validate(const TaskConfig& cfg) {
  if (cfg.src_content == 0 || cfg.tgt_content == 0) throw ConfigError("task vocabulary is empty");
  if (cfg.min_len < 1 || cfg.max_len > 20 || cfg.min_len > cfg.max_len) {
    throw ConfigError("task length range must satisfy 1 <= min_len <= max_len <= 20");
  }
  // Every task is a bijection on content symbols.
  if (cfg.src_content != cfg.tgt_content) {
    throw ConfigError("task needs equal source and target content vocabulary sizes");
  }
}

SequencePair make_pair(const TaskConfig& cfg, const std::vector<std::size_t>& mapping,
                       TokenSeq source) {
  TokenSeq target;
  target.reserve(source.size() + 1);
  switch (cfg.kind) {
    case TaskKind::copy:
      target = source;
      break;
    case TaskKind::reverse:
      target.assign(source.rbegin(), source.rend());
      break;
    case TaskKind::lexical_translate:
      for (auto it = source.rbegin(); it != source.rend(); ++it) {
        target.push_back(
            static_cast<TokenId>(mapping[static_cast<std::size_t>(*it - kFirstContent)]) +
            kFirstContent);
      }
      break;
  }
  target.push_back(Vocab::kEos);
  return {std::move(source), std::move(target)};
}

TokenSeq draw_source(const TaskConfig& cfg, RngStream& rng) {
  const std::size_t len = cfg.min_len + uniform_index(rng, cfg.max_len - cfg.min_len + 1);
  TokenSeq source(len);
  for (auto& tok : source) tok = static_cast<TokenId>(uniform_index(rng, cfg.src_content)) + kFirstContent;
  return source;
}

}  // namespace

TaskKind parse_task_kind(const std::string& name) {
  if (name == "copy") return TaskKind::copy;
  if (name == "reverse") return TaskKind::reverse;
  if (name == "lexical-translate" || name == "lexical_translate") return TaskKind::lexical_translate;
  throw ConfigError("unknown task kind '" + name + "'");
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::copy: return "copy";
    case TaskKind::reverse: return "reverse";
    case TaskKind::lexical_translate: return "lexical-translate";
  }
  return "?";
}

std::vector<std::size_t> lexical_mapping(const TaskConfig& cfg) {
  std::vector<std::size_t> mapping(cfg.src_content);
  for (std::size_t i = 0; i < mapping.size(); ++i) mapping[i] = i;
  RngStream rng(cfg.mapping_seed);
  for (std::size_t i = mapping.size(); i > 1; --i) {
    std::swap(mapping[i - 1], mapping[uniform_index(rng, i)]);
  }
  return mapping;
}

std::vector<SequencePair> gen_task(const TaskConfig& cfg) {
  validate(cfg);
  if (cfg.count < 1) throw ConfigError("task count must be >= 1");
  const auto mapping = lexical_mapping(cfg);
  RngStream rng(cfg.seed);
  std::vector<SequencePair> out;
  out.reserve(cfg.count);
  for (std::size_t n = 0; n < cfg.count; ++n) out.push_back(make_pair(cfg, mapping, draw_source(cfg, rng)));
  return out;
}

DatasetSplits gen_splits(const TaskConfig& cfg, std::size_t n_train, std::size_t n_valid,
                         std::size_t n_test) {
  validate(cfg);
  const auto mapping = lexical_mapping(cfg);
  RngStream rng(cfg.seed);
  std::set<TokenSeq> train_sources;
  std::set<TokenSeq> held_out;
  DatasetSplits splits;
  for (std::size_t n = 0; n < n_train; ++n) {
    TokenSeq src = draw_source(cfg, rng);
    train_sources.insert(src);
    splits.train.push_back(make_pair(cfg, mapping, std::move(src)));
  }
  auto fill = [&](std::vector<SequencePair>& dest, std::size_t count) {
    constexpr std::size_t kMaxAttempts = 1000;
    for (std::size_t n = 0; n < count; ++n) {
      std::size_t attempts = 0;
      TokenSeq src = draw_source(cfg, rng);
      while (train_sources.count(src) || held_out.count(src)) {
        if (++attempts > kMaxAttempts) {
          throw ConfigError("cannot draw enough distinct held-out sources; widen the task");
        }
        src = draw_source(cfg, rng);
      }
      held_out.insert(src);
      dest.push_back(make_pair(cfg, mapping, std::move(src)));
    }
  };
  fill(splits.valid, n_valid);
  fill(splits.test, n_test);
  return splits;
}

Vocab task_source_vocab(const TaskConfig& cfg) { return Vocab::synthetic(cfg.src_content, "s"); }

Vocab task_target_vocab(const TaskConfig& cfg) {
  return cfg.kind == TaskKind::lexical_translate ? Vocab::synthetic(cfg.tgt_content, "t")
                                                 : Vocab::synthetic(cfg.tgt_content, "s");
}

std::vector<SequencePair> read_dataset(const std::filesystem::path& path, const Vocab& src,
                                       const Vocab& tgt) {
  std::vector<SequencePair> out;
  for (auto& line : read_sources(path, src, tgt)) {
    if (line.reference.empty()) throw FormatError(path.string() + ": line without a target");
    out.push_back({std::move(line.source), std::move(line.reference)});
  }
  return out;
}

std::vector<SourceLine> read_sources(const std::filesystem::path& path, const Vocab& src,
                                     const Vocab& tgt) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<SourceLine> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    SourceLine entry;
    try {
      entry.source = src.encode(split_whitespace(line.substr(0, tab)));
      if (tab != std::string::npos) {
        entry.reference = tgt.encode(split_whitespace(line.substr(tab + 1)));
        if (entry.reference.empty() || entry.reference.back() != Vocab::kEos) {
          entry.reference.push_back(Vocab::kEos);
        }
      }
    } catch (const VocabularyError& e) {
      throw VocabularyError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (entry.source.empty()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": empty source");
    }
    out.push_back(std::move(entry));
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<SequencePair>& pairs,
                   const Vocab& src, const Vocab& tgt) {
  write_file_atomically(path, [&](std::ostream& out) {
    for (const auto& pair : pairs) {
      for (std::size_t i = 0; i < pair.source.size(); ++i) {
        out << (i ? " " : "") << src.symbol(pair.source[i]);
      }
      out << '\t';
      std::size_t n = pair.target.size();
      if (n > 0 && pair.target.back() == Vocab::kEos) --n;
      for (std::size_t i = 0; i < n; ++i) out << (i ? " " : "") << tgt.symbol(pair.target[i]);
      out << '\n';
    }
  });
}

}  // namespace npad
