#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "npad/vocab.hpp"

namespace npad {

struct SequencePair {
  TokenSeq source;
  TokenSeq target;  // ends with </s>

  friend bool operator==(const SequencePair&, const SequencePair&) = default;
};

enum class TaskKind { copy, reverse, lexical_translate };

TaskKind parse_task_kind(const std::string& name);
std::string to_string(TaskKind kind);

struct TaskConfig {
  TaskKind kind = TaskKind::copy;
  std::size_t src_content = 8;  // symbols excluding the reserved three
  std::size_t tgt_content = 8;
  std::size_t min_len = 1;
  std::size_t max_len = 10;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  // Seeds the lexical-translate bijection; kept apart from `seed` so that
  // separately generated sets share one translation table.
  std::uint64_t mapping_seed = 0x5eed;
};

// copy:              target = source
// reverse:           target = reverse(source)
// lexical_translate: target = reverse(map(source)), map a fixed random
//                    bijection from source to target content symbols
// Targets are terminated with </s>. Deterministic in the config.
std::vector<SequencePair> gen_task(const TaskConfig& cfg);

// Source-side bijection used by lexical_translate (content index -> content index).
std::vector<std::size_t> lexical_mapping(const TaskConfig& cfg);

struct DatasetSplits {
  std::vector<SequencePair> train;
  std::vector<SequencePair> valid;
  std::vector<SequencePair> test;
};

// Draws train, then valid, then test; a source already used by an earlier
// split is redrawn, so valid and test sources never occur in train or in each
// other.
DatasetSplits gen_splits(const TaskConfig& cfg, std::size_t n_train, std::size_t n_valid,
                         std::size_t n_test);

Vocab task_source_vocab(const TaskConfig& cfg);
Vocab task_target_vocab(const TaskConfig& cfg);

// Dataset file: UTF-8, one pair per line, source tokens space-separated, a
// tab, target tokens space-separated. The trailing </s> of targets is implied
// and not written; it is appended on read if absent.
std::vector<SequencePair> read_dataset(const std::filesystem::path& path, const Vocab& src,
                                       const Vocab& tgt);
void write_dataset(const std::filesystem::path& path, const std::vector<SequencePair>& pairs,
                   const Vocab& src, const Vocab& tgt);

// One input per line. If a line has a tab, the text before it is the source
// and the text after it (if any) is kept as the reference target.
struct SourceLine {
  TokenSeq source;
  TokenSeq reference;  // empty if the line had no target
};
std::vector<SourceLine> read_sources(const std::filesystem::path& path, const Vocab& src,
                                     const Vocab& tgt);

}  // namespace npad
