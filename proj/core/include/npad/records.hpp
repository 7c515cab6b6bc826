#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace npad {

// One decode result:
// {"input_id", "strategy", "tokens", "logp", "complete", "steps", "seed"}
struct DecodeRecord {
  std::size_t input_id = 0;
  std::string strategy;
  std::vector<std::string> tokens;
  double logp = 0.0;
  bool complete = false;
  std::size_t steps = 0;
  std::optional<std::uint64_t> seed;  // null for deterministic strategies

  friend bool operator==(const DecodeRecord&, const DecodeRecord&) = default;
};

// One NPAD chain:
// {"input_id", "chain_index", "sigma0_effective", "tokens", "noisy_logp", "rescored_logp"}
struct ChainTraceRecord {
  std::size_t input_id = 0;
  std::size_t chain_index = 0;
  double sigma0_effective = 0.0;
  std::vector<std::string> tokens;
  double noisy_logp = 0.0;
  double rescored_logp = 0.0;

  friend bool operator==(const ChainTraceRecord&, const ChainTraceRecord&) = default;
};

std::string to_json_line(const DecodeRecord& record);
std::string to_json_line(const ChainTraceRecord& record);

DecodeRecord parse_decode_record(const std::string& line);
ChainTraceRecord parse_chain_trace_record(const std::string& line);

}  // namespace npad
