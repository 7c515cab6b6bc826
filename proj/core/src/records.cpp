#include "npad/records.hpp"

#include <json.hpp>

#include "npad/errors.hpp"

namespace npad {

using json = nlohmann::ordered_json;

std::string to_json_line(const DecodeRecord& r) {
  json j;
  j["input_id"] = r.input_id;
  j["strategy"] = r.strategy;
  j["tokens"] = r.tokens;
  j["logp"] = r.logp;
  j["complete"] = r.complete;
  j["steps"] = r.steps;
  j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
  return j.dump();
}

std::string to_json_line(const ChainTraceRecord& r) {
  json j;
  j["input_id"] = r.input_id;
  j["chain_index"] = r.chain_index;
  j["sigma0_effective"] = r.sigma0_effective;
  j["tokens"] = r.tokens;
  j["noisy_logp"] = r.noisy_logp;
  j["rescored_logp"] = r.rescored_logp;
  return j.dump();
}

DecodeRecord parse_decode_record(const std::string& line) {
  try {
    const json j = json::parse(line);
    DecodeRecord r;
    r.input_id = j.at("input_id").get<std::size_t>();
    r.strategy = j.at("strategy").get<std::string>();
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    r.logp = j.at("logp").get<double>();
    r.complete = j.at("complete").get<bool>();
    r.steps = j.at("steps").get<std::size_t>();
    if (!j.at("seed").is_null()) r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad decode record: ") + e.what());
  }
}

ChainTraceRecord parse_chain_trace_record(const std::string& line) {
  try {
    const json j = json::parse(line);
    ChainTraceRecord r;
    r.input_id = j.at("input_id").get<std::size_t>();
    r.chain_index = j.at("chain_index").get<std::size_t>();
    r.sigma0_effective = j.at("sigma0_effective").get<double>();
    r.tokens = j.at("tokens").get<std::vector<std::string>>();
    r.noisy_logp = j.at("noisy_logp").get<double>();
    r.rescored_logp = j.at("rescored_logp").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad chain trace record: ") + e.what());
  }
}

}  // namespace npad
