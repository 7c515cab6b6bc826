#pragma once

// Experiment harness: decodes a test set under a list of strategy cells and
// reports mean sentence NLL, NLL per token and BLEU for each.
//
// Spec file (one directive per line, '#' starts a comment, relative paths are
// resolved against the spec file's directory):
//
//   model     = path/to/model.bin
//   vocab_src = path/to/src.vocab
//   vocab_tgt = path/to/tgt.vocab
//   test      = path/to/test.tsv
//   seed      = 7                     # base seed, overridable from the CLI
//   max_len   = 25                    # optional; default 2 * source_len + 5
//   layout    = noise                 # optional label: noise | chains | npad_beam | diverse
//   cell greedy
//   cell beam beam_width=5
//   cell sample chains=50
//   cell npad inner=greedy sigma0=0.3 chains=50
//   cell npad inner=beam beam_width=10 sigma0=0.1 chains=10 zero_chain=false
//   cell diverse beam_width=5 eta=0.1
//   cell exact
//
// A "sample" cell with chains=M draws M ancestral samples per input and keeps
// the most probable one.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "npad/eval.hpp"
#include "npad/model.hpp"
#include "npad/npad.hpp"
#include "npad/tasks.hpp"

namespace npad {

enum class Strategy { greedy, beam, sample, diverse, npad, exact };

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy s);

struct Cell {
  Strategy strategy = Strategy::greedy;
  std::size_t beam_width = 1;
  double sigma0 = 0.0;
  std::size_t chains = 1;
  double eta = 0.0;
  InnerKind inner = InnerKind::greedy;  // npad only
  bool zero_chain = true;               // npad only

  // Label in the results table: greedy, beam, sample, diverse, exact, npad
  // (greedy inner), npad+beam, npad+sample; "-pure" marks npad without the
  // zero-noise chain.
  std::string label() const;
  bool stochastic() const;
  // Throws ConfigError on an invalid combination.
  void validate() const;
};

// Parses "greedy" or "npad inner=beam beam_width=5 sigma0=0.1 chains=10".
Cell parse_cell(const std::string& text);

struct ExperimentSpec {
  std::filesystem::path model;
  std::filesystem::path vocab_src;
  std::filesystem::path vocab_tgt;
  std::filesystem::path test;
  std::optional<std::uint64_t> base_seed;  // required before running
  std::optional<int> max_len;
  std::string layout;
  std::vector<Cell> cells;
};

ExperimentSpec parse_experiment_spec(std::istream& in, const std::filesystem::path& base_dir);
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct DecodeOutcome {
  Hypothesis hypothesis;
  double rescored_logp = 0.0;
  std::optional<std::uint64_t> seed;
  std::vector<ChainResult> chains;  // npad and sample cells
};

// Seed used for input `input_id` of a corpus decode.
std::uint64_t input_seed(std::uint64_t base_seed, std::size_t input_id);

// Decodes one source under `cell`. `seed` feeds the stochastic strategies;
// `workers` parallelises chains. Non-noisy strategies are replay-checked
// against score_sequence (std::logic_error on a mismatch beyond 1e-9).
DecodeOutcome decode_with(const ModelParams& params, const EncodedSource& enc, const Cell& cell,
                          std::uint64_t seed, std::optional<int> max_len, std::size_t workers = 1);

// Decodes every pair's source; reference = pair target. Inputs are spread over
// `workers` threads and the records come back in input order.
std::vector<EvalRecord> decode_corpus(const ModelParams& params,
                                      const std::vector<SequencePair>& data, const Cell& cell,
                                      std::uint64_t base_seed, std::optional<int> max_len,
                                      std::size_t workers = 1);

struct ResultRow {
  std::string strategy;
  std::string beam_width;  // "-" when not applicable
  std::string sigma0;
  std::string chains;
  std::string eta;
  double mean_nll = 0.0;
  double mean_nll_per_token = 0.0;
  double bleu = 0.0;
};

ResultRow make_row(const Cell& cell, const std::vector<EvalRecord>& records);

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<std::string> failures;  // one diagnostic per failed cell
};

ExperimentResult run_cells(const ModelParams& params, const std::vector<SequencePair>& test,
                           const std::vector<Cell>& cells, std::uint64_t base_seed,
                           std::optional<int> max_len, std::size_t workers = 1);

ExperimentResult run_experiment(const ExperimentSpec& spec, std::size_t workers = 1);

inline constexpr const char* kResultsHeader =
    "strategy,beam_width,sigma0,chains,eta,mean_nll,mean_nll_per_token,bleu";

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(std::istream& in);

// Plain-text table: rows grouped by strategy in order of first appearance,
// sorted by sigma0 (then beam width, chains, eta) inside each group. Columns
// that are "-" in every row are omitted. BLEU is shown x100.
std::string render_report(const std::vector<ResultRow>& rows);

}  // namespace npad
