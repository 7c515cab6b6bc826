#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "npad/errors.hpp"
#include "npad/experiment.hpp"
#include "npad/model_io.hpp"
#include "npad/parallel.hpp"
#include "npad/records.hpp"
#include "npad/tasks.hpp"
#include "npad/training.hpp"

namespace npad::cli {

namespace {

namespace fs = std::filesystem;

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

// Writes through a temporary file unless `path` is empty, in which case the
// text goes to `out`.
void emit(const std::string& path, std::ostream& out, const std::string& text) {
  if (path.empty()) {
    out << text;
    out.flush();
    return;
  }
  write_file_atomically(path, [&](std::ostream& f) { f << text; });
}

void require_file(const std::string& flag, const std::string& path) {
  if (path.empty()) throw ConfigError(flag + " is required");
  if (!fs::is_regular_file(path)) throw FormatError("cannot open " + flag + " file '" + path + "'");
}

struct LoadedModel {
  ModelParams params;
  Vocab src;
  Vocab tgt;
};

LoadedModel load_bundle(const std::string& model, const std::string& vocab_src,
                        const std::string& vocab_tgt) {
  LoadedModel m{load_model(model), Vocab::load(vocab_src), Vocab::load(vocab_tgt)};
  if (m.src.size() != m.params.dims.src_vocab || m.tgt.size() != m.params.dims.tgt_vocab) {
    throw FormatError("vocabulary sizes (" + std::to_string(m.src.size()) + ", " +
                      std::to_string(m.tgt.size()) + ") do not match the model header (" +
                      std::to_string(m.params.dims.src_vocab) + ", " +
                      std::to_string(m.params.dims.tgt_vocab) + ")");
  }
  return m;
}

struct Common {
  std::string model, vocab_src, vocab_tgt, input, output;
  std::optional<std::uint64_t> seed;
  std::size_t workers = default_workers();
};

void add_model_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--model", c.model, "Model file");
  cmd->add_option("--vocab-src", c.vocab_src, "Source vocabulary (one symbol per line)");
  cmd->add_option("--vocab-tgt", c.vocab_tgt, "Target vocabulary (one symbol per line)");
}

void check_model_flags(const Common& c) {
  require_file("--model", c.model);
  require_file("--vocab-src", c.vocab_src);
  require_file("--vocab-tgt", c.vocab_tgt);
}

struct GenDataOpts {
  std::string task = "reverse";
  std::size_t src_content = 8, tgt_content = 8, min_len = 3, max_len = 8;
  std::size_t n_train = 2000, n_valid = 200, n_test = 200;
  std::string output;
  std::optional<std::uint64_t> seed;
};

int run_gen_data(const GenDataOpts& o) {
  if (!o.seed) throw ConfigError("--seed is required");
  if (o.output.empty()) throw ConfigError("--output (directory) is required");
  TaskConfig cfg;
  cfg.kind = parse_task_kind(o.task);
  cfg.src_content = o.src_content;
  cfg.tgt_content = o.tgt_content;
  cfg.min_len = o.min_len;
  cfg.max_len = o.max_len;
  cfg.seed = *o.seed;
  const DatasetSplits splits = gen_splits(cfg, o.n_train, o.n_valid, o.n_test);
  const Vocab src = task_source_vocab(cfg);
  const Vocab tgt = task_target_vocab(cfg);
  const fs::path dir(o.output);
  fs::create_directories(dir);
  src.save(dir / "src.vocab");
  tgt.save(dir / "tgt.vocab");
  write_dataset(dir / "train.tsv", splits.train, src, tgt);
  write_dataset(dir / "valid.tsv", splits.valid, src, tgt);
  write_dataset(dir / "test.tsv", splits.test, src, tgt);
  return 0;
}

struct TrainOpts {
  Common c;
  std::string train, valid, trace;
  std::size_t d_emb = 16, d_hid = 32;
  TrainConfig cfg;
  std::string optimizer = "adam";
};

int run_train(TrainOpts& o, std::ostream& err) {
  if (!o.c.seed) throw ConfigError("--seed is required");
  if (o.c.output.empty()) throw ConfigError("--output (model file) is required");
  require_file("--train", o.train);
  require_file("--valid", o.valid);
  require_file("--vocab-src", o.c.vocab_src);
  require_file("--vocab-tgt", o.c.vocab_tgt);
  if (o.d_emb < 1 || o.d_hid < 1) throw ConfigError("--d-emb and --d-hid must be >= 1");
  o.cfg.optimizer = parse_optimizer(o.optimizer);
  o.cfg.seed = *o.c.seed;
  o.cfg.workers = o.c.workers;
  if (o.cfg.epochs < 1) throw ConfigError("--epochs must be >= 1");
  if (o.cfg.clip_norm <= 0.0) throw ConfigError("--clip-norm must be positive");

  const Vocab src = Vocab::load(o.c.vocab_src);
  const Vocab tgt = Vocab::load(o.c.vocab_tgt);
  const auto train_set = read_dataset(o.train, src, tgt);
  const auto valid_set = read_dataset(o.valid, src, tgt);
  ModelDims dims{src.size(), tgt.size(), o.d_emb, o.d_hid};
  RngStream init_rng(derive_seed(*o.c.seed, 0xA11CEULL));
  const ModelParams init = ModelParams::random_uniform(dims, init_rng);
  const TrainResult result = train(init, train_set, valid_set, o.cfg, [&](const EpochStats& s) {
    err << "epoch " << s.epoch << " train_nll " << s.train_nll << " valid_nll " << s.valid_nll
        << '\n';
  });
  save_model(o.c.output, result.params);
  if (!o.trace.empty()) write_loss_trace(o.trace, result.trace);
  return 0;
}

struct DecodeOpts {
  Common c;
  std::string strategy = "greedy";
  std::string inner = "greedy";
  std::size_t beam_width = 1;
  double sigma0 = 0.0;
  std::size_t chains = 1;
  double eta = 0.0;
  std::optional<int> max_len;
  bool no_zero_chain = false;
  std::string trace;
};

int run_decode(const DecodeOpts& o, std::ostream& out) {
  Cell cell;
  cell.strategy = parse_strategy(o.strategy);
  cell.beam_width = o.beam_width;
  cell.sigma0 = o.sigma0;
  cell.chains = o.chains;
  cell.eta = o.eta;
  cell.inner = parse_inner_kind(o.inner);
  cell.zero_chain = !o.no_zero_chain;
  if (cell.strategy == Strategy::npad && cell.inner == InnerKind::greedy) cell.beam_width = 1;
  cell.validate();
  if (o.max_len && *o.max_len < 1) throw ConfigError("--max-len must be >= 1");
  if (cell.stochastic() && !o.c.seed) throw ConfigError("--seed is required for " + o.strategy);
  if (!o.trace.empty() && !cell.stochastic()) {
    throw ConfigError("--trace applies to npad and sample only");
  }
  check_model_flags(o.c);
  require_file("--input", o.c.input);

  const LoadedModel m = load_bundle(o.c.model, o.c.vocab_src, o.c.vocab_tgt);
  const auto sources = read_sources(o.c.input, m.src, m.tgt);
  const std::uint64_t base = o.c.seed.value_or(0);

  std::ostringstream lines, trace;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const EncodedSource enc = encode(m.params, sources[i].source);
    const std::uint64_t seed = input_seed(base, i);
    const DecodeOutcome d = decode_with(m.params, enc, cell, seed, o.max_len, o.c.workers);
    DecodeRecord rec;
    rec.input_id = i;
    rec.strategy = cell.label();
    rec.tokens = m.tgt.decode(d.hypothesis.tokens);
    rec.logp = d.rescored_logp;
    rec.complete = d.hypothesis.complete;
    rec.steps = d.hypothesis.tokens.size();
    if (cell.stochastic()) rec.seed = seed;
    lines << to_json_line(rec) << '\n';
    for (const auto& ch : d.chains) {
      ChainTraceRecord t{i,
                         ch.chain_index,
                         ch.sigma0_effective,
                         m.tgt.decode(ch.hypothesis.tokens),
                         ch.noisy_logp,
                         ch.rescored_logp};
      trace << to_json_line(t) << '\n';
    }
  }
  emit(o.c.output, out, lines.str());
  if (!o.trace.empty()) emit(o.trace, out, trace.str());
  return 0;
}

int run_score(const Common& c, std::ostream& out) {
  check_model_flags(c);
  require_file("--input", c.input);
  const LoadedModel m = load_bundle(c.model, c.vocab_src, c.vocab_tgt);
  const auto pairs = read_dataset(c.input, m.src, m.tgt);
  std::ostringstream lines;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double logp = score_sequence(m.params, pairs[i].source, pairs[i].target);
    nlohmann::ordered_json j;
    j["input_id"] = i;
    j["logp"] = logp;
    j["tokens"] = pairs[i].target.size();
    lines << j.dump() << '\n';
  }
  emit(c.output, out, lines.str());
  return 0;
}

int run_experiment_cmd(const Common& c, const std::string& spec_path, std::ostream& out,
                       std::ostream& err) {
  require_file("--spec", spec_path);
  ExperimentSpec spec = load_experiment_spec(spec_path);
  if (c.seed) spec.base_seed = c.seed;
  if (!spec.base_seed) throw ConfigError("--seed is required (the spec sets no seed)");
  require_file("model", spec.model.string());
  require_file("vocab_src", spec.vocab_src.string());
  require_file("vocab_tgt", spec.vocab_tgt.string());
  require_file("test", spec.test.string());
  const ExperimentResult result = run_experiment(spec, c.workers);
  std::ostringstream csv;
  write_results_csv(csv, result.rows);
  emit(c.output, out, csv.str());
  for (const auto& f : result.failures) err << "error: cell failed: " << f << '\n';
  return result.failures.empty() ? 0 : kRuntimeError;
}

int run_report(const Common& c, std::ostream& out) {
  require_file("--input", c.input);
  std::ifstream in(c.input);
  const auto rows = read_results_csv(in);
  emit(c.output, out, render_report(rows));
  return 0;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"npad: noisy parallel approximate decoding for GRU attention models"};
  app.require_subcommand(1);

  GenDataOpts gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic task with train/valid/test splits");
  gen_cmd->add_option("--task", gen.task, "copy | reverse | lexical-translate");
  gen_cmd->add_option("--src-content", gen.src_content, "Source content symbols");
  gen_cmd->add_option("--tgt-content", gen.tgt_content, "Target content symbols");
  gen_cmd->add_option("--min-len", gen.min_len, "Shortest source");
  gen_cmd->add_option("--max-len", gen.max_len, "Longest source");
  gen_cmd->add_option("--train", gen.n_train, "Training pairs");
  gen_cmd->add_option("--valid", gen.n_valid, "Validation pairs");
  gen_cmd->add_option("--test", gen.n_test, "Test pairs");
  gen_cmd->add_option("--seed", gen.seed, "Data seed");
  gen_cmd->add_option("--output", gen.output, "Output directory");

  TrainOpts tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model by maximum likelihood");
  train_cmd->add_option("--train", tr.train, "Training TSV");
  train_cmd->add_option("--valid", tr.valid, "Validation TSV");
  train_cmd->add_option("--vocab-src", tr.c.vocab_src, "Source vocabulary");
  train_cmd->add_option("--vocab-tgt", tr.c.vocab_tgt, "Target vocabulary");
  train_cmd->add_option("--d-emb", tr.d_emb, "Embedding size");
  train_cmd->add_option("--d-hid", tr.d_hid, "Hidden size");
  train_cmd->add_option("--epochs", tr.cfg.epochs, "Epochs");
  train_cmd->add_option("--batch-size", tr.cfg.batch_size, "Minibatch size");
  train_cmd->add_option("--lr", tr.cfg.learning_rate, "Learning rate");
  train_cmd->add_option("--lr-decay", tr.cfg.lr_decay, "Per-epoch learning-rate factor");
  train_cmd->add_option("--optimizer", tr.optimizer, "adam | sgd");
  train_cmd->add_option("--clip-norm", tr.cfg.clip_norm, "Global gradient-norm threshold");
  train_cmd->add_option("--patience", tr.cfg.patience, "Early-stop patience (0 = off)");
  train_cmd->add_option("--seed", tr.c.seed, "Initialisation and shuffling seed");
  train_cmd->add_option("--workers", tr.c.workers, "Gradient worker threads");
  train_cmd->add_option("--output", tr.c.output, "Model file to write");
  train_cmd->add_option("--trace", tr.trace, "Loss trace CSV to write");

  DecodeOpts dec;
  auto* decode_cmd = app.add_subcommand("decode", "Decode sources to JSON lines");
  add_model_flags(decode_cmd, dec.c);
  decode_cmd->add_option("--strategy", dec.strategy, "greedy | beam | sample | diverse | npad | exact");
  decode_cmd->add_option("--inner", dec.inner, "NPAD inner decoder: greedy | beam | sample");
  decode_cmd->add_option("--beam-width", dec.beam_width, "Beam width");
  decode_cmd->add_option("--sigma0", dec.sigma0, "Initial noise level");
  decode_cmd->add_option("--chains", dec.chains, "NPAD chains / samples");
  decode_cmd->add_option("--eta", dec.eta, "Diverse-decoding penalty");
  decode_cmd->add_flag("--no-zero-chain", dec.no_zero_chain, "Run every NPAD chain with noise");
  decode_cmd->add_option("--seed", dec.c.seed, "Base seed (required for sample and npad)");
  decode_cmd->add_option("--workers", dec.c.workers, "Chain worker threads");
  decode_cmd->add_option("--max-len", dec.max_len, "Decode length bound (default 2*len+5)");
  decode_cmd->add_option("--input", dec.c.input, "Source file (TSV, target column optional)");
  decode_cmd->add_option("--output", dec.c.output, "JSON-lines output (default stdout)");
  decode_cmd->add_option("--trace", dec.trace, "Per-chain JSON-lines trace");

  Common sc;
  auto* score_cmd = app.add_subcommand("score", "Score source/target pairs under the model");
  add_model_flags(score_cmd, sc);
  score_cmd->add_option("--input", sc.input, "Dataset TSV");
  score_cmd->add_option("--output", sc.output, "JSON-lines output (default stdout)");

  Common ex;
  std::string spec_path;
  auto* exp_cmd = app.add_subcommand("experiment", "Run an experiment spec to a results CSV");
  exp_cmd->add_option("--spec", spec_path, "Experiment spec file");
  exp_cmd->add_option("--seed", ex.seed, "Base seed (overrides the spec)");
  exp_cmd->add_option("--workers", ex.workers, "Worker threads");
  exp_cmd->add_option("--output", ex.output, "Results CSV (default stdout)");

  Common rep;
  auto* report_cmd = app.add_subcommand("report", "Render a results CSV as a text table");
  report_cmd->add_option("--input", rep.input, "Results CSV");
  report_cmd->add_option("--output", rep.output, "Text output (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << one_line(e.what()) << '\n';
    return kUsageError;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(tr, err);
    if (*decode_cmd) return run_decode(dec, out);
    if (*score_cmd) return run_score(sc, out);
    if (*exp_cmd) return run_experiment_cmd(ex, spec_path, out, err);
    if (*report_cmd) return run_report(rep, out);
  } catch (const ConfigError& e) {
    err << "config error: " << one_line(e.what()) << '\n';
    return kUsageError;
  } catch (const ContractViolation& e) {
    err << "invalid argument: " << one_line(e.what()) << '\n';
    return kUsageError;
  } catch (const FormatError& e) {
    err << "file error: " << one_line(e.what()) << '\n';
    return kRuntimeError;
  } catch (const VocabularyError& e) {
    err << "vocabulary error: " << one_line(e.what()) << '\n';
    return kRuntimeError;
  } catch (const SearchSpaceError& e) {
    err << "search space error: " << one_line(e.what()) << '\n';
    return kRuntimeError;
  } catch (const TrainingDivergence& e) {
    err << "training diverged: " << one_line(e.what()) << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace npad::cli
