#include "npad/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "npad/errors.hpp"
#include "npad/model_io.hpp"
#include "npad/parallel.hpp"

namespace npad {

namespace {

constexpr double kReplayTolerance = 1e-9;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

std::string format_metric(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size() || v < 0) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + value + "'");
  }
}

double sort_key(const std::string& field) {
  if (field == "-") return -std::numeric_limits<double>::infinity();
  try {
    return std::stod(field);
  } catch (const std::exception&) {
    return 0.0;
  }
}

}  // namespace

Strategy parse_strategy(const std::string& name) {
  if (name == "greedy") return Strategy::greedy;
  if (name == "beam") return Strategy::beam;
  if (name == "sample") return Strategy::sample;
  if (name == "diverse") return Strategy::diverse;
  if (name == "npad") return Strategy::npad;
  if (name == "exact") return Strategy::exact;
  throw ConfigError("unknown strategy '" + name + "'");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::greedy: return "greedy";
    case Strategy::beam: return "beam";
    case Strategy::sample: return "sample";
    case Strategy::diverse: return "diverse";
    case Strategy::npad: return "npad";
    case Strategy::exact: return "exact";
  }
  return "?";
}

std::string Cell::label() const {
  if (strategy != Strategy::npad) return to_string(strategy);
  std::string out = "npad";
  if (inner == InnerKind::beam) out += "+beam";
  if (inner == InnerKind::sampling) out += "+sample";
  if (!zero_chain) out += "-pure";
  return out;
}

bool Cell::stochastic() const { return strategy == Strategy::sample || strategy == Strategy::npad; }

void Cell::validate() const {
  if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
  if (chains < 1) throw ConfigError("chains must be >= 1");
  if (sigma0 < 0.0) throw ConfigError("sigma0 must be >= 0");
  if (eta < 0.0) throw ConfigError("eta must be >= 0");
}

Cell parse_cell(const std::string& text) {
  std::istringstream in(text);
  std::string name;
  if (!(in >> name)) throw ConfigError("empty cell");
  Cell cell;
  cell.strategy = parse_strategy(name);
  for (std::string kv; in >> kv;) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("cell option '" + kv + "' is not key=value");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (key == "beam_width") {
      cell.beam_width = parse_size(key, value);
    } else if (key == "sigma0") {
      cell.sigma0 = parse_double(key, value);
    } else if (key == "chains") {
      cell.chains = parse_size(key, value);
    } else if (key == "eta") {
      cell.eta = parse_double(key, value);
    } else if (key == "inner") {
      cell.inner = parse_inner_kind(value);
    } else if (key == "zero_chain") {
      if (value != "true" && value != "false") throw ConfigError("zero_chain must be true|false");
      cell.zero_chain = value == "true";
    } else {
      throw ConfigError("unknown cell option '" + key + "'");
    }
  }
  if (cell.strategy == Strategy::npad && cell.inner == InnerKind::greedy) cell.beam_width = 1;
  cell.validate();
  return cell;
}

ExperimentSpec parse_experiment_spec(std::istream& in, const std::filesystem::path& base_dir) {
  ExperimentSpec spec;
  std::string line;
  std::size_t lineno = 0;
  auto resolve = [&](const std::string& value) {
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base_dir / p;
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      if (line.rfind("cell", 0) == 0 && (line.size() == 4 || line[4] == ' ' || line[4] == '\t')) {
        spec.cells.push_back(parse_cell(line.substr(4)));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("expected 'key = value' or 'cell ...'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key == "model") {
        spec.model = resolve(value);
      } else if (key == "vocab_src") {
        spec.vocab_src = resolve(value);
      } else if (key == "vocab_tgt") {
        spec.vocab_tgt = resolve(value);
      } else if (key == "test") {
        spec.test = resolve(value);
      } else if (key == "seed") {
        spec.base_seed = parse_size(key, value);
      } else if (key == "max_len") {
        spec.max_len = static_cast<int>(parse_size(key, value));
        if (*spec.max_len < 1) throw ConfigError("max_len must be >= 1");
      } else if (key == "layout") {
        spec.layout = value;
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } catch (const ConfigError& e) {
      throw ConfigError("spec line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (spec.model.empty() || spec.vocab_src.empty() || spec.vocab_tgt.empty() || spec.test.empty()) {
    throw ConfigError("spec must name model, vocab_src, vocab_tgt and test");
  }
  if (spec.cells.empty()) throw ConfigError("spec has no cells");
  return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open spec " + path.string());
  return parse_experiment_spec(in, path.parent_path());
}

std::uint64_t input_seed(std::uint64_t base_seed, std::size_t input_id) {
  return derive_seed(base_seed, 0x1000000ULL + input_id);
}

DecodeOutcome decode_with(const ModelParams& params, const EncodedSource& enc, const Cell& cell,
                          std::uint64_t seed, std::optional<int> max_len, std::size_t workers) {
  cell.validate();
  const DecodeLimits limits =
      max_len ? DecodeLimits{*max_len} : DecodeLimits::for_source(enc.source_len());
  DecodeOutcome out;
  bool replay_check = true;
  switch (cell.strategy) {
    case Strategy::greedy: {
      NoiseSource silent = NoiseSource::silent();
      out.hypothesis = greedy_decode(params, enc, silent, limits);
      break;
    }
    case Strategy::beam: {
      NoiseSource silent = NoiseSource::silent();
      out.hypothesis = beam_decode(params, enc, cell.beam_width, silent, limits).best;
      break;
    }
    case Strategy::diverse:
      out.hypothesis = diverse_beam_decode(params, enc, cell.beam_width, cell.eta, limits).best;
      break;
    case Strategy::exact:
      out.hypothesis = exact_decode(params, enc, limits);
      break;
    case Strategy::sample:
    case Strategy::npad: {
      NpadConfig cfg;
      cfg.chains = cell.chains;
      cfg.base_seed = seed;
      cfg.limits = limits;
      if (cell.strategy == Strategy::sample) {
        cfg.inner.kind = InnerKind::sampling;
        cfg.schedule.sigma0 = 0.0;
        cfg.include_zero_chain = false;
      } else {
        cfg.inner = {cell.inner, cell.beam_width};
        cfg.schedule.sigma0 = cell.sigma0;
        cfg.include_zero_chain = cell.zero_chain;
        replay_check = false;
      }
      NpadResult r = npad_decode(params, enc, cfg, workers);
      out.hypothesis = r.best.hypothesis;
      out.rescored_logp = r.best.rescored_logp;
      out.seed = seed;
      out.chains = std::move(r.chains);
      break;
    }
  }
  if (cell.strategy != Strategy::npad) out.rescored_logp = rescore(params, enc, out.hypothesis.tokens);
  if (replay_check && std::abs(out.rescored_logp - out.hypothesis.logp) > kReplayTolerance) {
    throw std::logic_error("replay mismatch: decoder logp " + format_metric(out.hypothesis.logp) +
                           " vs rescored " + format_metric(out.rescored_logp));
  }
  return out;
}

std::vector<EvalRecord> decode_corpus(const ModelParams& params,
                                      const std::vector<SequencePair>& data, const Cell& cell,
                                      std::uint64_t base_seed, std::optional<int> max_len,
                                      std::size_t workers) {
  std::vector<EvalRecord> records(data.size());
  parallel_for(data.size(), workers, [&](std::size_t i) {
    const EncodedSource enc = encode(params, data[i].source);
    DecodeOutcome d = decode_with(params, enc, cell, input_seed(base_seed, i), max_len, 1);
    records[i] = EvalRecord{i,
                            cell.label(),
                            std::move(d.hypothesis.tokens),
                            d.rescored_logp,
                            data[i].target,
                            d.hypothesis.complete};
  });
  return records;
}

ResultRow make_row(const Cell& cell, const std::vector<EvalRecord>& records) {
  ResultRow row;
  row.strategy = cell.label();
  row.beam_width = row.sigma0 = row.chains = row.eta = "-";
  switch (cell.strategy) {
    case Strategy::greedy:
      row.beam_width = "1";
      row.chains = "1";
      break;
    case Strategy::beam:
      row.beam_width = std::to_string(cell.beam_width);
      row.chains = "1";
      break;
    case Strategy::diverse:
      row.beam_width = std::to_string(cell.beam_width);
      row.chains = "1";
      row.eta = format_number(cell.eta);
      break;
    case Strategy::sample:
      row.chains = std::to_string(cell.chains);
      break;
    case Strategy::npad:
      if (cell.inner != InnerKind::sampling) row.beam_width = std::to_string(cell.beam_width);
      row.sigma0 = format_number(cell.sigma0);
      row.chains = std::to_string(cell.chains);
      break;
    case Strategy::exact:
      break;
  }
  row.mean_nll = mean_nll(records);
  row.mean_nll_per_token = mean_nll_per_token(records);
  std::vector<TokenSeq> hyps, refs;
  for (const auto& r : records) {
    hyps.push_back(strip_eos(r.tokens));
    refs.push_back(strip_eos(r.reference));
  }
  row.bleu = corpus_bleu(hyps, refs);
  return row;
}

ExperimentResult run_cells(const ModelParams& params, const std::vector<SequencePair>& test,
                           const std::vector<Cell>& cells, std::uint64_t base_seed,
                           std::optional<int> max_len, std::size_t workers) {
  ExperimentResult result;
  for (const Cell& cell : cells) {
    try {
      const auto records = decode_corpus(params, test, cell, base_seed, max_len, workers);
      result.rows.push_back(make_row(cell, records));
    } catch (const std::exception& e) {
      result.failures.push_back(cell.label() + ": " + e.what());
    }
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, std::size_t workers) {
  if (!spec.base_seed) throw ConfigError("experiment needs a seed (spec 'seed' or --seed)");
  const ModelParams params = load_model(spec.model);
  const Vocab src = Vocab::load(spec.vocab_src);
  const Vocab tgt = Vocab::load(spec.vocab_tgt);
  if (src.size() != params.dims.src_vocab || tgt.size() != params.dims.tgt_vocab) {
    throw FormatError("vocabulary sizes do not match the model header");
  }
  const auto test = read_dataset(spec.test, src, tgt);
  if (test.empty()) throw FormatError("test set " + spec.test.string() + " is empty");
  return run_cells(params, test, spec.cells, *spec.base_seed, spec.max_len, workers);
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << r.strategy << ',' << r.beam_width << ',' << r.sigma0 << ',' << r.chains << ',' << r.eta
        << ',' << format_metric(r.mean_nll) << ',' << format_metric(r.mean_nll_per_token) << ','
        << format_metric(r.bleu) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("results CSV is empty (missing header)");
  if (trim(line) != kResultsHeader) throw FormatError("results CSV header mismatch: '" + line + "'");
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    if (fields.size() != 8) {
      throw FormatError("results CSV line " + std::to_string(lineno) + ": expected 8 fields");
    }
    ResultRow r;
    r.strategy = fields[0];
    r.beam_width = fields[1];
    r.sigma0 = fields[2];
    r.chains = fields[3];
    r.eta = fields[4];
    try {
      r.mean_nll = std::stod(fields[5]);
      r.mean_nll_per_token = std::stod(fields[6]);
      r.bleu = std::stod(fields[7]);
    } catch (const std::exception&) {
      throw FormatError("results CSV line " + std::to_string(lineno) + ": bad metric value");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string render_report(const std::vector<ResultRow>& input) {
  std::vector<std::string> group_order;
  for (const auto& r : input) {
    if (std::find(group_order.begin(), group_order.end(), r.strategy) == group_order.end()) {
      group_order.push_back(r.strategy);
    }
  }
  std::vector<ResultRow> rows = input;
  auto group_of = [&](const ResultRow& r) {
    return std::find(group_order.begin(), group_order.end(), r.strategy) - group_order.begin();
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const ResultRow& a, const ResultRow& b) {
    const auto ga = group_of(a), gb = group_of(b);
    if (ga != gb) return ga < gb;
    const auto ka = std::make_tuple(sort_key(a.sigma0), sort_key(a.beam_width), sort_key(a.chains),
                                    sort_key(a.eta));
    const auto kb = std::make_tuple(sort_key(b.sigma0), sort_key(b.beam_width), sort_key(b.chains),
                                    sort_key(b.eta));
    return ka < kb;
  });

  struct Column {
    std::string title;
    std::vector<std::string> cells;
    bool optional;
  };
  std::vector<Column> cols = {{"Strategy", {}, false}, {"Beam", {}, true},     {"sigma0", {}, true},
                              {"Chains", {}, true},     {"eta", {}, true},      {"NLL ↓", {}, false},
                              {"NLL/tok ↓", {}, false}, {"BLEU ↑", {}, false}};
  for (const auto& r : rows) {
    char bleu[32];
    std::snprintf(bleu, sizeof(bleu), "%.2f", 100.0 * r.bleu);
    char nll[32], tok[32];
    std::snprintf(nll, sizeof(nll), "%.4f", r.mean_nll);
    std::snprintf(tok, sizeof(tok), "%.4f", r.mean_nll_per_token);
    const std::string values[] = {r.strategy, r.beam_width, r.sigma0, r.chains, r.eta, nll, tok, bleu};
    for (std::size_t c = 0; c < cols.size(); ++c) cols[c].cells.push_back(values[c]);
  }
  if (!rows.empty()) {
    std::erase_if(cols, [](const Column& c) {
      return c.optional && std::all_of(c.cells.begin(), c.cells.end(),
                                       [](const std::string& s) { return s == "-"; });
    });
  }

  auto display_width = [](const std::string& s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char ch) { return (static_cast<unsigned char>(ch) & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> widths;
  for (const auto& c : cols) {
    std::size_t w = display_width(c.title);
    for (const auto& s : c.cells) w = std::max(w, display_width(s));
    widths.push_back(w);
  }
  std::ostringstream out;
  auto emit_row = [&](auto&& cell_at) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::string s = cell_at(c);
      if (c) out << " | ";
      out << s;
      if (c + 1 < cols.size()) out << std::string(widths[c] - display_width(s), ' ');
    }
    out << '\n';
  };
  emit_row([&](std::size_t c) { return cols[c].title; });
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out << "-+-";
    out << std::string(widths[c], '-');
  }
  out << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r > 0 && rows[r].strategy != rows[r - 1].strategy) {
      out << '\n';
    }
    emit_row([&](std::size_t c) { return cols[c].cells[r]; });
  }
  return out.str();
}

}  // namespace npad
