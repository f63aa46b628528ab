#include "swt/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "swt/analysis.hpp"
#include "swt/corpus_io.hpp"
#include "swt/error.hpp"
#include "swt/file_util.hpp"
#include "swt/masker.hpp"
#include "swt/synth.hpp"
#include "swt/trainer.hpp"
#include "swt/wsd.hpp"

namespace swt::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

void require_inputs(std::initializer_list<const std::string*> paths) {
  for (const auto* p : paths) {
    if (p && !p->empty() && !fs::is_regular_file(*p)) throw Error("input file not found: " + *p);
  }
}

template <typename Writer>
void write_output(const std::string& path, std::ostream& fallback, Writer&& writer) {
  if (path.empty() || path == "-") {
    writer(fallback);
  } else {
    write_atomically(path, [&](std::ostream& o) { writer(o); });
  }
}

struct RuleOptions {
  std::optional<double> percent;
  std::optional<double> tau;

  void attach(CLI::App* sub, double default_percent = 0.05) {
    percent_default = default_percent;
    auto* p = sub->add_option("--percent", percent, "Mask the lowest fraction of dims (percentile rule)")
                  ->check(CLI::Range(0.0, 1.0));
    auto* t = sub->add_option("--tau", tau, "Mask dims whose weight is below this value");
    p->excludes(t);
  }
  MaskRule rule() const { return tau ? MaskRule::absolute(*tau) : MaskRule::percentile(percent.value_or(percent_default)); }

  double percent_default = 0.05;
};

void print_diagnostics(std::ostream& err, const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) err << "warning: " << d.sense_id << ": " << d.message << '\n';
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  SynthConfig config;
  std::string out_dir;
  std::string format = "jsonl";
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* s = app.add_subcommand("synth", "Generate a synthetic corpus with planted signal dims");
  s->add_option("--out-dir", a.out_dir, "Output directory")->required();
  s->add_option("--groups", a.config.n_groups, "Number of senses");
  s->add_option("--group-size", a.config.group_size, "Members per sense (train + test)");
  s->add_option("--dim", a.config.dim, "Embedding dimension");
  s->add_option("--signal-dims", a.config.signal_dims, "Signal dims per sense");
  s->add_option("--mu", a.config.signal_strength, "Signal mean offset");
  s->add_option("--sigma", a.config.noise_sigma, "Noise standard deviation");
  s->add_option("--depth", a.config.taxonomy_depth, "Taxonomy depth");
  s->add_option("--test-fraction", a.config.test_fraction, "Fraction of each group held out unlabeled");
  s->add_option("--seed", a.config.seed, "Random seed");
  s->add_flag("--aligned", a.config.taxonomy_aligned, "Derive signal dims from the taxonomy path");
  s->add_option("--format", a.format, "jsonl or packed")->check(CLI::IsMember({"jsonl", "packed"}));
}

int run_synth(const SynthArgs& a, std::ostream& out) {
  const auto corpus = generate_synthetic(a.config);
  write_synthetic(a.out_dir, corpus, parse_format(a.format));
  out << "synth: " << corpus.train.records.size() << " labeled, " << corpus.test.records.size() << " test records, "
      << corpus.truth.signal_dims.size() << " senses -> " << a.out_dir << '\n';
  return 0;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  TrainConfig config;
  std::string embeddings;
  std::string out;
  std::string objective = "sum";
  std::string sign = "corrected";
  std::string update = "standard";
  unsigned threads = 1;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* s = app.add_subcommand("train", "Learn per-sense dimension weights");
  s->add_option("--embeddings", a.embeddings, "Labeled embeddings (jsonl or packed)")->required();
  s->add_option("--out", a.out, "weights.jsonl output")->required();
  s->add_option("--lr", a.config.learning_rate, "Learning rate");
  s->add_option("--epochs", a.config.epochs, "Epochs per group");
  s->add_option("--explore-epochs", a.config.explore_epochs, "Uniform-mask epochs before the policy phase");
  s->add_option("--alpha", a.config.alpha, "Exploration probability in the policy phase");
  s->add_option("--mask-fraction", a.config.mask_fraction, "Fraction of dims masked per epoch");
  s->add_option("--l1", a.config.l1, "l1 coefficient");
  s->add_option("--eps", a.config.epsilon, "AdaGrad epsilon");
  s->add_option("--seed", a.config.seed, "Random seed");
  s->add_option("--init-weight", a.config.init_weight, "Initial weight");
  s->add_option("--objective", a.objective, "sum or mean")->check(CLI::IsMember({"sum", "mean"}));
  s->add_option("--sign", a.sign, "corrected or literal")->check(CLI::IsMember({"corrected", "literal"}));
  s->add_option("--update", a.update, "standard or literal AdaGrad update")
      ->check(CLI::IsMember({"standard", "literal"}));
  s->add_option("--threads", a.threads, "Worker threads (0 = all cores)");
}

int run_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  require_inputs({&a.embeddings});
  a.config.objective = parse_objective(a.objective);
  a.config.sign = parse_sign(a.sign);
  a.config.update = parse_update(a.update);
  a.config.validate();
  const auto set = load_embeddings(a.embeddings);
  const auto groups = group_by_sense(set);
  const auto result = train_all(groups, a.config, a.threads);
  print_diagnostics(err, result.diagnostics);
  write_atomically(a.out, [&](std::ostream& o) { write_weights(o, result.weights); });
  out << "train: " << result.weights.size() << " senses trained, " << result.diagnostics.size()
      << " skipped -> " << a.out << '\n';
  return 0;
}

// ---- mask ----------------------------------------------------------------

struct MaskArgs {
  std::string weights;
  std::string out;
  RuleOptions rule;
};

void add_mask(CLI::App& app, MaskArgs& a) {
  auto* s = app.add_subcommand("mask", "Derive threshold masks from trained weights");
  s->add_option("--weights", a.weights, "weights.jsonl")->required();
  s->add_option("--out", a.out, "masks.jsonl output")->required();
  a.rule.attach(s);
}

int run_mask(const MaskArgs& a, std::ostream& out) {
  require_inputs({&a.weights});
  const auto masks = build_masks(load_weights(a.weights), a.rule.rule());
  write_atomically(a.out, [&](std::ostream& o) { write_masks(o, masks); });
  double total = 0.0;
  for (const auto& [_, m] : masks) total += static_cast<double>(m.n_masked);
  out << "mask: " << masks.size() << " masks (" << a.rule.rule().to_string() << "), mean n_masked "
      << (masks.empty() ? 0.0 : total / static_cast<double>(masks.size())) << " -> " << a.out << '\n';
  return 0;
}

// ---- wsd -----------------------------------------------------------------

struct WsdArgs {
  std::string train, test, gold, inventory;
  std::string method = "wf";
  std::string out;
  std::string report;
};

void add_wsd_common(CLI::App* s, WsdArgs& a) {
  s->add_option("--train", a.train, "Labeled training embeddings")->required();
  s->add_option("--test", a.test, "Test embeddings")->required();
  s->add_option("--gold", a.gold, "gold.key")->required();
  s->add_option("--inventory", a.inventory, "inventory.tsv")->required();
  s->add_option("--out", a.out, "Predictions output");
  s->add_option("--report", a.report, "Report TSV output (default: stdout)");
}

void add_wsd(CLI::App& app, WsdArgs& a) {
  auto* s = app.add_subcommand("wsd", "Run a KNN or MFS baseline and score it");
  add_wsd_common(s, a);
  s->add_option("--method", a.method, "wf, w, sf, s or mfs")->check(CLI::IsMember({"wf", "w", "sf", "s", "mfs"}));
}

int run_wsd_cmd(const WsdArgs& a, std::ostream& out) {
  require_inputs({&a.train, &a.test, &a.gold, &a.inventory});
  const auto method = parse_method(a.method);
  const auto train = load_embeddings(a.train);
  const auto test = load_embeddings(a.test);
  const auto gold = load_gold(a.gold);
  const auto inventory = load_inventory(a.inventory);
  const auto predictions = run_wsd(method, train, test, inventory);
  const auto report = evaluate_f1(predictions, gold);
  if (!a.out.empty()) write_atomically(a.out, [&](std::ostream& o) { write_predictions(o, predictions); });
  write_output(a.report, out, [&](std::ostream& o) {
    write_report_header(o);
    write_report_rows(o, to_string(method), report);
  });
  return 0;
}

// ---- wsd-masked ----------------------------------------------------------

struct WsdMaskedArgs {
  WsdArgs io;
  std::string weights;
  std::string masks;
  RuleOptions rule;
};

void add_wsd_masked(CLI::App& app, WsdMaskedArgs& a) {
  auto* s = app.add_subcommand("wsd-masked", "Word KNN with per-token mask selection vs original vectors");
  add_wsd_common(s, a.io);
  auto* w = s->add_option("--weights", a.weights, "weights.jsonl (masks derived with --percent/--tau)");
  auto* m = s->add_option("--masks", a.masks, "Precomputed masks.jsonl");
  w->excludes(m);
  a.rule.attach(s);
}

int run_wsd_masked(const WsdMaskedArgs& a, std::ostream& out, std::ostream& err) {
  if (a.weights.empty() == a.masks.empty()) throw CLI::ValidationError("wsd-masked needs exactly one of --weights or --masks");
  require_inputs({&a.io.train, &a.io.test, &a.io.gold, &a.io.inventory, &a.weights, &a.masks});
  const auto train = load_embeddings(a.io.train);
  const auto test = load_embeddings(a.io.test);
  const auto gold = load_gold(a.io.gold);
  const auto inventory = load_inventory(a.io.inventory);
  const auto masks = a.masks.empty() ? build_masks(load_weights(a.weights), a.rule.rule()) : load_masks(a.masks);
  const auto result = run_masked_wsd(train, test, inventory, masks);
  std::size_t warnings = 0;
  for (const auto& s : result.selections) warnings += s.zero_query_warnings;
  if (warnings) err << "warning: " << warnings << " candidate masks zeroed a query vector\n";

  const auto original = evaluate_f1(result.original, gold);
  const auto masked = evaluate_f1(result.masked, gold);
  const auto selected = evaluate_f1(result.selected_sense, gold);
  if (!a.io.out.empty()) write_atomically(a.io.out, [&](std::ostream& o) { write_predictions(o, result.masked); });
  write_output(a.io.report, out, [&](std::ostream& o) {
    write_report_header(o);
    write_report_rows(o, "wf-original", original);
    write_report_rows(o, "wf-masked", masked);
    write_report_rows(o, "mask-sense", selected);
  });
  err << "wsd-masked: mean n_masked " << result.mean_n_masked << '\n';
  return 0;
}

// ---- analyze -------------------------------------------------------------

struct AnalyzeArgs {
  std::string embeddings, weights, taxonomy, out;
  std::size_t min_size = 100;
  RuleOptions rule;
};

void add_analyze(CLI::App& app, AnalyzeArgs& a) {
  auto* s = app.add_subcommand("analyze", "Within-group cosine and Spearman correlation report");
  s->add_option("--embeddings", a.embeddings, "Labeled embeddings")->required();
  s->add_option("--weights", a.weights, "weights.jsonl")->required();
  s->add_option("--taxonomy", a.taxonomy, "taxonomy.tsv")->required();
  s->add_option("--min-size", a.min_size, "Keep groups with more members than this");
  s->add_option("--out", a.out, "Report TSV output (default: stdout)");
  a.rule.attach(s);
}

int run_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  require_inputs({&a.embeddings, &a.weights, &a.taxonomy});
  const auto set = load_embeddings(a.embeddings);
  const auto groups = group_by_sense(set);
  const auto report =
      correlation_report(set, groups, load_weights(a.weights), load_taxonomy(a.taxonomy), a.rule.rule(), a.min_size);
  print_diagnostics(err, report.diagnostics);
  write_output(a.out, out, [&](std::ostream& o) { write_correlation_report(o, report); });
  return 0;
}

// ---- project -------------------------------------------------------------

struct ProjectArgs {
  std::string embeddings, weights, out;
  double ridge = 1e-6;
  RuleOptions rule;
};

void add_project(CLI::App& app, ProjectArgs& a) {
  auto* s = app.add_subcommand("project", "LDA projection to 2-D as TSV");
  s->add_option("--embeddings", a.embeddings, "Labeled embeddings")->required();
  s->add_option("--out", a.out, "Projection TSV output")->required();
  s->add_option("--weights", a.weights, "Mask vectors with masks derived from these weights first");
  s->add_option("--ridge", a.ridge, "Ridge added to the within-class scatter");
  a.rule.attach(s);
}

int run_project(const ProjectArgs& a) {
  require_inputs({&a.embeddings, &a.weights});
  const auto set = load_embeddings(a.embeddings);
  const auto groups = group_by_sense(set);
  std::optional<MaskStore> masks;
  if (!a.weights.empty()) masks = build_masks(load_weights(a.weights), a.rule.rule());
  const auto projection = lda_project(groups, 2, a.ridge, masks ? &*masks : nullptr);
  write_atomically(a.out, [&](std::ostream& o) { write_projection(o, projection); });
  return 0;
}

// ---- inspect -------------------------------------------------------------

struct InspectArgs {
  std::string embeddings, weights, out;
  std::size_t top_k = 100;
  RuleOptions rule;
};

void add_inspect(CLI::App& app, InspectArgs& a) {
  auto* s = app.add_subcommand("inspect", "Rank record pairs by cosine on discarded dims only");
  s->add_option("--embeddings", a.embeddings, "Labeled embeddings")->required();
  s->add_option("--weights", a.weights, "weights.jsonl")->required();
  s->add_option("--top-k", a.top_k, "Number of pairs to keep");
  s->add_option("--out", a.out, "TSV output (default: stdout)");
  a.rule.attach(s);
}

int run_inspect(const InspectArgs& a, std::ostream& out, std::ostream& err) {
  require_inputs({&a.embeddings, &a.weights});
  const auto set = load_embeddings(a.embeddings);
  const auto groups = group_by_sense(set);
  const auto masks = build_masks(load_weights(a.weights), a.rule.rule());
  const auto probe = inspect_discarded(groups, masks, a.top_k);
  print_diagnostics(err, probe.diagnostics);
  write_output(a.out, out, [&](std::ostream& o) { write_discarded(o, probe); });
  err << "inspect: " << probe.pairs << " pairs, mean cosine within " << probe.mean_within << ", across "
      << probe.mean_across << '\n';
  return 0;
}

}  // namespace

std::vector<std::string> merge_config_file(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ValidationError("--config requires a file path");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
    }
  }
  if (config_path.empty()) return out;

  auto in = open_input(config_path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> extra;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    const auto flag = "--" + key;
    if (has_flag(out, flag)) continue;  // command line wins
    if (value == "true") {
      extra.push_back(flag);
    } else if (value != "false") {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sense weight training: dimension importance for contextual embeddings", "swt"};
  app.require_subcommand(1);

  SynthArgs synth;
  TrainArgs train;
  MaskArgs mask;
  WsdArgs wsd;
  WsdMaskedArgs wsd_masked;
  AnalyzeArgs analyze;
  ProjectArgs project;
  InspectArgs inspect;
  add_synth(app, synth);
  add_train(app, train);
  add_mask(app, mask);
  add_wsd(app, wsd);
  add_wsd_masked(app, wsd_masked);
  add_analyze(app, analyze);
  add_project(app, project);
  add_inspect(app, inspect);

  try {
    auto args = merge_config_file(raw_args);
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("swt");
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());

    const auto* sub = app.get_subcommands().front();
    const auto& name = sub->get_name();
    if (name == "synth") return run_synth(synth, out);
    if (name == "train") return run_train(train, out, err);
    if (name == "mask") return run_mask(mask, out);
    if (name == "wsd") return run_wsd_cmd(wsd, out);
    if (name == "wsd-masked") return run_wsd_masked(wsd_masked, out, err);
    if (name == "analyze") return run_analyze(analyze, out, err);
    if (name == "project") return run_project(project);
    if (name == "inspect") return run_inspect(inspect, out, err);
    err << "unknown subcommand " << name << '\n';
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace swt::cli
