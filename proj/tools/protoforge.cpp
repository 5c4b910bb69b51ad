// protoforge: translate natural-language protocol specs into CPSA
// definitions, validate and format them, forge fine-tuning datasets, and
// score generated output.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"

#include "protoforge/config.hpp"
#include "protoforge/context.hpp"
#include "protoforge/cpsa.hpp"
#include "protoforge/dataset.hpp"
#include "protoforge/diagnostics.hpp"
#include "protoforge/eval.hpp"
#include "protoforge/gateway.hpp"
#include "protoforge/pipeline.hpp"
#include "protoforge/sexpr.hpp"

namespace {

using namespace protoforge;

constexpr int kExitClean = 0;
constexpr int kExitFindings = 1;
constexpr int kExitFailure = 2;

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    return buf.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct GlobalOptions {
  std::string config_path;
  std::string backend_id;
  std::string template_id = "default";
  bool strict = false;
};

config::Config load_config(const GlobalOptions& opts) {
  if (opts.config_path.empty()) return {};
  return config::load(opts.config_path);
}

gateway::BackendHandle make_backend(const std::string& id,
                                    const config::Config& cfg) {
  auto backends = cfg.backends();
  auto it = backends.find(id);
  if (it == backends.end())
    throw std::runtime_error("backend `" + id + "` is not configured");
  const auto& fields = it->second;
  auto field = [&](const std::string& name) -> std::string {
    auto f = fields.find(name);
    if (f == fields.end())
      throw std::runtime_error("backend `" + id + "` is missing `" + name +
                               "`");
    return f->second;
  };
  std::string kind = field("kind");
  if (kind == "replay")
    return std::make_shared<gateway::ReplayBackend>(
        id, gateway::Cassette::load(field("cassette")));
  if (kind == "live") {
    gateway::LiveConfig live;
    live.api_base = field("api_base");
    live.model_id = field("model");
    const char* key = std::getenv("MODELFORGE_API_KEY");
    if (!key || !*key)
      throw std::runtime_error(
          "backend `" + id +
          "` is live but MODELFORGE_API_KEY is not set");
    live.api_key = key;
    return std::make_shared<gateway::LiveBackend>(id, live);
  }
  throw std::runtime_error("backend `" + id + "` has unknown kind `" + kind +
                           "`");
}

void print_diagnostics(const std::vector<Diagnostic>& diags,
                       std::ostream& out) {
  std::size_t errors = 0, warnings = 0, lints = 0;
  for (const auto& d : diags) {
    out << d.span.line << ':' << d.span.column << ' '
        << severity_name(d.severity) << ' ' << d.code << ' ' << d.message
        << '\n';
    switch (d.severity) {
      case Severity::Error: ++errors; break;
      case Severity::Warning: ++warnings; break;
      case Severity::Lint: ++lints; break;
    }
  }
  out << errors << " errors, " << warnings << " warnings, " << lints
      << " lints\n";
}

std::vector<Diagnostic> check_text(const std::string& text,
                                   cpsa::CpsaUnit* unit_out = nullptr) {
  auto parsed = sexpr::parse(text);
  auto lowered = cpsa::lower(parsed.forms);
  std::vector<Diagnostic> diags = parsed.diagnostics;
  for (auto& d : lowered.diagnostics) diags.push_back(d);
  for (auto& d : cpsa::check_unit(lowered.unit)) diags.push_back(d);
  sort_diagnostics(diags);
  if (unit_out) *unit_out = std::move(lowered.unit);
  return diags;
}

int findings_exit_code(const std::vector<Diagnostic>& diags, bool strict) {
  if (count_errors(diags) > 0) return kExitFindings;
  if (strict && !diags.empty()) return kExitFindings;
  return kExitClean;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int run_translate(const GlobalOptions& opts, const std::string& query_path,
                  int attempts, const std::string& out_path) {
  auto cfg = load_config(opts);
  if (opts.backend_id.empty())
    throw std::runtime_error("translate requires --backend");
  auto backend = make_backend(opts.backend_id, cfg);
  auto registry = context::TemplateRegistry::load(
      cfg.get_or("templates_dir", "data/templates"));

  pipeline::PipelineConfig pcfg;
  pcfg.template_id = opts.template_id;
  pcfg.backend_id = opts.backend_id;
  pcfg.max_attempts = attempts;

  std::string query = read_input(query_path);
  auto result = pipeline::translate(query, pcfg, registry, *backend);

  if (result.status == pipeline::TranslationResult::Status::Failed) {
    std::cerr << "translation failed: " << result.failure_reason << '\n';
    return kExitFailure;
  }

  if (out_path.empty()) {
    std::cout << result.final_text;
    if (!result.final_text.empty() && result.final_text.back() != '\n')
      std::cout << '\n';
  } else {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    out << result.final_text;
  }
  print_diagnostics(result.diagnostics, std::cerr);
  std::cerr << "attempts: " << result.attempts.size() << '\n';
  std::cerr << "NOTICE: machine-generated definition; a domain expert must "
               "review it before any security conclusion is drawn.\n";
  return findings_exit_code(result.diagnostics, opts.strict);
}

int run_validate(const GlobalOptions& opts, const std::string& file) {
  auto diags = check_text(read_input(file));
  print_diagnostics(diags, std::cout);
  return findings_exit_code(diags, opts.strict);
}

int run_fmt(const std::string& file, bool check) {
  std::string text = read_input(file);
  cpsa::CpsaUnit unit;
  auto diags = check_text(text, &unit);
  if (count_errors(diags) > 0) {
    std::cerr << "cannot format: input has errors\n";
    print_diagnostics(diags, std::cerr);
    return kExitFailure;
  }
  std::string formatted = cpsa::format_unit(unit);
  if (check) {
    if (formatted == text) return kExitClean;
    std::cout << "would reformat " << file << '\n';
    return kExitFindings;
  }
  std::cout << formatted;
  return kExitClean;
}

int run_dataset_seed_cassette(const std::string& seeds_dir, int per_seed,
                              const std::string& model,
                              const std::string& out) {
  auto seeds = dataset::load_seeds(seeds_dir);
  dataset::write_reference_cassette(seeds, per_seed, model, out);
  std::cout << "wrote cassette for " << seeds.size() << " seeds x "
            << per_seed << " variations\n";
  return kExitClean;
}

int run_dataset_synth(const GlobalOptions& opts, const std::string& seeds_dir,
                      const std::string& cassette, int per_seed,
                      const std::string& model, const std::string& out_dir) {
  auto cfg = load_config(opts);
  gateway::BackendHandle backend;
  if (!opts.backend_id.empty())
    backend = make_backend(opts.backend_id, cfg);
  else if (!cassette.empty())
    backend = std::make_shared<gateway::ReplayBackend>(
        "replay", gateway::Cassette::load(cassette));
  else
    throw std::runtime_error("synth needs --cassette or --backend");

  auto seeds = dataset::load_seeds(seeds_dir);
  auto pairs = dataset::synthesize_pairs(seeds, *backend, per_seed, model);
  dataset::save_corpus(pairs, out_dir);
  std::cout << "synthesized " << pairs.size() << " pairs\n";
  return kExitClean;
}

int run_dataset_augment(const std::string& corpus_dir, int k) {
  auto pairs = dataset::load_corpus(corpus_dir);
  auto grown = dataset::augment_variance(pairs, nullptr, k);
  dataset::save_corpus(grown, corpus_dir);
  std::cout << "corpus now holds " << grown.size() << " pairs\n";
  return kExitClean;
}

int run_dataset_split(const std::string& corpus_dir, double fraction,
                      std::uint64_t rng_seed) {
  auto pairs = dataset::load_corpus(corpus_dir);
  auto [train, test] = dataset::split_pairs(pairs, fraction, rng_seed);
  std::vector<dataset::QAPair> all = train;
  all.insert(all.end(), test.begin(), test.end());
  dataset::save_corpus(all, corpus_dir);
  std::cout << "train " << train.size() << ", test " << test.size() << '\n';
  return kExitClean;
}

int run_dataset_export(const std::string& corpus_dir, const std::string& out,
                       int epochs, const std::string& system_prompt_file) {
  auto pairs = dataset::load_corpus(corpus_dir);
  std::string system_prompt;
  if (!system_prompt_file.empty())
    system_prompt = read_input(system_prompt_file);
  auto report = dataset::export_jsonl(pairs, system_prompt, out, epochs);
  std::cout << "pairs " << report.pair_count << " (train "
            << report.train_count << ", test " << report.test_count << ")\n"
            << "estimated tokens " << report.estimated_tokens << '\n'
            << "estimated training tokens (x" << report.epochs << " epochs) "
            << report.estimated_training_tokens << '\n';
  return kExitClean;
}

int run_eval_cmd(const GlobalOptions& opts, const std::string& suite_path,
                 const std::vector<std::string>& backend_ids,
                 const std::string& csv_path, const std::string& md_path) {
  auto cfg = load_config(opts);
  auto suite = eval::load_suite(suite_path);
  auto registry = context::TemplateRegistry::load(
      cfg.get_or("templates_dir", "data/templates"));
  std::vector<gateway::BackendHandle> backends;
  for (const auto& id : backend_ids) backends.push_back(make_backend(id, cfg));

  auto report = eval::run_eval(suite, backends, registry, opts.template_id);
  std::string csv = eval::render_csv(report);
  if (csv_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
    out << csv;
  }
  if (!md_path.empty()) {
    std::ofstream out(md_path, std::ios::binary | std::ios::trunc);
    out << eval::render_markdown(report);
  }
  return kExitClean;
}

int run_backends_list(const GlobalOptions& opts) {
  auto cfg = load_config(opts);
  for (const auto& [id, fields] : cfg.backends()) {
    auto kind = fields.find("kind");
    std::cout << id << '\t' << (kind == fields.end() ? "?" : kind->second)
              << '\n';
  }
  return kExitClean;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"protoforge: natural language to CPSA protocol definitions"};
  app.require_subcommand(1);

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "configuration file");
  app.add_option("--backend", opts.backend_id, "backend id from the config");
  app.add_option("--template", opts.template_id, "instruction template id");
  app.add_flag("--strict", opts.strict, "exit 1 on any finding");

  // translate
  auto* translate = app.add_subcommand(
      "translate", "translate a natural-language spec into a definition");
  std::string query_path = "-";
  int attempts = 3;
  std::string out_path;
  translate->add_option("--query", query_path, "query file, - for stdin");
  translate->add_option("--attempts", attempts, "repair-loop budget")
      ->check(CLI::Range(1, pipeline::kMaxAttemptsCap));
  translate->add_option("--out", out_path, "write the definition here");

  // validate
  auto* validate = app.add_subcommand("validate", "check a definition file");
  std::string validate_file;
  validate->add_option("file", validate_file, "definition file")->required();

  // fmt
  auto* fmt = app.add_subcommand("fmt", "canonically format a definition");
  std::string fmt_file;
  bool fmt_check = false;
  fmt->add_option("file", fmt_file, "definition file")->required();
  fmt->add_flag("--check", fmt_check, "exit 1 if not canonical");

  // dataset
  auto* ds = app.add_subcommand("dataset", "fine-tuning dataset forge");
  ds->require_subcommand(1);
  std::string seeds_dir = "data/seeds", cassette, corpus_dir = "corpus";
  std::string model = "forge-model", ds_out;
  std::string system_prompt_file;
  int per_seed = 2, variance_k = 16, epochs = 3;
  double fraction = 0.7;
  std::uint64_t rng_seed = 42;

  auto* seed_cassette = ds->add_subcommand(
      "seed-cassette", "write the deterministic reference cassette");
  seed_cassette->add_option("--seeds", seeds_dir, "seed directory");
  seed_cassette->add_option("--per-seed", per_seed, "variations per seed");
  seed_cassette->add_option("--model", model, "model id to record under");
  seed_cassette->add_option("--out", ds_out, "cassette path")->required();

  auto* synth = ds->add_subcommand("synth", "back-translate seeds into pairs");
  synth->add_option("--seeds", seeds_dir, "seed directory");
  synth->add_option("--cassette", cassette, "replay cassette");
  synth->add_option("--per-seed", per_seed, "candidates per seed");
  synth->add_option("--model", model, "model id");
  synth->add_option("--corpus", corpus_dir, "corpus output directory");

  auto* augment = ds->add_subcommand("augment", "add renamed variants");
  augment->add_option("--corpus", corpus_dir, "corpus directory");
  augment->add_option("-k,--variants", variance_k, "variants per pair");

  auto* split = ds->add_subcommand("split", "train/test split by seed group");
  split->add_option("--corpus", corpus_dir, "corpus directory");
  split->add_option("--fraction", fraction, "train fraction");
  split->add_option("--rng-seed", rng_seed, "shuffle seed");

  auto* export_cmd = ds->add_subcommand("export", "write chat JSONL");
  export_cmd->add_option("--corpus", corpus_dir, "corpus directory");
  export_cmd->add_option("--out", ds_out, "output JSONL path")->required();
  export_cmd->add_option("--epochs", epochs, "training epochs");
  export_cmd->add_option("--system-prompt", system_prompt_file,
                         "system prompt file");

  // eval
  auto* ev = app.add_subcommand("eval", "scoring harness");
  ev->require_subcommand(1);
  auto* ev_run = ev->add_subcommand("run", "score backends over a suite");
  std::string suite_path = "data/eval/suite.json", csv_path, md_path;
  std::vector<std::string> backend_ids;
  ev_run->add_option("--suite", suite_path, "suite JSON file");
  ev_run->add_option("--backends", backend_ids, "backend ids")
      ->required()
      ->delimiter(',');
  ev_run->add_option("--csv", csv_path, "write CSV here (default stdout)");
  ev_run->add_option("--md", md_path, "write markdown table here");

  auto* backends_cmd = app.add_subcommand("backends", "backend registry");
  backends_cmd->add_subcommand("list", "list configured backends");

  auto* diag_cmd =
      app.add_subcommand("diagnostics", "print the diagnostic code registry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitClean : kExitFailure;
  }

  try {
    if (*translate)
      return run_translate(opts, query_path, attempts, out_path);
    if (*validate) return run_validate(opts, validate_file);
    if (*fmt) return run_fmt(fmt_file, fmt_check);
    if (*ds) {
      if (*seed_cassette)
        return run_dataset_seed_cassette(seeds_dir, per_seed, model, ds_out);
      if (*synth)
        return run_dataset_synth(opts, seeds_dir, cassette, per_seed, model,
                                 corpus_dir);
      if (*augment) return run_dataset_augment(corpus_dir, variance_k);
      if (*split) return run_dataset_split(corpus_dir, fraction, rng_seed);
      if (*export_cmd)
        return run_dataset_export(corpus_dir, ds_out, epochs,
                                  system_prompt_file);
    }
    if (*ev) return run_eval_cmd(opts, suite_path, backend_ids, csv_path,
                                 md_path);
    if (*backends_cmd) return run_backends_list(opts);
    if (*diag_cmd) {
      std::cout << protoforge::diagnostic_registry_markdown();
      return kExitClean;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
