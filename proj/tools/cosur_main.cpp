// Command-line front end for the cosur library.

#include "cosur/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  usage error\n"
    "  3  io            4  format         5  invalid-argument\n"
    "  6  dimension-mismatch              7  non-finite\n"
    "  8  rank-deficient                  9  unknown-token\n"
    " 10  missing-head                   11  unlabeled\n"
    "Errors are reported on stderr as one JSON object.\n";

std::map<std::string, std::string> parse_tokens(const std::string& spec) {
  std::map<std::string, std::string> out;
  if (spec.empty()) return out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw cosur::Error(cosur::ErrorKind::InvalidArgument, "bad --tokens entry '" + item + "' (expected ROLE=TOKEN)");
    }
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

void add_run_options(CLI::App* cmd, cosur::RunConfig& cfg, std::string& variant, std::string& tokens) {
  cmd->add_option("--manifest", cfg.manifest, "Manifest JSON")->required();
  cmd->add_option("--self", cfg.self_category, "Self category (default: manifest \"self\")");
  cmd->add_option("--k", cfg.k, "Territory rank")->capture_default_str();
  cmd->add_option("--alpha", cfg.alpha, "Editing strength")->capture_default_str();
  cmd->add_option("--variant", variant, "svd | pca | cs")->capture_default_str();
  cmd->add_option("--tokens", tokens, "Target tokens, e.g. self=I,other=You");
  cmd->add_option("--seed", cfg.seed, "Split / sampling seed")->capture_default_str();
  cmd->add_flag("--no-split", cfg.no_split, "Evaluate on the training rows");
  cmd->add_flag("--normalize-rows", cfg.normalize_rows, "Scale rows to unit norm before territory fitting");
  cmd->add_flag("--macro-f1", cfg.macro_f1, "Add macro F1 to CSV tables");
  cmd->add_option("--workers", cfg.workers, "Worker threads (results do not depend on it)")->capture_default_str();
}

int report_error(const cosur::Error& e) {
  nlohmann::ordered_json j{{"error", std::string(cosur::to_string(e.kind()))},
                           {"message", e.what()},
                           {"exit_code", cosur::exit_code(e.kind())}};
  if (const auto* rank = dynamic_cast<const cosur::RankDeficientError*>(&e)) j["effective_rank"] = rank->effective_rank();
  std::cerr << j.dump() << '\n';
  return cosur::exit_code(e.kind());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cosur: subspace territories, energy discrimination and representation editing"};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  cosur::RunConfig run;
  std::string variant = "svd";
  std::string tokens;
  std::string format = "repb";
  std::string category;
  std::string method = "svd";
  std::string js_mode = "mean-distribution";
  std::string preset;
  std::filesystem::path input, out, config, head, verdicts, report;
  std::vector<std::filesystem::path> territory_files;
  std::vector<Eigen::Index> k_values;
  std::vector<double> alpha_values;
  std::optional<std::uint64_t> seed;
  bool pairwise_cosine = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset (REPB files + manifest)");
  auto* synth_src = synth->add_option_group("source");
  synth_src->add_option("--config", config, "Synthetic config JSON");
  synth_src->add_option("--preset", preset, "paper-regime | mean-offset | generalization");
  synth_src->require_option(1);
  synth->add_option("--seed", seed, "Override the config seed");
  synth->add_option("--out", out, "Output directory")->required();

  auto* ingest = app.add_subcommand("ingest", "Convert a CSV/REPB file to REPB, or validate a manifest");
  ingest->add_option("--input", input, "Input file");
  ingest->add_option("--format", format, "repb | csv")->capture_default_str();
  ingest->add_option("--category", category, "Category name for the input");
  ingest->add_option("--out", out, "Output REPB path");
  ingest->add_option("--manifest", run.manifest, "Validate this manifest instead");

  auto* build = app.add_subcommand("build", "Fit territories for manifest categories");
  build->add_option("--manifest", run.manifest, "Manifest JSON")->required();
  build->add_option("--k", run.k, "Territory rank")->capture_default_str();
  build->add_option("--method", method, "svd | pca")->capture_default_str();
  build->add_option("--category", category, "Only this category");
  build->add_flag("--normalize-rows", run.normalize_rows, "Scale rows to unit norm first");
  build->add_option("--out", out, "Output directory")->required();

  auto* classify = app.add_subcommand("classify", "Energy verdicts for every row of a file");
  classify->add_option("--input", input, "Representations to classify")->required();
  classify->add_option("--format", format, "repb | csv")->capture_default_str();
  classify->add_option("--category", category, "Category name for CSV input");
  classify->add_option("--territory", territory_files, "Prebuilt territory file (repeatable)");
  classify->add_option("--manifest", run.manifest, "Build territories from this manifest");
  classify->add_option("--self", run.self_category, "Self category");
  classify->add_option("--k", run.k, "Territory rank")->capture_default_str();
  classify->add_option("--variant", variant, "svd | pca | cs")->capture_default_str();
  classify->add_flag("--normalize-rows", run.normalize_rows, "Scale rows to unit norm before fitting");

  auto* edit = app.add_subcommand("edit", "Shift rows toward the verdict token");
  edit->add_option("--input", input, "Representations (REPB)")->required();
  edit->add_option("--head", head, "Vocabulary head (REPB)")->required();
  edit->add_option("--verdicts", verdicts, "JSON lines from classify")->required();
  edit->add_option("--self", run.self_category, "Self category")->required();
  edit->add_option("--tokens", tokens, "self=TOKEN,other=TOKEN")->required();
  edit->add_option("--alpha", run.alpha, "Editing strength")->capture_default_str();
  edit->add_option("--out", out, "Output directory")->required();

  auto* diagnose = app.add_subcommand("diagnose", "Similarity and subspace diagnostics");
  diagnose->add_option("--manifest", run.manifest, "Manifest JSON")->required();
  diagnose->add_option("--k", run.k, "Territory rank for NGD / NFD")->capture_default_str();
  diagnose->add_option("--seed", run.seed, "Sampling seed")->capture_default_str();
  diagnose->add_option("--js-mode", js_mode, "mean-distribution | mean-pairwise")->capture_default_str();
  diagnose->add_flag("--pairwise-cosine", pairwise_cosine, "CS as mean pairwise cosine");
  diagnose->add_flag("--normalize-rows", run.normalize_rows, "Scale rows to unit norm before fitting");
  diagnose->add_option("--workers", run.workers, "Worker threads")->capture_default_str();
  diagnose->add_option("--out", out, "Output directory");

  auto* sweep_k = app.add_subcommand("sweep-k", "Accuracy as a function of k (CSV)");
  add_run_options(sweep_k, run, variant, tokens);
  sweep_k->add_option("--k-values", k_values, "Values of k")->required()->delimiter(',');

  auto* sweep_alpha = app.add_subcommand("sweep-alpha", "Flip rate and accuracy as a function of alpha (CSV)");
  add_run_options(sweep_alpha, run, variant, tokens);
  sweep_alpha->add_option("--alpha-values", alpha_values, "Values of alpha")->required()->delimiter(',');

  auto* pipeline = app.add_subcommand("pipeline", "Classify, edit and diagnose; write a report bundle");
  add_run_options(pipeline, run, variant, tokens);
  pipeline->add_option("--out", run.out, "Output directory")->required();

  auto* report_cmd = app.add_subcommand("report", "Render a pipeline report.json as CSV");
  report_cmd->add_option("report,--report", report, "report.json")->required();
  report_cmd->add_flag("--macro-f1", run.macro_f1, "Include macro F1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      std::cout << cosur::cmd_synth(config, preset, seed, out);
    } else if (*ingest) {
      if (run.manifest.empty() && input.empty()) {
        throw cosur::Error(cosur::ErrorKind::InvalidArgument, "ingest needs --input or --manifest");
      }
      std::cout << cosur::cmd_ingest(input, cosur::parse_format(format), category, out, run.manifest);
    } else if (*build) {
      std::cout << cosur::cmd_build(run.manifest, run.k, cosur::parse_territory_method(method), out, category,
                                    run.normalize_rows);
    } else if (*classify) {
      cosur::ClassifyArgs args;
      args.input = input;
      args.format = cosur::parse_format(format);
      args.category = category;
      args.territories = territory_files;
      args.manifest = run.manifest;
      args.self_category = run.self_category;
      args.k = run.k;
      args.variant = cosur::parse_variant(variant);
      args.normalize_rows = run.normalize_rows;
      std::cout << cosur::cmd_classify(args);
    } else if (*edit) {
      cosur::EditArgs args{input, head, verdicts, run.self_category, parse_tokens(tokens), run.alpha, out};
      std::cout << cosur::cmd_edit(args);
    } else if (*diagnose) {
      cosur::DiagnosticsOptions opts;
      opts.k = run.k;
      opts.seed = run.seed;
      opts.js_mode = cosur::parse_js_mode(js_mode);
      opts.pairwise_cosine = pairwise_cosine;
      opts.normalize_rows = run.normalize_rows;
      opts.workers = run.workers;
      std::cout << cosur::cmd_diagnose(run.manifest, opts, out);
    } else {
      run.variant = cosur::parse_variant(variant);
      run.tokens = parse_tokens(tokens);
      if (*sweep_k) {
        std::cout << cosur::cmd_sweep_k(run, k_values);
      } else if (*sweep_alpha) {
        std::cout << cosur::cmd_sweep_alpha(run, alpha_values);
      } else if (*pipeline) {
        std::cout << cosur::cmd_pipeline(run).dump(2) << '\n';
      } else if (*report_cmd) {
        std::cout << cosur::cmd_report(report, run.macro_f1);
      }
    }
  } catch (const cosur::Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    return report_error(cosur::Error(cosur::ErrorKind::Io, e.what()));
  }
  return 0;
}
