#pragma once

#include "cosur/diagnostics.hpp"
#include "cosur/discriminator.hpp"
#include "cosur/editor.hpp"
#include "cosur/repstore.hpp"
#include "cosur/territory.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cosur {

inline constexpr Eigen::Index kDefaultK = 64;
inline constexpr double kHoldoutFraction = 0.2;

/// Classification rule: SVD territories, PCA territories, or centroid cosine.
enum class Variant { Svd, Pca, Cs };

std::string to_string(Variant v);
Variant parse_variant(const std::string& tag);

struct RunConfig {
  std::filesystem::path manifest;
  std::string self_category;                    // empty: take it from the manifest
  Eigen::Index k = kDefaultK;
  double alpha = kDefaultAlpha;
  std::map<std::string, std::string> tokens;    // role ("self" / "other") -> token name
  std::filesystem::path out;
  std::uint64_t seed = 0;
  Variant variant = Variant::Svd;
  bool no_split = false;
  bool normalize_rows = false;
  bool macro_f1 = false;                        // also print macro F1 in CSV tables
  unsigned workers = 1;
};

/// Train/test partition of one category (80/20 by default, seeded).
struct Split {
  RepresentationSet train;
  RepresentationSet test;
};

Split split_set(const RepresentationSet& set, std::uint64_t seed, std::uint64_t stream, bool no_split);

/// Inputs of a run after resolving the manifest, self category and tokens.
struct RunInputs {
  Manifest manifest;
  std::vector<RepresentationSet> sets;
  std::size_t self_index = 0;
  std::optional<VocabHead> head;
  std::map<std::string, std::string> tokens;  // role -> token
};

RunInputs load_run_inputs(const RunConfig& cfg);

/// Token name for each category: self maps to tokens["self"], everything else
/// to tokens["other"].
std::map<std::string, std::string> category_tokens(const RunInputs& in);

/// Result of classifying one (self, other) pair on its held-out split.
struct PairRun {
  std::string self_category;
  std::string other_category;
  std::vector<EnergyDecision> decisions;
  std::map<std::string, std::string> labels;
  EvalReport eval;
  std::vector<TerritoryBasis> territories;  // empty for the centroid variant
  RepresentationSet test;                   // self test rows followed by other test rows
};

PairRun run_pair(const RunInputs& in, std::size_t other_index, const RunConfig& cfg);

// JSON shapes shared by the commands.
nlohmann::ordered_json decision_json(const EnergyDecision& d);
nlohmann::ordered_json eval_json(const EvalReport& r);
nlohmann::ordered_json territory_summary_json(const TerritoryBasis& t);

/// Diagnostics bundle for a set of categories: pairwise CS / MMD / CKA, JS
/// through the head (when present), probe gap, and NGD / NFD between
/// territories of rank `k` (omitted when k exceeds a set's rank bounds).
struct DiagnosticsOptions {
  Eigen::Index k = kDefaultK;
  std::uint64_t seed = 0;
  JsMode js_mode = JsMode::MeanDistribution;
  bool pairwise_cosine = false;  // CS as mean pairwise cosine instead of centroid cosine
  bool normalize_rows = false;
  unsigned workers = 1;
};

struct DiagnosticsBundle {
  nlohmann::ordered_json report;
  std::string table1_csv;  // pair,cs,mmd,cka
  std::string table2_csv;  // pair,ngd,nfd
};

DiagnosticsBundle run_diagnostics(const std::vector<RepresentationSet>& sets, const VocabHead* head,
                                  const DiagnosticsOptions& opts);

// Subcommands. Each returns the text it would print to stdout.

/// Builds self and every other territory, classifies the held-out split of
/// each pair, edits toward the verdict token when tokens are configured, and
/// writes the report bundle into cfg.out. Nothing is written if any step fails.
nlohmann::ordered_json cmd_pipeline(const RunConfig& cfg);

/// CSV: k, acc_<other> per pair, mean_acc.
std::string cmd_sweep_k(const RunConfig& cfg, const std::vector<Eigen::Index>& k_values);

/// CSV: alpha, flip_rate, mean_acc (greedy token after the edit equals the
/// token of the true label, averaged over pairs).
std::string cmd_sweep_alpha(const RunConfig& cfg, const std::vector<double>& alpha_values);

struct ClassifyArgs {
  std::filesystem::path input;
  FileFormat format = FileFormat::Repb;
  std::string category;                              // for CSV input
  std::vector<std::filesystem::path> territories;   // prebuilt territory files
  std::filesystem::path manifest;                    // else: build from the manifest
  std::string self_category;
  Eigen::Index k = kDefaultK;
  Variant variant = Variant::Svd;
  bool normalize_rows = false;
};

/// One JSON line per sample: {"id", "energies", "verdict"}.
std::string cmd_classify(const ClassifyArgs& args);

struct EditArgs {
  std::filesystem::path input;
  std::filesystem::path head;
  std::filesystem::path verdicts;  // JSON lines from classify
  std::string self_category;
  std::map<std::string, std::string> tokens;  // role -> token
  double alpha = kDefaultAlpha;
  std::filesystem::path out;  // directory: edited.repb + effects.jsonl
};

/// Returns the effect report (one JSON line per sample).
std::string cmd_edit(const EditArgs& args);

/// Territories for every manifest category (or just `category`) written as
/// <category>.territory.repb into `out`. Returns one summary line each.
std::string cmd_build(const std::filesystem::path& manifest, Eigen::Index k, TerritoryMethod method,
                      const std::filesystem::path& out, const std::string& category, bool normalize_rows);

/// Converts a CSV or REPB file into REPB under a category name, or validates a
/// whole manifest when `manifest` is non-empty.
std::string cmd_ingest(const std::filesystem::path& input, FileFormat format, const std::string& category,
                       const std::filesystem::path& out, const std::filesystem::path& manifest);

/// Writes report.json/diagnostics.json plus table CSVs into `out`.
std::string cmd_diagnose(const std::filesystem::path& manifest, const DiagnosticsOptions& opts,
                         const std::filesystem::path& out);

/// Synthetic data from a JSON config file or a named preset.
std::string cmd_synth(const std::filesystem::path& config, const std::string& preset,
                      std::optional<std::uint64_t> seed, const std::filesystem::path& out);

/// Renders a pipeline report.json as a CSV table (one row per pair).
std::string cmd_report(const std::filesystem::path& report, bool macro_f1);

/// Parallel for over [0, count) with results independent of `workers`.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cosur
