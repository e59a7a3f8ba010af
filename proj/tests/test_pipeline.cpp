#include "cosur/pipeline.hpp"
#include "cosur/synthgen.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

using namespace cosur;
namespace fs = std::filesystem;

namespace {

fs::path synth_preset(const TempDir& dir, const std::string& name, const std::string& sub) {
  const auto cfg = *preset_config(name, 42);
  return write_synth(generate(cfg), cfg, dir.path() / sub);
}

// Two classes on orthogonal coordinate axes, exactly rank one each.
fs::path axis_lines(const TempDir& dir) {
  Manifest m;
  fs::create_directories(dir.path() / "lines");
  for (int c = 0; c < 2; ++c) {
    MatrixF data = MatrixF::Zero(30, 8);
    for (Eigen::Index i = 0; i < 30; ++i) data(i, c) = static_cast<float>(i % 7 + 1) * (i % 2 ? 1.0f : -1.0f);
    const std::string cat = c == 0 ? "self" : "other";
    write_representations(RepresentationSet(cat, data), dir.path() / "lines" / (cat + ".repb"), FileFormat::Repb);
    m.entries.push_back({cat, cat + ".repb", FileFormat::Repb});
  }
  m.self_category = "self";
  write_manifest(m, dir.path() / "lines" / "manifest.json");
  return dir.path() / "lines" / "manifest.json";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::vector<std::string> bundle_files(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

TEST_CASE("variant names") {
  CHECK(parse_variant("cs") == Variant::Cs);
  CHECK(to_string(Variant::Pca) == "pca");
  CHECK(kind_of([] { parse_variant("lda"); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("split is 80/20, disjoint, seeded and covers every row") {
  const RepresentationSet s("c", MatrixF::Random(50, 3));
  const auto a = split_set(s, 1, 0, false);
  CHECK(a.test.rows() == 10);
  CHECK(a.train.rows() == 40);
  std::set<std::string> ids(a.test.sample_ids().begin(), a.test.sample_ids().end());
  for (const auto& id : a.train.sample_ids()) CHECK_FALSE(ids.contains(id));
  ids.insert(a.train.sample_ids().begin(), a.train.sample_ids().end());
  CHECK(ids.size() == 50);
  CHECK(split_set(s, 1, 0, false).test.sample_ids() == a.test.sample_ids());
  CHECK(split_set(s, 2, 0, false).test.sample_ids() != a.test.sample_ids());
  CHECK(split_set(s, 1, 0, true).test.rows() == 50);
  CHECK(split_set(RepresentationSet("c", MatrixF::Random(3, 2)), 1, 0, false).test.rows() == 1);
}

TEST_CASE("pipeline on the paper-regime fixture writes a complete bundle") {
  TempDir dir("pipe");
  RunConfig cfg;
  cfg.manifest = synth_preset(dir, "paper-regime", "data");
  cfg.k = 8;
  cfg.seed = 42;
  cfg.out = dir / "run";
  const auto report = cmd_pipeline(cfg);
  REQUIRE(report["pairs"].size() == 1);
  CHECK(report["pairs"][0]["eval"]["accuracy"].get<double>() >= 0.95);
  CHECK(report["config"]["tokens"]["self"] == "t0");
  CHECK(report["pairs"][0]["n_test"] == 160);
  CHECK(bundle_files(cfg.out) ==
        std::vector<std::string>{"decisions_other.jsonl", "diagnostics.json", "edited_other.repb", "edits_other.jsonl",
                                 "report.json", "table1.csv", "table2.csv", "table3.csv"});

  const auto edited = load_representations(cfg.out / "edited_other.repb", FileFormat::Repb);
  CHECK(edited.rows() == 160);
  std::ifstream is(cfg.out / "edits_other.jsonl");
  std::string line;
  std::getline(is, line);
  const auto first = nlohmann::json::parse(line);
  CHECK(first.contains("logit_delta_target"));
  CHECK(first["alpha"] == 100.0);

  const auto table = parse_csv(cmd_report(cfg.out / "report.json", true));
  REQUIRE(table.size() == 3);
  CHECK(table[0][6] == "macro_f1");
  CHECK(table[1][0] == "self");
  CHECK(table[1][1] == "other");
  CHECK(table[1][2] == "svd");
  CHECK(table[1][3] == "8");
}

TEST_CASE("ablation variants run over the same split") {
  TempDir dir("ablate");
  RunConfig cfg;
  cfg.manifest = synth_preset(dir, "paper-regime", "data");
  cfg.k = 8;
  cfg.seed = 42;
  double acc[3];
  const Variant variants[] = {Variant::Svd, Variant::Pca, Variant::Cs};
  for (int i = 0; i < 3; ++i) {
    cfg.variant = variants[i];
    cfg.out = dir.path() / to_string(variants[i]);
    const auto r = cmd_pipeline(cfg);
    acc[i] = r["pairs"][0]["eval"]["accuracy"].get<double>();
    CHECK(r["pairs"][0]["n_test"] == 160);
  }
  CHECK(acc[0] > acc[2]);
  CHECK(acc[0] >= acc[1]);
}

TEST_CASE("missing head with edit requested fails before writing anything") {
  TempDir dir("nohead");
  RunConfig cfg;
  cfg.manifest = axis_lines(dir);
  cfg.tokens = {{"self", "yes"}, {"other", "no"}};
  cfg.k = 1;
  cfg.out = dir / "run";
  CHECK(kind_of([&] { cmd_pipeline(cfg); }) == ErrorKind::MissingHead);
  CHECK_FALSE(fs::exists(cfg.out));
  CHECK(exit_code(ErrorKind::MissingHead) == 10);

  cfg.tokens.clear();
  const auto r = cmd_pipeline(cfg);
  CHECK(r["pairs"][0]["edit"].is_null());
  CHECK_FALSE(fs::exists(cfg.out / "edits_other.jsonl"));
}

TEST_CASE("unknown tokens and self categories are reported") {
  TempDir dir("badtok");
  RunConfig cfg;
  cfg.manifest = synth_preset(dir, "paper-regime", "data");
  cfg.out = dir / "run";
  cfg.tokens = {{"self", "t0"}, {"other", "zzz"}};
  CHECK(kind_of([&] { cmd_pipeline(cfg); }) == ErrorKind::UnknownToken);
  cfg.tokens.clear();
  cfg.self_category = "nobody";
  CHECK(kind_of([&] { cmd_pipeline(cfg); }) == ErrorKind::InvalidArgument);
  CHECK_FALSE(fs::exists(cfg.out));
}

TEST_CASE("sweep-k: one direction suffices on lines; rank errors name k") {
  TempDir dir("sweepk");
  RunConfig cfg;
  cfg.manifest = axis_lines(dir);
  const auto table = parse_csv(cmd_sweep_k(cfg, {1}));
  REQUIRE(table.size() == 2);
  CHECK(table[0] == std::vector<std::string>{"k", "acc_other", "mean_acc"});
  CHECK(table[1] == std::vector<std::string>{"1", "1", "1"});
  try {
    cmd_sweep_k(cfg, {1, 2});
    FAIL("expected a rank error");
  } catch (const RankDeficientError& e) {
    CHECK(std::string(e.what()).find("k=2") != std::string::npos);
    CHECK(e.effective_rank() == 1);
  }
}

TEST_CASE("sweep-k on the paper regime rises to the private rank and plateaus") {
  TempDir dir("sweepk2");
  RunConfig cfg;
  cfg.manifest = synth_preset(dir, "paper-regime", "data");
  cfg.seed = 42;
  const auto table = parse_csv(cmd_sweep_k(cfg, {2, 4, 8, 16, 32}));
  REQUIRE(table.size() == 6);
  std::vector<double> acc;
  for (std::size_t i = 1; i < table.size(); ++i) acc.push_back(std::stod(table[i][2]));
  CHECK(acc[0] <= acc[1]);
  CHECK(acc[1] >= 0.95);
  for (std::size_t i = 2; i < acc.size(); ++i) CHECK(acc[i] >= 0.95);
}

TEST_CASE("sweep-alpha: baseline at zero, monotone, saturates at one") {
  TempDir dir("sweepa");
  RunConfig cfg;
  cfg.manifest = synth_preset(dir, "paper-regime", "data");
  cfg.k = 8;
  cfg.seed = 42;
  cfg.tokens = {{"self", "t0"}, {"other", "t1"}};
  const auto table = parse_csv(cmd_sweep_alpha(cfg, {0, 50, 200, 1000}));
  REQUIRE(table.size() == 5);
  CHECK(table[0] == std::vector<std::string>{"alpha", "flip_rate", "mean_acc"});

  // Baseline: greedy token agreement with the verdict token before editing.
  const auto inputs = load_run_inputs(cfg);
  const auto run = run_pair(inputs, 1, cfg);
  const auto tokens = category_tokens(inputs);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < run.decisions.size(); ++i) {
    const auto z = logits(run.test.row(static_cast<Eigen::Index>(i)), *inputs.head);
    agree += inputs.head->token_names()[static_cast<std::size_t>(greedy_index(z))] == tokens.at(run.decisions[i].verdict);
  }
  CHECK(std::stod(table[1][1]) == doctest::Approx(static_cast<double>(agree) / run.decisions.size()));
  CHECK(std::stod(table[3][1]) >= std::stod(table[2][1]));
  CHECK(std::stod(table[3][1]) == 1.0);
  CHECK(std::stod(table[4][1]) == 1.0);

  cfg.tokens.clear();
  cfg.manifest = axis_lines(dir);
  CHECK(kind_of([&] { cmd_sweep_alpha(cfg, {1}); }) == ErrorKind::MissingHead);
}

TEST_CASE("bundle is byte-identical across runs and worker counts") {
  TempDir dir("determinism");
  RunConfig cfg;
  cfg.manifest = synth_preset(dir, "generalization", "data");
  cfg.k = 8;
  cfg.seed = 7;
  cfg.out = dir / "w1";
  cfg.workers = 1;
  cmd_pipeline(cfg);
  cfg.out = dir / "w4";
  cfg.workers = 4;
  cmd_pipeline(cfg);
  const auto names = bundle_files(dir / "w1");
  CHECK(names == bundle_files(dir / "w4"));
  CHECK(names.size() == 7);
  CHECK(std::find(names.begin(), names.end(), "decisions_unseen.jsonl") != names.end());
  for (const auto& n : names) CHECK(read_file(dir.path() / "w1" / n) == read_file(dir.path() / "w4" / n));
}

TEST_CASE("build, classify and edit commands chain through files") {
  TempDir dir("chain");
  const auto manifest = synth_preset(dir, "paper-regime", "data");
  const auto built = cmd_build(manifest, 8, TerritoryMethod::Svd, dir / "terr", "", false);
  CHECK(fs::exists(dir / "terr" / "self.territory.repb"));
  CHECK(fs::exists(dir / "terr" / "other.territory.repb"));
  CHECK(std::count(built.begin(), built.end(), '\n') == 2);

  ClassifyArgs ca;
  ca.input = dir.path() / "data" / "other.repb";
  ca.territories = {dir / "terr" / "self.territory.repb", dir / "terr" / "other.territory.repb"};
  ca.self_category = "self";
  const std::string verdicts = cmd_classify(ca);
  write_text(dir / "verdicts.jsonl", verdicts);
  std::istringstream is(verdicts);
  std::string line;
  std::size_t n = 0, other = 0;
  while (std::getline(is, line)) {
    const auto j = nlohmann::json::parse(line);
    ++n;
    other += j["verdict"] == "other";
    CHECK(j["energies"].size() == 2);
  }
  CHECK(n == 400);
  CHECK(other >= 390);

  ClassifyArgs from_manifest = ca;
  from_manifest.territories.clear();
  from_manifest.manifest = manifest;
  from_manifest.k = 8;
  std::istringstream rebuilt(cmd_classify(from_manifest));
  std::istringstream stored(verdicts);
  std::string a, b;
  while (std::getline(rebuilt, a) && std::getline(stored, b)) {
    REQUIRE(nlohmann::json::parse(a)["verdict"] == nlohmann::json::parse(b)["verdict"]);
  }

  EditArgs ea{dir.path() / "data" / "other.repb", dir.path() / "data" / "head.repb", dir / "verdicts.jsonl", "self",
              {{"self", "t0"}, {"other", "t1"}}, 100.0, dir / "edit"};
  const std::string effects = cmd_edit(ea);
  CHECK(std::count(effects.begin(), effects.end(), '\n') == 400);
  CHECK(load_representations(dir / "edit" / "edited.repb", FileFormat::Repb).rows() == 400);
  CHECK(fs::exists(dir / "edit" / "effects.jsonl"));
}

TEST_CASE("ingest converts CSV and validates manifests") {
  TempDir dir("ingest");
  std::ofstream(dir / "x.csv") << "1,2,3\n4,5,6\n";
  const auto line = cmd_ingest(dir / "x.csv", FileFormat::Csv, "human", dir / "x.repb", {});
  CHECK(nlohmann::json::parse(line)["n"] == 2);
  const auto back = load_representations(dir / "x.repb", FileFormat::Repb);
  CHECK(back.category() == "human");
  CHECK(back.data()(1, 2) == 6.0f);

  const auto manifest = synth_preset(dir, "paper-regime", "data");
  const auto summary = cmd_ingest({}, FileFormat::Repb, "", {}, manifest);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 3);
}

TEST_CASE("diagnose writes the report and the two tables") {
  TempDir dir("diagnose");
  const auto manifest = synth_preset(dir, "paper-regime", "data");
  DiagnosticsOptions opts;
  opts.k = 4;
  const auto text = cmd_diagnose(manifest, opts, dir / "out");
  const auto j = nlohmann::json::parse(text);
  REQUIRE(j["pairs"].size() == 1);
  CHECK(j["pairs"][0]["cs"].get<double>() > 0.99);
  CHECK(j["pairs"][0]["cka"].get<double>() < 0.2);
  CHECK(j["js"].size() == 1);
  CHECK(j["probe"].is_object());
  CHECK(j["subspaces"][0]["ngd"].get<double>() > 0.8);
  const auto t1 = parse_csv(read_file(dir / "out" / "table1.csv"));
  CHECK(t1[0] == std::vector<std::string>{"pair", "cs", "mmd", "cka"});
  CHECK(t1[1][0] == "self-other");
  const auto t2 = parse_csv(read_file(dir / "out" / "table2.csv"));
  CHECK(t2[0] == std::vector<std::string>{"pair", "ngd", "nfd"});
}

TEST_CASE("synth command writes a preset and rejects unknown ones") {
  TempDir dir("synthcmd");
  const auto out = nlohmann::json::parse(cmd_synth({}, "mean-offset", 3, dir / "mo"));
  CHECK(out["categories"].size() == 2);
  CHECK(fs::exists(dir / "mo" / "manifest.json"));
  CHECK(kind_of([&] { cmd_synth({}, "nope", {}, dir / "x"); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { cmd_synth(dir / "missing.json", "", {}, dir / "x"); }) == ErrorKind::Io);
}
