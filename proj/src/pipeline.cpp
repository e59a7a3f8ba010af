#include "cosur/pipeline.hpp"

#include "cosur/rng.hpp"
#include "cosur/synthgen.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace cosur {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kSplitStreamBase = 1000;

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string file_token(std::string name) {
  for (char& c : name) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return name;
}

// Rethrows `e` with a prefix, keeping its kind (and effective rank).
[[noreturn]] void rethrow_with(const Error& e, const std::string& prefix) {
  if (const auto* rank = dynamic_cast<const RankDeficientError*>(&e)) {
    throw RankDeficientError(prefix + rank->what(), rank->effective_rank());
  }
  throw Error(e.kind(), prefix + e.what());
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Svd: return "svd";
    case Variant::Pca: return "pca";
    case Variant::Cs: return "cs";
  }
  return "svd";
}

Variant parse_variant(const std::string& tag) {
  if (tag == "svd") return Variant::Svd;
  if (tag == "pca") return Variant::Pca;
  if (tag == "cs") return Variant::Cs;
  throw Error(ErrorKind::InvalidArgument, "unknown variant '" + tag + "' (expected svd, pca or cs)");
}

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  // Lowest failing index wins so the reported error does not depend on scheduling.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw Error(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

Split split_set(const RepresentationSet& set, std::uint64_t seed, std::uint64_t stream, bool no_split) {
  if (no_split) return Split{set, set};
  if (set.rows() < 2) {
    throw Error(ErrorKind::InvalidArgument, "category '" + set.category() + "' has " + std::to_string(set.rows()) +
                                                " sample(s); a held-out split needs at least 2 (or use --no-split)");
  }
  Philox rng(seed, kSplitStreamBase + stream);
  const auto order = permutation(static_cast<std::size_t>(set.rows()), rng);
  const auto n = static_cast<std::size_t>(set.rows());
  const auto n_test = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(kHoldoutFraction * static_cast<double>(n) + 0.5)), 1, n - 1);
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return Split{set.subset(train), set.subset(test)};
}

RunInputs load_run_inputs(const RunConfig& cfg) {
  RunInputs in;
  in.manifest = load_manifest(cfg.manifest);
  in.sets = load_all(in.manifest);
  if (in.sets.size() < 2) throw Error(ErrorKind::InvalidArgument, "manifest needs at least two categories");

  std::string self = cfg.self_category;
  if (self.empty() && in.manifest.self_category) self = *in.manifest.self_category;
  if (self.empty()) throw Error(ErrorKind::InvalidArgument, "no self category given (use --self)");
  const auto it = std::find_if(in.sets.begin(), in.sets.end(), [&](const auto& s) { return s.category() == self; });
  if (it == in.sets.end()) throw Error(ErrorKind::InvalidArgument, "self category '" + self + "' is not in the manifest");
  in.self_index = static_cast<std::size_t>(it - in.sets.begin());

  for (const auto& s : in.sets) {
    if (s.dim() != in.sets.front().dim()) {
      throw Error(ErrorKind::DimensionMismatch, "categories '" + in.sets.front().category() + "' and '" +
                                                    s.category() + "' have different dimensions");
    }
  }

  for (const auto& [role, tok] : in.manifest.tokens) in.tokens[role] = tok;
  for (const auto& [role, tok] : cfg.tokens) in.tokens[role] = tok;
  for (const auto& [role, tok] : in.tokens) {
    if (role != "self" && role != "other") {
      throw Error(ErrorKind::InvalidArgument, "token role '" + role + "' must be 'self' or 'other'");
    }
  }

  if (in.manifest.head_path) in.head = load_vocab_head(*in.manifest.head_path);
  if (!in.tokens.empty()) {
    if (!in.head) throw Error(ErrorKind::MissingHead, "editing requested (tokens given) but the manifest has no head");
    if (!in.tokens.contains("self") || !in.tokens.contains("other")) {
      throw Error(ErrorKind::InvalidArgument, "editing needs both self=TOKEN and other=TOKEN");
    }
    for (const auto& [role, tok] : in.tokens) in.head->token_index(tok);
    if (in.head->dim() != in.sets.front().dim()) {
      throw Error(ErrorKind::DimensionMismatch, "head dimension " + std::to_string(in.head->dim()) +
                                                    " != representation dimension " +
                                                    std::to_string(in.sets.front().dim()));
    }
  }
  return in;
}

std::map<std::string, std::string> category_tokens(const RunInputs& in) {
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < in.sets.size(); ++i) {
    out[in.sets[i].category()] = in.tokens.at(i == in.self_index ? "self" : "other");
  }
  return out;
}

namespace {

// Stacks the test rows of two categories, qualifying ids only if they collide.
RepresentationSet stack_tests(const RepresentationSet& a, const RepresentationSet& b,
                              std::map<std::string, std::string>& labels) {
  const std::set<std::string> ids_a(a.sample_ids().begin(), a.sample_ids().end());
  const bool collide = std::any_of(b.sample_ids().begin(), b.sample_ids().end(),
                                   [&](const auto& id) { return ids_a.contains(id); });
  MatrixF data(a.rows() + b.rows(), a.dim());
  data << a.data(), b.data();
  std::vector<std::string> ids;
  for (const auto* s : {&a, &b}) {
    for (const auto& id : s->sample_ids()) {
      ids.push_back(collide ? s->category() + ":" + id : id);
      labels[ids.back()] = s->category();
    }
  }
  return RepresentationSet("test", std::move(data), std::move(ids));
}

}  // namespace

PairRun run_pair(const RunInputs& in, std::size_t other_index, const RunConfig& cfg) {
  const auto& self = in.sets[in.self_index];
  const auto& other = in.sets[other_index];
  const Split s = split_set(self, cfg.seed, in.self_index, cfg.no_split);
  const Split o = split_set(other, cfg.seed, other_index, cfg.no_split);

  std::map<std::string, std::string> labels;
  RepresentationSet test = stack_tests(s.test, o.test, labels);

  PairRun run{self.category(), other.category(), {}, std::move(labels), {}, {}, std::move(test)};
  if (cfg.variant == Variant::Cs) {
    const std::vector<Centroid> centroids{build_centroid(s.train), build_centroid(o.train)};
    run.decisions = classify(run.test, std::span<const Centroid>(centroids), self.category());
  } else {
    const auto method = cfg.variant == Variant::Svd ? TerritoryMethod::Svd : TerritoryMethod::Pca;
    const TerritoryOptions opts{cfg.normalize_rows};
    run.territories = {build_territory(s.train, cfg.k, method, opts), build_territory(o.train, cfg.k, method, opts)};
    run.decisions = classify(run.test, std::span<const TerritoryBasis>(run.territories), self.category());
  }
  run.eval = evaluate(run.decisions, run.labels, self.category());
  return run;
}

ordered_json decision_json(const EnergyDecision& d) {
  ordered_json energies = ordered_json::object();
  for (const auto& [cat, e] : d.energies) energies[cat] = e;
  return ordered_json{{"id", d.sample_id}, {"energies", energies}, {"verdict", d.verdict}};
}

ordered_json eval_json(const EvalReport& r) {
  ordered_json confusion = ordered_json::object();
  for (const auto& [truth, row] : r.confusion) {
    ordered_json cells = ordered_json::object();
    for (const auto& [pred, count] : row) cells[pred] = count;
    confusion[truth] = cells;
  }
  return ordered_json{{"accuracy", r.accuracy},         {"f1", r.f1},       {"macro_f1", r.macro_f1},
                      {"positive_class", r.positive_class}, {"total", r.total}, {"confusion", confusion}};
}

ordered_json territory_summary_json(const TerritoryBasis& t) {
  return ordered_json{{"category", t.category},
                      {"k", t.rank()},
                      {"method", to_string(t.method)},
                      {"singular_values", std::vector<double>(t.singular_values.data(),
                                                              t.singular_values.data() + t.singular_values.size())}};
}

// ---------------------------------------------------------------------------
// Diagnostics

DiagnosticsBundle run_diagnostics(const std::vector<RepresentationSet>& sets, const VocabHead* head,
                                  const DiagnosticsOptions& opts) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) pairs.emplace_back(i, j);
  }

  std::vector<PairwiseMetricReport> metrics(pairs.size());
  std::vector<JsReport> js(head ? pairs.size() : 0);
  parallel_for(pairs.size(), opts.workers, [&](std::size_t p) {
    const auto& a = sets[pairs[p].first];
    const auto& b = sets[pairs[p].second];
    metrics[p] = pairwise_metrics(a, b);
    if (opts.pairwise_cosine) metrics[p].cs = mean_pairwise_cosine(a, b);
    if (head) js[p] = category_js(a, b, *head, opts.js_mode, opts.seed);
  });

  // Subspace distances need territories of a common rank.
  Eigen::Index k = opts.k;
  for (const auto& s : sets) k = std::min(k, std::min(s.rows(), s.dim()));
  std::vector<TerritoryBasis> territories(sets.size());
  std::string territory_error;
  try {
    parallel_for(sets.size(), opts.workers, [&](std::size_t i) {
      territories[i] = build_territory_svd(sets[i], k, TerritoryOptions{opts.normalize_rows});
    });
  } catch (const Error& e) {
    territory_error = e.what();
  }

  DiagnosticsBundle out;
  std::ostringstream t1, t2;
  t1 << "pair,cs,mmd,cka\n";
  t2 << "pair,ngd,nfd\n";
  ordered_json pair_list = ordered_json::array();
  ordered_json subspaces = ordered_json::array();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& m = metrics[p];
    const std::string name = m.pair.first + "-" + m.pair.second;
    pair_list.push_back({{"pair", {m.pair.first, m.pair.second}}, {"cs", m.cs}, {"mmd", m.mmd}, {"cka", m.cka}});
    t1 << name << ',' << fmt(m.cs) << ',' << fmt(m.mmd) << ',' << fmt(m.cka) << '\n';
    if (territory_error.empty()) {
      const double ngd = subspace_ngd(territories[pairs[p].first], territories[pairs[p].second]);
      const double nfd = subspace_nfd(territories[pairs[p].first], territories[pairs[p].second]);
      subspaces.push_back({{"pair", {m.pair.first, m.pair.second}}, {"k", k}, {"ngd", ngd}, {"nfd", nfd}});
      t2 << name << ',' << fmt(ngd) << ',' << fmt(nfd) << '\n';
    }
  }

  ordered_json js_list = ordered_json::array();
  for (const auto& r : js) {
    js_list.push_back({{"pair", {r.pair.first, r.pair.second}}, {"mode", to_string(r.mode)}, {"value", r.value}});
  }

  ordered_json probe = nullptr;
  if (head && std::all_of(sets.begin(), sets.end(), [](const auto& s) { return s.rows() >= 10; })) {
    const auto r = probe_gap(sets, *head, ProbeOptions{kHoldoutFraction, 1e-3, opts.seed});
    probe = {{"probe_acc_hidden", r.probe_acc_hidden}, {"probe_acc_dist", r.probe_acc_dist}, {"gap", r.gap}};
  }

  out.report = {{"pairs", pair_list}, {"js", js_list}, {"probe", probe}, {"subspaces", subspaces}};
  if (!territory_error.empty()) out.report["subspace_error"] = territory_error;
  out.table1_csv = t1.str();
  out.table2_csv = t2.str();
  return out;
}

// ---------------------------------------------------------------------------
// pipeline

namespace {

struct EditSummary {
  ordered_json summary;
  std::string effects_jsonl;
  RepresentationSet edited;
};

EditSummary edit_pair(const PairRun& run, const VocabHead& head, const std::map<std::string, std::string>& tokens,
                      double alpha) {
  MatrixF edited(run.test.rows(), run.test.dim());
  std::ostringstream lines;
  std::size_t flips = 0, base_correct = 0, edit_correct = 0;
  for (std::size_t i = 0; i < run.decisions.size(); ++i) {
    const auto& d = run.decisions[i];
    const EditSpec spec = make_edit_spec(head, d.verdict, tokens, alpha);
    const auto outcome = apply_edit(run.test.row(static_cast<Eigen::Index>(i)), spec, head);
    edited.row(static_cast<Eigen::Index>(i)) = outcome.edited.transpose().cast<float>();
    const std::string& truth_token = tokens.at(run.labels.at(d.sample_id));
    flips += outcome.greedy_after == spec.target_token;
    base_correct += outcome.greedy_before == truth_token;
    edit_correct += outcome.greedy_after == truth_token;
    lines << ordered_json{{"id", d.sample_id},
                          {"verdict", d.verdict},
                          {"target_token", spec.target_token},
                          {"alpha", alpha},
                          {"logit_delta_target", outcome.logit_delta_target},
                          {"greedy_before", outcome.greedy_before},
                          {"greedy_after", outcome.greedy_after}}
                 .dump()
          << '\n';
  }
  const double n = static_cast<double>(run.decisions.size());
  ordered_json summary = {{"alpha", alpha},
                          {"flip_rate", static_cast<double>(flips) / n},
                          {"base_accuracy", static_cast<double>(base_correct) / n},
                          {"edited_accuracy", static_cast<double>(edit_correct) / n}};
  return EditSummary{summary, lines.str(),
                     RepresentationSet(run.other_category + "-edited", std::move(edited), run.test.sample_ids())};
}

}  // namespace

ordered_json cmd_pipeline(const RunConfig& cfg) {
  const RunInputs in = load_run_inputs(cfg);
  const bool editing = !in.tokens.empty();
  const auto tokens = editing ? category_tokens(in) : std::map<std::string, std::string>{};

  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < in.sets.size(); ++i) {
    if (i != in.self_index) others.push_back(i);
  }

  std::vector<std::optional<PairRun>> runs(others.size());
  std::vector<std::optional<EditSummary>> edits(others.size());
  parallel_for(others.size(), cfg.workers, [&](std::size_t p) {
    runs[p] = run_pair(in, others[p], cfg);
    if (editing) edits[p] = edit_pair(*runs[p], *in.head, tokens, cfg.alpha);
  });

  DiagnosticsOptions dopts;
  dopts.k = cfg.k;
  dopts.seed = cfg.seed;
  dopts.normalize_rows = cfg.normalize_rows;
  dopts.workers = cfg.workers;
  const auto diag = run_diagnostics(in.sets, in.head ? &*in.head : nullptr, dopts);

  // Everything is computed; only now touch the output directory.
  ordered_json token_json = ordered_json::object();
  for (const auto& [role, tok] : in.tokens) token_json[role] = tok;
  ordered_json report = {{"config",
                          {{"self", in.sets[in.self_index].category()},
                           {"k", cfg.k},
                           {"alpha", cfg.alpha},
                           {"variant", to_string(cfg.variant)},
                           {"seed", cfg.seed},
                           {"split", cfg.no_split ? "none" : "80/20"},
                           {"normalize_rows", cfg.normalize_rows},
                           {"tokens", token_json}}}};

  std::ostringstream table3;
  table3 << "self,other,variant,k,accuracy,f1" << (cfg.macro_f1 ? ",macro_f1" : "")
         << ",base_accuracy,edited_accuracy\n";
  ordered_json pairs = ordered_json::array();
  double acc_sum = 0.0, f1_sum = 0.0;
  for (std::size_t p = 0; p < runs.size(); ++p) {
    const auto& run = *runs[p];
    ordered_json territories = ordered_json::array();
    for (const auto& t : run.territories) territories.push_back(territory_summary_json(t));
    ordered_json entry = {{"self", run.self_category},
                          {"other", run.other_category},
                          {"n_test", run.decisions.size()},
                          {"eval", eval_json(run.eval)},
                          {"territories", territories},
                          {"edit", edits[p] ? edits[p]->summary : ordered_json(nullptr)}};
    pairs.push_back(entry);
    acc_sum += run.eval.accuracy;
    f1_sum += run.eval.f1;
    table3 << run.self_category << ',' << run.other_category << ',' << to_string(cfg.variant) << ',' << cfg.k << ','
           << fmt(run.eval.accuracy) << ',' << fmt(run.eval.f1);
    if (cfg.macro_f1) table3 << ',' << fmt(run.eval.macro_f1);
    if (edits[p]) {
      table3 << ',' << fmt(edits[p]->summary["base_accuracy"].get<double>()) << ','
             << fmt(edits[p]->summary["edited_accuracy"].get<double>());
    } else {
      table3 << ",,";
    }
    table3 << '\n';
  }
  report["pairs"] = pairs;
  report["mean_accuracy"] = acc_sum / static_cast<double>(runs.size());
  report["mean_f1"] = f1_sum / static_cast<double>(runs.size());
  report["diagnostics"] = "diagnostics.json";

  const fs::path& out = cfg.out;
  for (std::size_t p = 0; p < runs.size(); ++p) {
    const auto& run = *runs[p];
    std::ostringstream lines;
    for (const auto& d : run.decisions) lines << decision_json(d).dump() << '\n';
    const std::string tag = file_token(run.other_category);
    write_text(out / ("decisions_" + tag + ".jsonl"), lines.str());
    if (edits[p]) {
      write_text(out / ("edits_" + tag + ".jsonl"), edits[p]->effects_jsonl);
      write_representations(edits[p]->edited, out / ("edited_" + tag + ".repb"), FileFormat::Repb);
    }
  }
  write_text(out / "diagnostics.json", diag.report.dump(2) + "\n");
  write_text(out / "table1.csv", diag.table1_csv);
  write_text(out / "table2.csv", diag.table2_csv);
  write_text(out / "table3.csv", table3.str());
  write_text(out / "report.json", report.dump(2) + "\n");
  return report;
}

std::string cmd_sweep_k(const RunConfig& cfg, const std::vector<Eigen::Index>& k_values) {
  const RunInputs in = load_run_inputs(cfg);
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < in.sets.size(); ++i) {
    if (i != in.self_index) others.push_back(i);
  }
  std::ostringstream csv;
  csv << 'k';
  for (auto o : others) csv << ",acc_" << in.sets[o].category();
  csv << ",mean_acc\n";
  for (const auto k : k_values) {
    RunConfig c = cfg;
    c.k = k;
    std::vector<double> acc(others.size());
    try {
      parallel_for(others.size(), cfg.workers, [&](std::size_t p) { acc[p] = run_pair(in, others[p], c).eval.accuracy; });
    } catch (const Error& e) {
      rethrow_with(e, "sweep-k at k=" + std::to_string(k) + ": ");
    }
    csv << k;
    double sum = 0.0;
    for (double a : acc) {
      csv << ',' << fmt(a);
      sum += a;
    }
    csv << ',' << fmt(sum / static_cast<double>(acc.size())) << '\n';
  }
  return csv.str();
}

std::string cmd_sweep_alpha(const RunConfig& cfg, const std::vector<double>& alpha_values) {
  const RunInputs in = load_run_inputs(cfg);
  if (!in.head) throw Error(ErrorKind::MissingHead, "sweep-alpha needs a vocabulary head in the manifest");
  if (in.tokens.empty()) throw Error(ErrorKind::InvalidArgument, "sweep-alpha needs --tokens self=...,other=...");
  const auto tokens = category_tokens(in);

  std::vector<PairRun> runs;
  for (std::size_t i = 0; i < in.sets.size(); ++i) {
    if (i != in.self_index) runs.push_back(run_pair(in, i, cfg));
  }

  std::ostringstream csv;
  csv << "alpha,flip_rate,mean_acc\n";
  for (const double alpha : alpha_values) {
    std::size_t flips = 0, total = 0;
    double acc_sum = 0.0;
    for (const auto& run : runs) {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < run.decisions.size(); ++i) {
        const auto& d = run.decisions[i];
        const EditSpec spec = make_edit_spec(*in.head, d.verdict, tokens, alpha);
        const auto outcome = apply_edit(run.test.row(static_cast<Eigen::Index>(i)), spec, *in.head);
        flips += outcome.greedy_after == spec.target_token;
        correct += outcome.greedy_after == tokens.at(run.labels.at(d.sample_id));
      }
      total += run.decisions.size();
      acc_sum += static_cast<double>(correct) / static_cast<double>(run.decisions.size());
    }
    csv << fmt(alpha) << ',' << fmt(static_cast<double>(flips) / static_cast<double>(total)) << ','
        << fmt(acc_sum / static_cast<double>(runs.size())) << '\n';
  }
  return csv.str();
}

// ---------------------------------------------------------------------------
// Smaller subcommands

std::string cmd_classify(const ClassifyArgs& args) {
  const RepresentationSet input = load_representations(args.input, args.format, args.category);
  std::vector<EnergyDecision> decisions;
  if (!args.territories.empty()) {
    if (args.variant == Variant::Cs) {
      throw Error(ErrorKind::InvalidArgument, "the centroid variant needs --manifest, not territory files");
    }
    std::vector<TerritoryBasis> territories;
    for (const auto& p : args.territories) territories.push_back(load_territory(p));
    decisions = classify(input, std::span<const TerritoryBasis>(territories), args.self_category);
  } else {
    if (args.manifest.empty()) throw Error(ErrorKind::InvalidArgument, "classify needs --territory files or --manifest");
    const auto sets = load_all(load_manifest(args.manifest));
    if (args.variant == Variant::Cs) {
      std::vector<Centroid> centroids;
      for (const auto& s : sets) centroids.push_back(build_centroid(s));
      decisions = classify(input, std::span<const Centroid>(centroids), args.self_category);
    } else {
      const auto method = args.variant == Variant::Svd ? TerritoryMethod::Svd : TerritoryMethod::Pca;
      std::vector<TerritoryBasis> territories;
      for (const auto& s : sets) territories.push_back(build_territory(s, args.k, method, {args.normalize_rows}));
      decisions = classify(input, std::span<const TerritoryBasis>(territories), args.self_category);
    }
  }
  std::ostringstream lines;
  for (const auto& d : decisions) lines << decision_json(d).dump() << '\n';
  return lines.str();
}

std::string cmd_edit(const EditArgs& args) {
  const RepresentationSet input = load_representations(args.input, FileFormat::Repb);
  const VocabHead head = load_vocab_head(args.head);
  if (!args.tokens.contains("self") || !args.tokens.contains("other")) {
    throw Error(ErrorKind::InvalidArgument, "edit needs --tokens self=TOKEN,other=TOKEN");
  }
  if (args.self_category.empty()) throw Error(ErrorKind::InvalidArgument, "edit needs --self");

  std::map<std::string, std::string> verdicts;
  std::ifstream is(args.verdicts);
  if (!is) throw Error(ErrorKind::Io, "cannot open '" + args.verdicts.string() + "'");
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      verdicts[j.at("id").get<std::string>()] = j.at("verdict").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Format, args.verdicts.string() + ": bad verdict line: " + e.what());
    }
  }

  MatrixF edited(input.rows(), input.dim());
  std::ostringstream lines;
  for (Eigen::Index i = 0; i < input.rows(); ++i) {
    const auto& id = input.sample_ids()[static_cast<std::size_t>(i)];
    const auto it = verdicts.find(id);
    if (it == verdicts.end()) throw Error(ErrorKind::Unlabeled, "no verdict for sample '" + id + "'");
    const std::map<std::string, std::string> token_map{
        {it->second, args.tokens.at(it->second == args.self_category ? "self" : "other")}};
    const EditSpec spec = make_edit_spec(head, it->second, token_map, args.alpha);
    const auto outcome = apply_edit(input.row(i), spec, head);
    edited.row(i) = outcome.edited.transpose().cast<float>();
    lines << ordered_json{{"id", id},
                          {"verdict", it->second},
                          {"target_token", spec.target_token},
                          {"alpha", args.alpha},
                          {"logit_delta_target", outcome.logit_delta_target},
                          {"greedy_before", outcome.greedy_before},
                          {"greedy_after", outcome.greedy_after}}
                 .dump()
          << '\n';
  }
  const RepresentationSet out(input.category(), std::move(edited), input.sample_ids());
  std::error_code ec;
  fs::create_directories(args.out, ec);
  write_representations(out, args.out / "edited.repb", FileFormat::Repb);
  write_text(args.out / "effects.jsonl", lines.str());
  return lines.str();
}

std::string cmd_build(const fs::path& manifest, Eigen::Index k, TerritoryMethod method, const fs::path& out,
                      const std::string& category, bool normalize_rows) {
  const Manifest m = load_manifest(manifest);
  std::vector<TerritoryBasis> built;
  for (const auto& e : m.entries) {
    if (!category.empty() && e.category != category) continue;
    const auto set = load_representations(e.path, e.format, e.category);
    built.push_back(build_territory(set, k, method, {normalize_rows}));
  }
  if (built.empty()) throw Error(ErrorKind::InvalidArgument, "no category '" + category + "' in the manifest");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + out.string() + "': " + ec.message());
  std::ostringstream lines;
  for (const auto& t : built) {
    const fs::path path = out / (file_token(t.category) + ".territory.repb");
    write_territory(t, path);
    auto j = territory_summary_json(t);
    j["path"] = path.generic_string();
    lines << j.dump() << '\n';
  }
  return lines.str();
}

std::string cmd_ingest(const fs::path& input, FileFormat format, const std::string& category, const fs::path& out,
                       const fs::path& manifest) {
  std::ostringstream lines;
  if (!manifest.empty()) {
    const Manifest m = load_manifest(manifest);
    for (const auto& s : load_all(m)) {
      lines << ordered_json{{"category", s.category()}, {"n", s.rows()}, {"d", s.dim()}}.dump() << '\n';
    }
    if (m.head_path) {
      const auto head = load_vocab_head(*m.head_path);
      lines << ordered_json{{"head", m.head_path->generic_string()},
                            {"vocab_size", head.vocab_size()},
                            {"d", head.dim()},
                            {"bias", head.has_bias()}}
                   .dump()
            << '\n';
    }
    return lines.str();
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "ingest needs --out for file conversion");
  const auto set = load_representations(input, format, category);
  write_representations(set, out, FileFormat::Repb);
  lines << ordered_json{{"category", set.category()}, {"n", set.rows()}, {"d", set.dim()}, {"path", out.generic_string()}}
               .dump()
        << '\n';
  return lines.str();
}

std::string cmd_diagnose(const fs::path& manifest, const DiagnosticsOptions& opts, const fs::path& out) {
  const Manifest m = load_manifest(manifest);
  const auto sets = load_all(m);
  std::optional<VocabHead> head;
  if (m.head_path) head = load_vocab_head(*m.head_path);
  const auto bundle = run_diagnostics(sets, head ? &*head : nullptr, opts);
  const std::string text = bundle.report.dump(2) + "\n";
  if (!out.empty()) {
    write_text(out / "diagnostics.json", text);
    write_text(out / "table1.csv", bundle.table1_csv);
    write_text(out / "table2.csv", bundle.table2_csv);
  }
  return text;
}

std::string cmd_synth(const fs::path& config, const std::string& preset, std::optional<std::uint64_t> seed,
                      const fs::path& out) {
  SynthConfig cfg;
  if (!preset.empty()) {
    auto p = preset_config(preset, seed.value_or(42));
    if (!p) {
      throw Error(ErrorKind::InvalidArgument, "unknown preset '" + preset +
                                                  "' (expected paper-regime, mean-offset or generalization)");
    }
    cfg = *p;
  } else {
    std::ifstream is(config);
    if (!is) throw Error(ErrorKind::Io, "cannot open synth config '" + config.string() + "'");
    try {
      cfg = synth_config_from_json(json::parse(is));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::Format, config.string() + ": " + e.what());
    }
    if (seed) cfg.seed = *seed;
  }
  const auto output = generate(cfg);
  const auto manifest = write_synth(output, cfg, out);
  ordered_json j = {{"manifest", manifest.generic_string()}, {"categories", ordered_json::array()}};
  for (const auto& s : output.sets) j["categories"].push_back({{"category", s.category()}, {"n", s.rows()}, {"d", s.dim()}});
  return j.dump() + "\n";
}

std::string cmd_report(const fs::path& report, bool macro_f1) {
  std::ifstream is(report);
  if (!is) throw Error(ErrorKind::Io, "cannot open report '" + report.string() + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Format, report.string() + ": " + e.what());
  }
  std::ostringstream csv;
  csv << "self,other,variant,k,accuracy,f1" << (macro_f1 ? ",macro_f1" : "") << ",base_accuracy,edited_accuracy\n";
  try {
    const auto& c = j.at("config");
    for (const auto& p : j.at("pairs")) {
      const auto& e = p.at("eval");
      csv << p.at("self").get<std::string>() << ',' << p.at("other").get<std::string>() << ','
          << c.at("variant").get<std::string>() << ',' << c.at("k").get<long>() << ','
          << fmt(e.at("accuracy").get<double>()) << ',' << fmt(e.at("f1").get<double>());
      if (macro_f1) csv << ',' << fmt(e.at("macro_f1").get<double>());
      if (p.at("edit").is_object()) {
        csv << ',' << fmt(p["edit"].at("base_accuracy").get<double>()) << ','
            << fmt(p["edit"].at("edited_accuracy").get<double>());
      } else {
        csv << ",,";
      }
      csv << '\n';
    }
    csv << "mean,,,," << fmt(j.at("mean_accuracy").get<double>()) << ',' << fmt(j.at("mean_f1").get<double>())
        << (macro_f1 ? "," : "") << ",,\n";
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, report.string() + ": not a pipeline report: " + e.what());
  }
  return csv.str();
}

}  // namespace cosur
