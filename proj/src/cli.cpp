#include "citedag/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <sstream>

#include "citedag/config.hpp"
#include "citedag/dataset_builder.hpp"
#include "citedag/json_io.hpp"
#include "citedag/llm_gateway.hpp"
#include "citedag/s2_client.hpp"
#include "citedag/serializer.hpp"
#include "citedag/subgraph_builder.hpp"
#include "citedag/surface_metrics.hpp"
#include "citedag/tournament.hpp"
#include "citedag/util.hpp"

namespace citedag {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

// UTC timestamp; SOURCE_DATE_EPOCH pins it for reproducible runs.
std::string timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) t = static_cast<std::time_t>(std::atoll(epoch));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string digest_of(const fs::path& p) {
  if (fs::is_regular_file(p)) return sha256_hex(read_file(p));
  return "missing";
}

std::string jsonl(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n"; }

struct Common {
  std::string config_path;
  std::string run_manifest = "run_manifest.json";
  std::string log_level = "warn";
};

struct RunContext {
  PipelineConfig config;
  std::map<std::string, std::string> inputs;  // path -> sha256
  std::vector<std::string> errors;
  json extra = json::object();

  void input(const fs::path& p) { inputs[p.string()] = digest_of(p); }
};

void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") out << text;
  else write_file(path, text);
}

// --- subcommands ---

struct FetchArgs {
  std::vector<std::string> seeds;
  std::string manifest;
  std::string cache = "s2_cache";
  bool offline = false;
  double rps = 1.0;
};

int cmd_fetch(const FetchArgs& a, RunContext& ctx, std::ostream& out) {
  std::vector<PaperId> seeds;
  for (const auto& s : a.seeds) seeds.emplace_back(s);
  if (!a.manifest.empty()) {
    ctx.input(a.manifest);
    for (const auto& e : load_seed_manifest(a.manifest, "train").seeds) seeds.push_back(e.id);
  }
  if (seeds.empty()) throw UsageError("fetch needs --seed or --manifest");
  FetchPolicy policy;
  policy.cache_dir = a.cache;
  policy.offline_only = a.offline;
  policy.requests_per_second = a.rps;
  S2Client client(policy, a.offline ? nullptr : make_http_transport(60));

  std::size_t records = 0, missing = 0;
  for (const auto& seed_id : seeds) {
    PaperRecord seed;
    try {
      seed = client.fetch_record(seed_id);
      client.fetch_citation_links(seed_id);
    } catch (const FetchError& e) {
      ctx.errors.push_back("seed " + seed_id.str() + ": " + e.what());
      continue;
    }
    ++records;
    for (const auto& r1 : seed.reference_ids) {
      try {
        auto ref = client.fetch_record(r1);
        ++records;
        for (const auto& r2 : ref.reference_ids) {
          try {
            client.fetch_record(r2);
            ++records;
          } catch (const FetchError&) {
            ++missing;
          }
        }
      } catch (const FetchError&) {
        ++missing;
      }
    }
  }
  out << "records available: " << records << ", unretrievable: " << missing << ", network calls: " << client.network_calls()
      << "\n";
  ctx.extra["records"] = records;
  ctx.extra["unretrievable"] = missing;
  return ctx.errors.empty() ? 0 : 1;
}

struct BuildArgs {
  std::string seed;
  std::string universe = "s2_cache";
  bool offline = false;
  std::string out;
  int year = 0;
};

int cmd_build_graph(const BuildArgs& a, RunContext& ctx, std::ostream& out) {
  Universe universe(a.universe, a.offline ? nullptr : make_http_transport(60));
  auto extractor = make_gateway(ctx.config.llm.extractor, Role::kExtractor);
  SeedEntry entry{PaperId(a.seed), a.year, "", ""};
  if (entry.year == 0) {
    auto rec = universe.seed(entry.id);
    entry.year = rec.year.value_or(0);
  }
  auto build = build_seed(entry, universe, extractor, ctx.config);
  for (const auto& l : build.log) spdlog::info("{}", l);
  emit(out, a.out, canonical_dump(graph_file_json(build, config_hash(ctx.config))));
  return 0;
}

struct SerializeArgs {
  std::string graph;
  std::string variant = "graph";
  std::string out;
  bool sft = false;
};

int cmd_serialize(const SerializeArgs& a, RunContext& ctx, std::ostream& out) {
  ctx.input(a.graph);
  if (!fs::exists(a.graph)) throw UsageError("graph file not found: " + a.graph);
  const auto g = subgraph_from_json(json::parse(read_file(a.graph)));
  if (auto v = validate_subgraph(g); !v.empty()) throw Error("input graph is invalid: " + v.front());
  auto variant = prompt_variant_from_string(a.variant);
  if (!variant) throw UsageError("unknown variant " + a.variant);
  const SerializeOptions opts{ctx.config.max_authors};
  std::string text;
  if (a.sft) {
    text = jsonl(to_json(make_sft_example(g, *variant, opts)));
  } else {
    text = serialize(g, *variant, opts);
    if (auto t = estimate_tokens(text); t > static_cast<std::size_t>(ctx.config.max_prompt_tokens))
      spdlog::warn("prompt estimate {} tokens exceeds max_prompt_tokens {}", t, ctx.config.max_prompt_tokens);
  }
  emit(out, a.out, text);
  return 0;
}

struct DatasetArgs {
  std::string train, validation, test;
  std::string universe = "s2_cache";
  std::string out = "corpus";
  bool offline = false;
  bool generate = false;
};

int cmd_dataset(const DatasetArgs& a, RunContext& ctx, std::ostream& out) {
  std::vector<SplitManifest> splits;
  DatasetOptions opts;
  for (auto [path, name] : {std::pair{a.train, "train"}, {a.validation, "validation"}, {a.test, "test"}}) {
    if (path.empty()) continue;
    ctx.input(path);
    splits.push_back(load_seed_manifest(path, name));
    opts.input_digests[std::string(name) + "_manifest"] = digest_of(path);
  }
  if (splits.empty()) throw UsageError("dataset needs at least one of --train, --validation, --test");
  opts.universe = a.universe;
  opts.out_dir = a.out;
  opts.generate_candidates = a.generate;
  opts.created = timestamp();
  opts.transport = a.offline ? nullptr : make_http_transport(60);
  const auto report = build_corpus(splits, ctx.config, opts);
  std::size_t ok = 0;
  json failed = json::array();
  for (const auto& s : report.seeds) {
    if (s.ok) ++ok;
    else failed.push_back("seed " + s.id.str() + ": " + s.error);
  }
  ctx.extra["seed_failures"] = failed;
  out << "seeds built: " << ok << "/" << report.seeds.size() << ", leak violations: " << report.leak_violations
      << (report.aborted ? ", ABORTED: failure budget exceeded" : "") << "\n";
  ctx.extra["seeds_ok"] = ok;
  ctx.extra["seeds_failed"] = report.failures;
  ctx.extra["aborted"] = report.aborted;
  ctx.extra["leak_violations"] = report.leak_violations;
  if (report.aborted) ctx.errors.push_back("failure budget exceeded");
  if (report.leak_violations) ctx.errors.push_back("leak violations between train and test");
  // Seed failures within the budget are tolerated.
  return report.aborted || report.leak_violations ? 1 : 0;
}

struct TournamentArgs {
  std::vector<std::string> methods;  // name=path
  std::string seeds;
  std::string judge_script;
  std::string report;
  std::string ledger = "tournament.json";
  std::string corpus;
  int workers = 0;
};

int cmd_tournament(const TournamentArgs& a, RunContext& ctx, std::ostream& out) {
  std::vector<MethodEntry> methods;
  for (const auto& arg : a.methods) {
    auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--method expects name=path, got " + arg);
    const fs::path path = arg.substr(eq + 1);
    ctx.input(path);
    methods.push_back(load_method_entry(arg.substr(0, eq), path));
  }
  std::vector<PaperId> seeds;
  if (!a.seeds.empty()) {
    ctx.input(a.seeds);
    for (const auto& e : load_seed_manifest(a.seeds, "test").seeds) seeds.push_back(e.id);
  } else if (!methods.empty()) {
    for (const auto& [id, _] : methods.front().ideas) seeds.push_back(id);
  }
  auto judge_cfg = ctx.config.llm.judge;
  if (!a.judge_script.empty()) {
    judge_cfg.backend = "stub";
    judge_cfg.stub_script = a.judge_script;
    ctx.input(a.judge_script);
  }
  auto gateway = make_gateway(judge_cfg, Role::kJudge);
  std::map<PaperId, std::string> contexts;
  if (!a.corpus.empty())
    for (const auto& g : load_corpus(a.corpus).graphs)
      contexts[g.graph.seed.id] = "venue: " + g.graph.seed.venue + "    year: " +
                                  (g.graph.seed.year ? std::to_string(*g.graph.seed.year) : "n/a");
  const auto dims = ctx.config.judge_dimensions;
  JudgeFn judge = [&](const PaperId& seed, const FiveFieldIdea& x, const FiveFieldIdea& y) {
    auto it = contexts.find(seed);
    const auto context = "seed paper " + seed.str() + (it == contexts.end() ? "" : "\n" + it->second);
    return judge_pair(gateway, context, x, y, dims);
  };
  RoundRobinOptions rr;
  rr.dimensions = dims;
  rr.workers = a.workers > 0 ? a.workers : ctx.config.workers;
  rr.judge_template_hash = judge_template_hash();
  const auto ledger = run_round_robin(methods, seeds, judge, rr);
  AggregateOptions agg;
  agg.bootstrap_resamples = ctx.config.bootstrap_resamples;
  const auto summary = aggregate(ledger, agg);
  emit(out, a.report, render_report(summary));
  write_file(a.ledger, render_ledger_json(ledger, summary));
  ctx.extra["abstentions"] = summary.abstentions;
  ctx.extra["judge_template_sha256"] = summary.judge_template_hash;
  return 0;
}

struct MetricsArgs {
  std::string corpus;
  std::string candidates;
  std::string gold;
  std::string embeddings;
  std::string out;
};

std::map<PaperId, std::vector<FiveFieldIdea>> read_candidates(const fs::path& path) {
  std::map<PaperId, std::vector<std::pair<int, FiveFieldIdea>>> rows;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto j = json::parse(line);
    PaperId seed(j.at("seed_id").get<std::string>());
    FiveFieldIdea idea;  // failed attempts stay as invalid (empty) ideas
    if (j.contains("idea") && !j["idea"].is_null()) idea = idea_from_json(j["idea"]);
    rows[seed].emplace_back(j.value("k", static_cast<int>(rows[seed].size())), idea);
  }
  std::map<PaperId, std::vector<FiveFieldIdea>> out;
  for (auto& [seed, list] : rows) {
    std::ranges::stable_sort(list, {}, &std::pair<int, FiveFieldIdea>::first);
    for (auto& [k, idea] : list) out[seed].push_back(std::move(idea));
  }
  return out;
}

int cmd_metrics(const MetricsArgs& a, RunContext& ctx, std::ostream& out) {
  std::map<PaperId, FiveFieldIdea> gold;
  std::map<PaperId, std::vector<FiveFieldIdea>> candidates;
  if (!a.corpus.empty()) {
    for (const auto& g : load_corpus(a.corpus).graphs)
      if (g.graph.seed.idea) gold[g.graph.seed.id] = *g.graph.seed.idea;
    for (const auto& e : fs::directory_iterator(fs::path(a.corpus) / "seeds"))
      if (fs::exists(e.path() / "candidates.jsonl"))
        for (auto& [seed, list] : read_candidates(e.path() / "candidates.jsonl")) candidates[seed] = std::move(list);
  }
  if (!a.candidates.empty()) {
    ctx.input(a.candidates);
    for (auto& [seed, list] : read_candidates(a.candidates)) candidates[seed] = std::move(list);
  }
  if (!a.gold.empty()) {
    ctx.input(a.gold);
    std::istringstream in(read_file(a.gold));
    std::string line;
    while (std::getline(in, line))
      if (!trim(line).empty()) {
        auto j = json::parse(line);
        gold[PaperId(j.at("seed_id").get<std::string>())] = idea_from_json(j.at("idea"));
      }
  }
  if (candidates.empty()) throw UsageError("metrics needs candidates (--corpus with candidates.jsonl, or --candidates)");
  std::optional<EmbeddingSet> emb;
  if (!a.embeddings.empty()) {
    ctx.input(a.embeddings);
    emb = load_embeddings(a.embeddings);
  }
  std::vector<MetricsRow> rows;
  for (const auto& [seed, list] : candidates) {
    auto g = gold.find(seed);
    if (g == gold.end()) {
      ctx.errors.push_back("no gold idea for seed " + seed.str());
      continue;
    }
    MetricsRow row;
    row.seed = seed;
    row.valid_candidates = static_cast<std::size_t>(std::ranges::count_if(list, &FiveFieldIdea::is_valid));
    try {
      const auto best = oracle_top1(list, g->second, method_rouge_l);
      row.oracle_index = best.index;
      row.rouge_l = best.score;
    } catch (const NoValidCandidate& e) {
      ctx.errors.push_back("seed " + seed.str() + ": " + e.what());
      continue;
    }
    if (emb) {
      auto s = emb->seeds.find(seed);
      if (s != emb->seeds.end() && s->second.gold && !s->second.candidates.empty()) {
        std::vector<FieldEmbeddings> cands;
        for (const auto& [k, fe] : s->second.candidates) cands.push_back(fe);
        row.wtop1 = wtop1(cands, *s->second.gold, ctx.config.wtop1_field_weights);
      }
    }
    rows.push_back(row);
  }
  emit(out, a.out, render_metrics_report(rows, ctx.config.wtop1_field_weights, emb ? emb->source_tag : ""));
  return ctx.errors.empty() ? 0 : 1;
}

struct StatsArgs {
  std::string corpus;
  std::string out;
};

int cmd_stats(const StatsArgs& a, RunContext& ctx, std::ostream& out) {
  const auto corpus = load_corpus(a.corpus);
  if (corpus.graphs.empty()) throw Error("corpus " + a.corpus + " holds no built graphs");
  std::vector<AnnotatedSubgraph> graphs;
  for (const auto& g : corpus.graphs) graphs.push_back(g.graph);
  emit(out, a.out, canonical_dump(to_json(corpus_stats(graphs, corpus.prompt_tokens, ctx.config.max_prompt_tokens))));
  return 0;
}

struct LeakArgs {
  std::string train, test, corpus, universe, out;
};

int cmd_leak_check(const LeakArgs& a, RunContext& ctx, std::ostream& out) {
  ctx.input(a.train);
  ctx.input(a.test);
  const auto train = load_seed_manifest(a.train, "train");
  const auto test = load_seed_manifest(a.test, "test");
  std::vector<TrainGraph> graphs;
  if (!a.corpus.empty()) {
    std::set<PaperId> train_ids;
    for (const auto& s : train.seeds) train_ids.insert(s.id);
    for (auto& g : load_corpus(a.corpus).graphs)
      if (train_ids.contains(g.graph.seed.id)) graphs.push_back(std::move(g));
  }
  std::map<PaperId, std::string> titles;
  if (!a.universe.empty()) {
    Universe universe(a.universe);
    for (const auto& s : test.seeds)
      if (auto r = universe.lookup(s.id)) titles[s.id] = r->title;
  }
  const auto violations = leak_check(train, test, graphs, titles);
  json arr = json::array();
  for (const auto& v : violations) arr.push_back(to_json(v));
  emit(out, a.out, canonical_dump(arr));
  ctx.extra["leak_violations"] = violations.size();
  return violations.empty() ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"citedag: citation-DAG prompts and SFT data from seed papers"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "pipeline config (JSON); defaults apply when omitted");
    sub->add_option("--run-manifest", common.run_manifest, "where to write the run manifest");
    sub->add_option("--log-level", common.log_level, "trace|debug|info|warn|error")->capture_default_str();
  };

  FetchArgs fa;
  auto* fetch = app.add_subcommand("fetch", "fill the metadata cache for seeds and their 2-hop references");
  fetch->add_option("--seed", fa.seeds, "seed paper id (repeatable)");
  fetch->add_option("--manifest", fa.manifest, "seed manifest (TSV)");
  fetch->add_option("--cache", fa.cache, "cache directory")->capture_default_str();
  fetch->add_flag("--offline", fa.offline, "only check the cache");
  fetch->add_option("--rps", fa.rps, "requests per second")->capture_default_str();
  add_common(fetch);

  BuildArgs ba;
  auto* bg = app.add_subcommand("build-graph", "build one seed's annotated subgraph");
  bg->add_option("--seed", ba.seed, "seed paper id")->required();
  bg->add_option("--universe,--cache", ba.universe, "metadata cache / fixture directory")->capture_default_str();
  bg->add_flag("--offline", ba.offline, "never touch the network");
  bg->add_option("--year", ba.year, "seed year when metadata lacks it");
  bg->add_option("--out", ba.out, "output file (default stdout)");
  add_common(bg);

  SerializeArgs sa;
  auto* ser = app.add_subcommand("serialize", "render a graph JSON file as a prompt");
  ser->add_option("--graph", sa.graph, "graph JSON")->required();
  ser->add_option("--variant", sa.variant, "graph|plain")->capture_default_str();
  ser->add_flag("--sft", sa.sft, "emit one SFT JSONL record instead of the prompt");
  ser->add_option("--out", sa.out, "output file (default stdout)");
  add_common(ser);

  DatasetArgs da;
  auto* ds = app.add_subcommand("dataset", "build a corpus over seed manifests");
  ds->add_option("--train", da.train, "train seed manifest");
  ds->add_option("--validation", da.validation, "validation seed manifest");
  ds->add_option("--test", da.test, "test seed manifest");
  ds->add_option("--universe,--cache", da.universe, "metadata cache / fixture directory")->capture_default_str();
  ds->add_option("--out", da.out, "corpus directory")->capture_default_str();
  ds->add_flag("--offline", da.offline, "never touch the network");
  ds->add_flag("--generate", da.generate, "sample candidate ideas from the graph prompt");
  add_common(ds);

  TournamentArgs ta;
  auto* tr = app.add_subcommand("tournament", "round-robin pairwise judging");
  tr->add_option("--method", ta.methods, "name=ideas.jsonl (repeatable)")->required();
  tr->add_option("--seeds", ta.seeds, "seed manifest restricting the roster");
  tr->add_option("--judge-script", ta.judge_script, "stub judge script (forces the stub backend)");
  tr->add_option("--corpus", ta.corpus, "corpus directory for seed context");
  tr->add_option("--report", ta.report, "report file (default stdout)");
  tr->add_option("--ledger", ta.ledger, "JSON ledger file")->capture_default_str();
  tr->add_option("--workers", ta.workers, "concurrent judge calls (default from config)");
  add_common(tr);

  MetricsArgs ma;
  auto* mt = app.add_subcommand("metrics", "surface metrics with oracle top-1 selection");
  mt->add_option("--corpus", ma.corpus, "corpus directory with candidates.jsonl files");
  mt->add_option("--candidates", ma.candidates, "candidate JSONL {seed_id, k, idea}");
  mt->add_option("--gold", ma.gold, "gold JSONL {seed_id, idea}");
  mt->add_option("--embeddings", ma.embeddings, "embedding JSONL for wTop1");
  mt->add_option("--out", ma.out, "report file (default stdout)");
  add_common(mt);

  StatsArgs st;
  auto* stats = app.add_subcommand("stats", "corpus statistics");
  stats->add_option("--corpus", st.corpus, "corpus directory")->required();
  stats->add_option("--out", st.out, "output file (default stdout)");
  add_common(stats);

  LeakArgs la;
  auto* lc = app.add_subcommand("leak-check", "check test seeds against training data");
  lc->add_option("--train", la.train, "train seed manifest")->required();
  lc->add_option("--test", la.test, "test seed manifest")->required();
  lc->add_option("--corpus", la.corpus, "corpus directory holding the train graphs");
  lc->add_option("--universe", la.universe, "metadata directory for test seed titles");
  lc->add_option("--out", la.out, "violations JSON (default stdout)");
  add_common(lc);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  spdlog::set_level(spdlog::level::from_str(common.log_level));

  RunContext ctx;
  int status = 0;
  try {
    if (!common.config_path.empty()) {
      if (!fs::exists(common.config_path)) throw UsageError("config file not found: " + common.config_path);
      ctx.input(common.config_path);
      ctx.config = load_config(common.config_path);
    }
    if (name == "fetch") status = cmd_fetch(fa, ctx, out);
    else if (name == "build-graph") status = cmd_build_graph(ba, ctx, out);
    else if (name == "serialize") status = cmd_serialize(sa, ctx, out);
    else if (name == "dataset") status = cmd_dataset(da, ctx, out);
    else if (name == "tournament") status = cmd_tournament(ta, ctx, out);
    else if (name == "metrics") status = cmd_metrics(ma, ctx, out);
    else if (name == "stats") status = cmd_stats(st, ctx, out);
    else if (name == "leak-check") status = cmd_leak_check(la, ctx, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    ctx.errors.push_back(e.what());
    status = 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    ctx.errors.push_back(e.what());
    status = 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    ctx.errors.push_back(e.what());
    status = 1;
  }
  if (status == 0 && !ctx.errors.empty()) status = 1;

  if (!common.run_manifest.empty()) {
    json manifest = {
        {"command", name},
        {"args", args},
        {"created", timestamp()},
        {"config_hash", config_hash(ctx.config)},
        {"inputs", ctx.inputs},
        {"errors", ctx.errors},
        {"exit_status", status},
        {"details", ctx.extra},
    };
    try {
      write_file(common.run_manifest, canonical_dump(manifest));
    } catch (const std::exception& e) {
      err << "could not write run manifest: " << e.what() << "\n";
      if (status == 0) status = 1;
    }
  }
  return status;
}

}  // namespace citedag
