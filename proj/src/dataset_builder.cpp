#include "citedag/dataset_builder.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "citedag/json_io.hpp"
#include "citedag/serializer.hpp"
#include "citedag/subgraph_builder.hpp"
#include "citedag/tei_parser.hpp"
#include "citedag/util.hpp"

namespace citedag {

namespace fs = std::filesystem;

SplitManifest parse_seed_manifest(const std::string& text, const std::string& split) {
  SplitManifest m;
  m.split = split;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    const auto where = split + " manifest line " + std::to_string(lineno);
    if (cols.size() < 3 || cols.size() > 4) throw DatasetError(where + ": expected id, year, venue[, title]");
    SeedEntry e;
    if (trim(cols[0]).empty()) throw DatasetError(where + ": empty id");
    e.id = PaperId(trim(cols[0]));
    try {
      std::size_t used = 0;
      e.year = std::stoi(cols[1], &used);
      if (used != cols[1].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw DatasetError(where + ": bad year '" + cols[1] + "'");
    }
    e.venue = trim(cols[2]);
    if (cols.size() == 4) e.title = trim(cols[3]);
    m.seeds.push_back(std::move(e));
  }
  return m;
}

SplitManifest load_seed_manifest(const fs::path& path, const std::string& split) {
  if (!fs::exists(path)) throw DatasetError("seed manifest not found: " + path.string());
  return parse_seed_manifest(read_file(path), split);
}

json to_json(const SplitManifest& m) {
  json seeds = json::array();
  for (const auto& s : m.seeds) {
    json e = {{"id", s.id.str()}, {"year", s.year}, {"venue", s.venue}};
    if (!s.title.empty()) e["title"] = s.title;
    seeds.push_back(std::move(e));
  }
  return {{"split", m.split}, {"created", m.created}, {"config_hash", m.config_hash}, {"seeds", seeds}};
}

std::vector<std::string> validate_splits(const std::vector<SplitManifest>& splits) {
  std::vector<std::string> out;
  std::map<PaperId, std::string> owner;
  for (const auto& m : splits) {
    if (m.split != "train" && m.split != "validation" && m.split != "test") out.push_back("unknown split name " + m.split);
    for (const auto& s : m.seeds) {
      auto [it, inserted] = owner.emplace(s.id, m.split);
      if (!inserted)
        out.push_back("seed " + s.id.str() + (it->second == m.split ? " listed twice in " + m.split
                                                                       : " in both " + it->second + " and " + m.split));
    }
  }
  std::optional<int> max_train;
  for (const auto& m : splits)
    if (m.split == "train")
      for (const auto& s : m.seeds) max_train = std::max(max_train.value_or(s.year), s.year);
  if (max_train)
    for (const auto& m : splits)
      if (m.split == "test")
        for (const auto& s : m.seeds)
          if (s.year <= *max_train)
            out.push_back("test seed " + s.id.str() + " (" + std::to_string(s.year) +
                          ") is not newer than every train seed (latest " + std::to_string(*max_train) + ")");
  return out;
}

namespace {

FetchPolicy universe_policy(const fs::path& root, bool offline, FetchPolicy policy) {
  policy.cache_dir = root;
  policy.offline_only = offline;
  return policy;
}

}  // namespace

Universe::Universe(const fs::path& root, std::shared_ptr<HttpTransport> transport, FetchPolicy policy)
    : root_(root), client_(universe_policy(root, !transport, std::move(policy)), transport) {
  if (!transport && !fs::is_directory(root)) throw DatasetError("paper universe directory not found: " + root.string());
}

std::optional<PaperRecord> Universe::lookup(const PaperId& id) {
  try {
    return client_.fetch_record(id);
  } catch (const FetchError&) {
    return std::nullopt;
  }
}

PaperRecord Universe::seed(const PaperId& id) { return client_.fetch_record(id); }

std::optional<std::string> Universe::tei(const PaperId& id) const {
  auto name = cache_file_name(id);
  name.resize(name.size() - 5);  // drop ".json"
  const auto path = root_ / "tei" / (name + ".tei.xml");
  if (!fs::exists(path)) return std::nullopt;
  return read_file(path);
}

Gateways make_gateways(const PipelineConfig& config) {
  return Gateways{make_gateway(config.llm.extractor, Role::kExtractor),
                  make_gateway(config.llm.generator, Role::kGenerator)};
}

namespace {

std::string extraction_text(const ParsedPaper& paper) {
  auto text = paper.text_of({SectionLabel::kIntroduction, SectionLabel::kMethod});
  if (trim(text).empty()) {
    for (const auto& s : paper.sections) text += s.body + "\n";
  }
  return text;
}

// Idea from the record, else extracted from the paper's TEI, else none.
std::optional<FiveFieldIdea> idea_for(const PaperRecord& record, Universe& universe, Gateway& extractor,
                                      const PipelineConfig& config, std::vector<std::string>& log) {
  if (record.idea && record.idea->is_valid()) return record.idea;
  auto tei = universe.tei(record.id);
  if (!tei) {
    log.push_back("no idea available for " + record.id.str());
    return std::nullopt;
  }
  try {
    auto text = extraction_text(parse_tei(*tei, config.section_keywords));
    if (trim(text).empty()) throw ExtractionFailure("TEI has no section text");
    return extract_idea(extractor, text);
  } catch (const Error& e) {
    log.push_back("idea extraction failed for " + record.id.str() + ": " + e.what());
    return std::nullopt;
  }
}

std::string encoded(const PaperId& id) {
  auto name = cache_file_name(id);
  return name.substr(0, name.size() - 5);
}

}  // namespace

SeedBuild build_seed(const SeedEntry& entry, Universe& universe, Gateway& extractor, const PipelineConfig& config) {
  SeedBuild out;
  auto& log = out.log;
  PaperRecord seed = universe.seed(entry.id);
  if (!seed.year) {
    seed.year = entry.year;
    log.push_back("seed year missing from metadata, using manifest year " + std::to_string(entry.year));
  } else if (*seed.year != entry.year) {
    log.push_back("manifest year " + std::to_string(entry.year) + " differs from metadata year " +
                  std::to_string(*seed.year) + "; using metadata");
  }

  std::map<PaperId, CitationLink> links;
  try {
    for (auto& l : universe.client().fetch_citation_links(seed.id)) links.emplace(l.target, std::move(l));
  } catch (const FetchError& e) {
    log.push_back(std::string("no citation links: ") + e.what());
  }

  std::map<PaperId, std::optional<PaperRecord>> memo;
  RecordLookup lookup = [&](const PaperId& id) -> std::optional<PaperRecord> {
    if (auto it = memo.find(id); it != memo.end()) return it->second;
    auto r = universe.lookup(id);
    if (r)
      if (auto l = links.find(id); l != links.end()) r = with_citation_link(std::move(*r), l->second);
    memo.emplace(id, r);
    return r;
  };

  std::map<PaperId, CitationStats> profile;
  if (auto tei = universe.tei(seed.id)) {
    try {
      const auto paper = parse_tei(*tei, config.section_keywords);
      std::vector<PaperRecord> layer1;
      for (const auto& id : seed.reference_ids)
        if (auto r = lookup(id)) layer1.push_back(std::move(*r));
      const auto match = match_bib_to_records(paper, layer1, config.title_match);
      profile = profile_by_paper(build_citation_profile(paper, match.fuzzy), match);
      log.push_back("bibliography: " + std::to_string(match.matched.size()) + " matched (" +
                    std::to_string(match.fuzzy.size()) + " fuzzy), " + std::to_string(match.unmatched.size()) +
                    " unmatched, " + std::to_string(paper.dropped_anchors) + " dropped anchors");
      if (!seed.idea || !seed.idea->is_valid()) {
        auto text = extraction_text(paper);
        if (!trim(text).empty()) seed.idea = extract_idea(extractor, text);
      }
    } catch (const TeiParseError& e) {
      log.push_back(std::string("seed TEI unusable, all references low-confidence: ") + e.what());
    } catch (const TeiStructureError& e) {
      log.push_back(std::string("seed TEI unusable, all references low-confidence: ") + e.what());
    }
  } else {
    log.push_back("no seed TEI, all references low-confidence");
  }
  if (!seed.idea || !seed.idea->is_valid()) throw DatasetError("seed " + seed.id.str() + " has no idea to train on");

  auto built = build(seed, lookup, profile, config);
  for (auto& line : built.trace.log) log.push_back(std::move(line));
  log.push_back("references " + std::to_string(built.trace.num_seed_refs) + ", expanded " +
                std::to_string(built.trace.expanded) + ", after cone " + std::to_string(built.trace.after_cone) +
                ", selected " + std::to_string(built.trace.selected) + ", budget " + std::to_string(built.trace.budget));

  for (auto& node : built.graph.nodes) node.record.idea = idea_for(node.record, universe, extractor, config, log);
  out.graph = std::move(built.graph);
  for (const auto& [id, r] : memo)
    if (r) out.two_hop.push_back({id, r->title});
  return out;
}

json graph_file_json(const SeedBuild& build, const std::string& config_hash) {
  json j = to_json(build.graph);
  json refs = json::array();
  for (const auto& r : build.two_hop) refs.push_back({{"id", r.id.str()}, {"title", r.title}});
  j["two_hop"] = refs;
  j["config_hash"] = config_hash;
  return j;
}

TrainGraph train_graph_from_json(const json& j) {
  TrainGraph g;
  g.graph = subgraph_from_json(j);
  if (j.contains("two_hop"))
    for (const auto& r : j["two_hop"]) g.two_hop.push_back({PaperId(r.at("id").get<std::string>()), r.value("title", "")});
  return g;
}

namespace {

std::string sft_line(const SftExample& ex) {
  return to_json(ex).dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

struct SeedJob {
  const SeedEntry* entry;
  std::string split;
};

}  // namespace

CorpusReport build_corpus(const std::vector<SplitManifest>& splits, const PipelineConfig& config,
                          const DatasetOptions& options) {
  CorpusReport report;
  report.split_violations = validate_splits(splits);
  if (!report.split_violations.empty())
    throw DatasetError("split manifests are inconsistent: " + report.split_violations.front());

  const auto hash = config_hash(config);
  Universe universe(options.universe, options.transport);
  auto gateways = make_gateways(config);
  const fs::path out = options.out_dir;
  fs::create_directories(out);

  std::vector<SeedJob> jobs;
  for (const auto& m : splits)
    for (const auto& s : m.seeds) jobs.push_back({&s, m.split});
  if (jobs.empty()) throw DatasetError("no seeds to build");

  struct Result {
    SeedStatus status;
    std::optional<SeedBuild> build;
    std::optional<SftExample> graph_ex, plain_ex;
  };
  std::vector<Result> results(jobs.size());
  const SerializeOptions ser{config.max_authors};

  auto run = [&](std::size_t i) {
    const auto& job = jobs[i];
    auto& res = results[i];
    res.status.id = job.entry->id;
    res.status.split = job.split;
    const auto dir = out / "seeds" / encoded(job.entry->id);
    std::vector<std::string> log;
    try {
      auto sb = build_seed(*job.entry, universe, gateways.extractor, config);
      log = sb.log;
      auto gex = make_sft_example(sb.graph, PromptVariant::kGraph, ser);
      auto pex = make_sft_example(sb.graph, PromptVariant::kPlain, ser);
      const auto graph_prompt = std::string(gex.conditioning());
      res.status.prompt_tokens = estimate_tokens(graph_prompt);
      if (res.status.prompt_tokens > static_cast<std::size_t>(config.max_prompt_tokens))
        log.push_back("warning: graph prompt estimate " + std::to_string(res.status.prompt_tokens) +
                      " tokens exceeds max_prompt_tokens " + std::to_string(config.max_prompt_tokens));
      write_file(dir / "graph.json", canonical_dump(graph_file_json(sb, hash)));
      write_file(dir / "prompt.graph.txt", graph_prompt);
      write_file(dir / "prompt.plain.txt", pex.conditioning());
      write_file(dir / "sft.jsonl", sft_line(gex) + sft_line(pex));
      if (options.generate_candidates) {
        std::string lines;
        const auto attempts = generate_candidates(gateways.generator, graph_prompt, config.sampling);
        for (std::size_t k = 0; k < attempts.size(); ++k) {
          json row = {{"seed_id", job.entry->id.str()}, {"k", k},
                      {"idea", attempts[k].idea ? to_json(*attempts[k].idea) : json()},
                      {"error", attempts[k].error}};
          lines += row.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
        }
        write_file(dir / "candidates.jsonl", lines);
      }
      res.status.ok = true;
      res.status.nodes = sb.graph.nodes.size();
      res.build = std::move(sb);
      res.graph_ex = std::move(gex);
      res.plain_ex = std::move(pex);
    } catch (const std::exception& e) {
      res.status.error = e.what();
      log.push_back(std::string("FAILED: ") + e.what());
      spdlog::warn("seed {} failed: {}", job.entry->id.str(), e.what());
    }
    std::string text;
    for (const auto& l : log) text += l + "\n";
    write_file(dir / "seed.log", text);
  };

  const int workers = std::max(1, config.workers);
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < jobs.size();) run(i);
      });
    for (auto& t : pool) t.join();
  }

  for (const auto& r : results) {
    report.seeds.push_back(r.status);
    if (!r.status.ok) ++report.failures;
  }
  report.aborted =
      static_cast<double>(report.failures) > config.failure_budget * static_cast<double>(jobs.size());

  // Leak check between the train and test splits, using what was built.
  std::vector<LeakViolation> leaks;
  const SplitManifest* train = nullptr;
  const SplitManifest* test = nullptr;
  for (const auto& m : splits) {
    if (m.split == "train") train = &m;
    if (m.split == "test") test = &m;
  }
  if (train && test) {
    std::vector<TrainGraph> train_graphs;
    std::map<PaperId, std::string> test_titles;
    for (const auto& r : results) {
      if (!r.build) continue;
      if (r.status.split == "train") train_graphs.push_back({r.build->graph, r.build->two_hop});
      if (r.status.split == "test") test_titles[r.status.id] = r.build->graph.seed.title;
    }
    leaks = leak_check(*train, *test, train_graphs, test_titles);
  }
  report.leak_violations = leaks.size();

  if (!report.aborted) {
    for (const auto& m : splits) {
      std::string graph_lines, plain_lines;
      for (const auto& r : results)
        if (r.status.ok && r.status.split == m.split) {
          graph_lines += sft_line(*r.graph_ex);
          plain_lines += sft_line(*r.plain_ex);
        }
      write_file(out / "sft" / (m.split + ".graph.jsonl"), graph_lines);
      write_file(out / "sft" / (m.split + ".plain.jsonl"), plain_lines);
      SplitManifest copy = m;
      copy.created = options.created;
      copy.config_hash = hash;
      write_file(out / "splits" / (m.split + ".json"), canonical_dump(to_json(copy)));
    }
    std::vector<AnnotatedSubgraph> graphs;
    std::vector<std::size_t> tokens;
    for (const auto& r : results)
      if (r.build) {
        graphs.push_back(r.build->graph);
        tokens.push_back(r.status.prompt_tokens);
      }
    if (!graphs.empty()) {
      json stats = to_json(corpus_stats(graphs, tokens, config.max_prompt_tokens));
      stats["config_hash"] = hash;
      write_file(out / "stats.json", canonical_dump(stats));
    }
    json gen = {
        {"config_hash", hash},
        {"prompt_variant", "graph"},
        {"generated", options.generate_candidates},
        {"sampling",
         {{"num_candidates", config.sampling.num_candidates},
          {"temperature", config.sampling.temperature},
          {"top_p", config.sampling.top_p}}},
        {"generator", {{"backend", config.llm.generator.backend}, {"model", config.llm.generator.model}}},
    };
    write_file(out / "generation_manifest.json", canonical_dump(gen));
  }

  json seeds = json::array();
  for (const auto& s : report.seeds)
    seeds.push_back({{"id", s.id.str()}, {"split", s.split}, {"status", s.ok ? "ok" : "failed"}, {"error", s.error},
                     {"nodes", s.nodes}, {"prompt_tokens", s.prompt_tokens}});
  json leak_json = json::array();
  for (const auto& v : leaks) leak_json.push_back(to_json(v));
  json manifest = {
      {"created", options.created},
      {"config_hash", hash},
      {"inputs", options.input_digests},
      {"seeds", seeds},
      {"failures", report.failures},
      {"failure_budget", config.failure_budget},
      {"aborted", report.aborted},
      {"leak_violations", leak_json},
  };
  write_file(out / "manifest.json", canonical_dump(manifest));
  return report;
}

std::string_view to_string(LeakKind kind) {
  switch (kind) {
    case LeakKind::kIdOverlap: return "id_overlap";
    case LeakKind::kTitleOverlap: return "title_overlap";
    case LeakKind::kTemporal: return "temporal";
  }
  return "id_overlap";
}

json to_json(const LeakViolation& v) {
  return {{"kind", std::string(to_string(v.kind))}, {"test_seed", v.test_seed.str()}, {"location", v.location},
          {"detail", v.detail}};
}

std::vector<LeakViolation> leak_check(const SplitManifest& train, const SplitManifest& test,
                                      const std::vector<TrainGraph>& train_graphs,
                                      const std::map<PaperId, std::string>& test_titles) {
  // Everything one train seed contributes: (id, title, role), strongest role first.
  struct Item {
    PaperId id;
    std::string title;  // normalized
    std::string role;
  };
  std::map<PaperId, std::vector<Item>> by_train;
  for (const auto& s : train.seeds) by_train[s.id].push_back({s.id, normalize_title(s.title), "seed"});
  for (const auto& g : train_graphs) {
    auto& items = by_train[g.graph.seed.id];
    items.push_back({g.graph.seed.id, normalize_title(g.graph.seed.title), "seed"});
    for (const auto& n : g.graph.nodes) items.push_back({n.record.id, normalize_title(n.record.title), "node"});
    for (const auto& r : g.two_hop) items.push_back({r.id, normalize_title(r.title), "two_hop"});
  }

  std::optional<int> latest_train;
  for (const auto& s : train.seeds) latest_train = std::max(latest_train.value_or(s.year), s.year);

  std::vector<LeakViolation> out;
  for (const auto& t : test.seeds) {
    std::string title = t.title;
    if (auto it = test_titles.find(t.id); it != test_titles.end() && !it->second.empty()) title = it->second;
    const auto norm = normalize_title(title);
    for (const auto& [train_id, items] : by_train) {
      const Item* id_hit = nullptr;
      const Item* title_hit = nullptr;
      for (const auto& item : items) {
        if (!id_hit && item.id == t.id) id_hit = &item;
        if (!title_hit && !norm.empty() && item.title == norm) title_hit = &item;
      }
      const auto location = [&](const Item& i) { return "train:" + train_id.str() + " " + i.role; };
      if (id_hit)
        out.push_back({LeakKind::kIdOverlap, t.id, location(*id_hit), "paper id " + t.id.str()});
      else if (title_hit)
        out.push_back({LeakKind::kTitleOverlap, t.id, location(*title_hit),
                       "title of " + title_hit->id.str() + " matches \"" + title + "\""});
    }
    if (latest_train && t.year <= *latest_train)
      out.push_back({LeakKind::kTemporal, t.id, "splits",
                     "test year " + std::to_string(t.year) + " <= latest train year " + std::to_string(*latest_train)});
  }
  return out;
}

Distribution describe(std::vector<double> values) {
  Distribution d;
  d.count = values.size();
  if (values.empty()) return d;
  std::ranges::sort(values);
  const auto n = values.size();
  d.median = n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
  double sum = 0;
  for (double v : values) sum += v;
  d.mean = sum / static_cast<double>(n);
  d.min = values.front();
  d.max = values.back();
  return d;
}

CorpusStats corpus_stats(const std::vector<AnnotatedSubgraph>& graphs, const std::vector<std::size_t>& prompt_tokens,
                         int max_prompt_tokens) {
  if (graphs.empty()) throw DatasetError("corpus statistics need at least one graph");
  CorpusStats s;
  s.graphs = graphs.size();
  std::vector<double> nodes, edges, preds;
  double ex = 0, par = 0, dir = 0;
  for (const auto& g : graphs) {
    const auto c = g.edge_counts();
    nodes.push_back(static_cast<double>(g.nodes.size()));
    edges.push_back(static_cast<double>(c.total()));
    preds.push_back(static_cast<double>(c.predecessor_edges()));
    ex += static_cast<double>(c.explicit_pred);
    par += static_cast<double>(c.parallel_pred);
    dir += static_cast<double>(c.direct_to_seed);
  }
  const double n = static_cast<double>(graphs.size());
  s.nodes = describe(nodes);
  s.edges = describe(edges);
  s.predecessor_edges = describe(preds);
  s.mean_explicit = ex / n;
  s.mean_parallel = par / n;
  s.mean_direct = dir / n;
  std::vector<double> toks;
  for (auto t : prompt_tokens) {
    toks.push_back(static_cast<double>(t));
    if (t > static_cast<std::size_t>(max_prompt_tokens)) ++s.prompts_over_limit;
  }
  s.prompt_tokens = describe(toks);
  return s;
}

namespace {

json dist_json(const Distribution& d) {
  return {{"count", d.count}, {"median", round6(d.median)}, {"mean", round6(d.mean)}, {"min", round6(d.min)},
          {"max", round6(d.max)}};
}

}  // namespace

json to_json(const CorpusStats& s) {
  return {
      {"graphs", s.graphs},
      {"nodes", dist_json(s.nodes)},
      {"edges", dist_json(s.edges)},
      {"predecessor_edges", dist_json(s.predecessor_edges)},
      {"edge_class_means",
       {{"explicit", round6(s.mean_explicit)}, {"parallel", round6(s.mean_parallel)}, {"direct_to_seed", round6(s.mean_direct)}}},
      {"prompt_tokens", dist_json(s.prompt_tokens)},
      {"prompts_over_limit", s.prompts_over_limit},
  };
}

LoadedCorpus load_corpus(const fs::path& dir) {
  const auto seeds = dir / "seeds";
  if (!fs::is_directory(seeds)) throw DatasetError("not a corpus directory (no seeds/): " + dir.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(seeds))
    if (e.is_directory() && fs::exists(e.path() / "graph.json")) dirs.push_back(e.path());
  std::ranges::sort(dirs);
  LoadedCorpus out;
  for (const auto& d : dirs) {
    try {
      out.graphs.push_back(train_graph_from_json(json::parse(read_file(d / "graph.json"))));
    } catch (const json::exception& e) {
      throw DatasetError("corrupt " + (d / "graph.json").string() + ": " + e.what());
    }
    out.prompt_tokens.push_back(fs::exists(d / "prompt.graph.txt") ? estimate_tokens(read_file(d / "prompt.graph.txt")) : 0);
  }
  return out;
}

}  // namespace citedag
