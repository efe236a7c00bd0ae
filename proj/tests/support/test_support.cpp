#include "support/test_support.hpp"

#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "citedag/cli.hpp"
#include "citedag/dataset_builder.hpp"
#include "citedag/util.hpp"

namespace fs = std::filesystem;

namespace citedag::testing {

fs::path fixture(const std::string& rel) { return fs::path(CITEDAG_FIXTURES_DIR) / rel; }
fs::path golden(const std::string& rel) { return fs::path(CITEDAG_GOLDEN_DIR) / rel; }

bool update_golden() {
  const char* v = std::getenv("CITEDAG_UPDATE_GOLDEN");
  return v && std::string(v) == "1";
}

std::string check_golden(const std::string& rel, const std::string& actual) {
  auto path = golden(rel);
  if (update_golden()) {
    fs::create_directories(path.parent_path());
    write_file(path, actual);
    return "";
  }
  if (!fs::exists(path)) return "golden file missing: " + path.string();
  auto expected = read_file(path);
  if (expected == actual) return "";
  std::size_t i = 0;
  while (i < expected.size() && i < actual.size() && expected[i] == actual[i]) ++i;
  return rel + " differs at byte " + std::to_string(i);
}

TempDir::TempDir() {
  static std::mt19937_64 rng(std::random_device{}());
  for (;;) {
    auto candidate = fs::temp_directory_path() / ("citedag-test-" + std::to_string(rng()));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) out[fs::relative(entry.path(), dir).generic_string()] = read_file(entry.path());
  }
  return out;
}

std::string mask_timestamps(const std::string& text) {
  static const std::regex created(R"("created": "[^"]*")");
  return std::regex_replace(text, created, R"("created": "<timestamp>")");
}

std::vector<std::string> diff_trees(const fs::path& a, const fs::path& b) {
  auto ta = read_tree(a);
  auto tb = read_tree(b);
  std::vector<std::string> diffs;
  for (const auto& [rel, content] : ta) {
    auto it = tb.find(rel);
    if (it == tb.end()) {
      diffs.push_back("only in " + a.string() + ": " + rel);
    } else if (mask_timestamps(content) != mask_timestamps(it->second)) {
      diffs.push_back("differs: " + rel);
    }
  }
  for (const auto& [rel, content] : tb) {
    if (!ta.count(rel)) diffs.push_back("only in " + b.string() + ": " + rel);
  }
  return diffs;
}

int run_fixture_dataset(const fs::path& out_dir, const std::vector<std::string>& extra, std::string* output) {
  std::vector<std::string> args = {"dataset",
                                   "--train", fixture("corpus/train.tsv").string(),
                                   "--test", fixture("corpus/test.tsv").string(),
                                   "--universe", fixture("universe").string(),
                                   "--offline",
                                   "--generate",
                                   "--out", out_dir.string(),
                                   "--run-manifest", (out_dir.parent_path() / "run_manifest.json").string()};
  args.insert(args.end(), extra.begin(), extra.end());
  std::ostringstream out, err;
  int status = run_cli(args, out, err);
  if (output) *output = out.str() + err.str();
  return status;
}

PinnedClock::PinnedClock() {
  if (const char* v = std::getenv("SOURCE_DATE_EPOCH")) {
    previous_ = v;
    had_previous_ = true;
  }
  setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
}

PinnedClock::~PinnedClock() {
  if (had_previous_) {
    setenv("SOURCE_DATE_EPOCH", previous_.c_str(), 1);
  } else {
    unsetenv("SOURCE_DATE_EPOCH");
  }
}

PaperRecord make_record(const std::string& id, std::optional<int> year, std::vector<std::string> refs) {
  PaperRecord r;
  r.id = PaperId(id);
  r.title = "Paper " + id;
  r.year = year;
  r.venue = "Venue";
  r.authors = {"Ada Author"};
  for (auto& ref : refs) r.reference_ids.emplace_back(ref);
  return r;
}

FiveFieldIdea make_idea(const std::string& stem) {
  return {stem + " problem", stem + " existing methods", stem + " motivation", stem + " proposed method",
          stem + " experiment plan"};
}

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

}  // namespace

std::vector<std::string> structural_delta_violations(const std::string& graph_prompt, const std::string& plain_prompt) {
  std::vector<std::string> stripped;
  bool in_block = false;
  for (const auto& line : split_lines(graph_prompt)) {
    if (line == "   [EDGE]" || line == "   [PREDECESSORS]") {
      in_block = true;
      continue;
    }
    if (in_block && line.rfind("     ", 0) == 0) continue;
    in_block = false;
    if (line.rfind("# CITATION SUBGRAPH (", 0) == 0) {
      stripped.push_back("# REFERENCES (" + line.substr(std::string("# CITATION SUBGRAPH (").size()));
    } else {
      stripped.push_back(line);
    }
  }
  const auto plain = split_lines(plain_prompt);
  std::vector<std::string> out;
  const auto n = std::max(stripped.size(), plain.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string a = i < stripped.size() ? stripped[i] : "<missing>";
    const std::string b = i < plain.size() ? plain[i] : "<missing>";
    if (a != b) out.push_back("line " + std::to_string(i + 1) + ": '" + a + "' vs '" + b + "'");
  }
  return out;
}

std::vector<AnnotatedSubgraph> fixture_corpus_graphs() {
  PipelineConfig config;
  Universe universe(fixture("universe"));
  auto gateways = make_gateways(config);
  auto& extractor = gateways.extractor;
  std::vector<AnnotatedSubgraph> graphs;
  for (const auto* split : {"train", "test"}) {
    auto manifest = load_seed_manifest(fixture(std::string("corpus/") + split + ".tsv"), split);
    for (const auto& entry : manifest.seeds) graphs.push_back(build_seed(entry, universe, extractor, config).graph);
  }
  return graphs;
}

}  // namespace citedag::testing
