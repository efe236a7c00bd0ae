#include "citedag/serializer.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

namespace citedag {

namespace {

constexpr std::string_view kGraphHeader = "# CITATION SUBGRAPH";
constexpr std::string_view kPlainHeader = "# REFERENCES";

constexpr std::string_view kTaskBlock =
    "# TASK\n"
    "Given the SEED META and CITATION SUBGRAPH above, predict the SEED paper's\n"
    "five-field idea.\n"
    "\n"
    "# OUTPUT FORMAT (strict)\n"
    "{\n"
    "  \"Problem\": \"...\",\n"
    "  \"Existing Methods\": \"...\",\n"
    "  \"Motivation\": \"...\",\n"
    "  \"Proposed Method\": \"...\",\n"
    "  \"Experiment Plan\": \"...\"\n"
    "}\n";

std::string year_text(const std::optional<int>& year) { return year ? std::to_string(*year) : "n/a"; }

std::string or_na(std::string_view text) {
  auto s = collapse_whitespace(text);
  return s.empty() ? "n/a" : s;
}

std::string authors_text(const std::vector<std::string>& authors, int max_authors) {
  std::vector<std::string> names;
  for (const auto& a : authors)
    if (auto n = collapse_whitespace(a); !n.empty()) names.push_back(std::move(n));
  if (names.empty()) return "unknown";
  std::string out;
  const auto shown = std::min<std::size_t>(names.size(), static_cast<std::size_t>(std::max(1, max_authors)));
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) out += ", ";
    out += names[i];
  }
  if (shown < names.size()) out += ", et al.";
  return out;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string section_list(const std::set<SectionLabel>& sections) {
  std::string out = "[";
  bool first = true;
  for (auto label : sections) {  // enum order
    if (!first) out += ", ";
    out += to_string(label);
    first = false;
  }
  return out + "]";
}

std::string int_list(const std::vector<int>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(values[i]);
  }
  return out + "]";
}

void render_edge(std::ostringstream& out, const EdgeFeatures& f) {
  out << "   [EDGE]\n"
      << "     layer_depth = " << f.layer_depth << "\n"
      << "     cited_in_sections = " << section_list(f.cited_in_sections) << "\n"
      << "     cite_count = " << f.cite_count << "\n"
      << "     section_weight = " << fixed2(f.section_weight) << "\n"
      << "     delta_year = " << f.delta_year << "\n"
      << "     is_influential_raw = " << (f.is_influential_raw ? "true" : "false") << "\n"
      << "     low_confidence = " << (f.low_confidence ? "true" : "false") << "\n"
      << "     cited_by_subgraph = " << f.cited_by_subgraph << "\n";
}

void render_predecessors(std::ostringstream& out, const SubgraphNode& node, const AnnotatedSubgraph& g) {
  out << "   [PREDECESSORS]\n";
  if (node.predecessors.empty()) {
    out << "     - edge_type=direct_to_seed\n";
    return;
  }
  // One line per (delta, type), ascending delta.
  std::map<std::pair<int, std::string_view>, std::vector<int>> groups;
  for (const auto& p : node.predecessors) {
    auto idx = g.index_of(p.id);
    if (!idx) throw SerializeError("predecessor " + p.id.str() + " is not a node of the subgraph");
    groups[{p.delta_yr, to_string(p.type)}].push_back(static_cast<int>(*idx) + 1);
  }
  for (auto& [key, idx] : groups) {
    std::ranges::sort(idx);
    out << "     - ref_idx=" << int_list(idx) << "  delta_yr=" << key.first << "  edge_type=" << key.second << "\n";
  }
}

void render_idea(std::ostringstream& out, const std::optional<FiveFieldIdea>& idea) {
  out << "   [IDEA -- 5 fields]\n";
  if (!idea) {
    out << "     unavailable\n";
    return;
  }
  const auto& names = FiveFieldIdea::field_names();
  const auto values = idea->fields();
  for (std::size_t i = 0; i < names.size(); ++i) out << "     " << names[i] << ": " << collapse_whitespace(values[i]) << "\n";
}

}  // namespace

std::string serialize(const AnnotatedSubgraph& g, PromptVariant variant, const SerializeOptions& options) {
  const bool graph = variant == PromptVariant::kGraph;
  std::ostringstream out;
  out << "# SEED META\n"
      << "venue: " << or_na(g.seed.venue) << "    year: " << year_text(g.seed.year) << "\n"
      << "\n"
      << (graph ? kGraphHeader : kPlainHeader) << " (" << g.nodes.size() << " refs, temporally ordered by year)\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& node = g.nodes[i];
    const auto& r = node.record;
    out << "## [" << i + 1 << "] " << or_na(r.title) << " (" << year_text(r.year) << ", " << or_na(r.venue)
        << ") authors: " << authors_text(r.authors, options.max_authors) << "\n";
    if (graph) {
      render_edge(out, node.seed_features);
      render_predecessors(out, node, g);
    }
    render_idea(out, r.idea);
    const auto abstract = collapse_whitespace(r.abstract_text);
    out << "   [ABSTRACT]" << (abstract.empty() ? "" : " ") << abstract << "\n";
  }
  out << "\n" << kTaskBlock;
  return out.str();
}

std::string serialize_graph(const AnnotatedSubgraph& g, const SerializeOptions& options) {
  return serialize(g, PromptVariant::kGraph, options);
}

std::string serialize_plain(const AnnotatedSubgraph& g, const SerializeOptions& options) {
  return serialize(g, PromptVariant::kPlain, options);
}

std::string render_target(const FiveFieldIdea& idea) {
  nlohmann::ordered_json j;
  const auto& names = FiveFieldIdea::field_names();
  const auto values = idea.fields();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = std::string(values[i]);
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

FiveFieldIdea parse_idea(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw SerializeError(std::string("idea is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SerializeError("idea JSON is not an object");
  std::vector<std::string> values;
  for (const auto& name : FiveFieldIdea::field_names()) {
    if (!j.contains(name) || !j[name].is_string()) throw SerializeError("idea JSON lacks string field \"" + name + "\"");
    values.push_back(j[name].get<std::string>());
  }
  return {values[0], values[1], values[2], values[3], values[4]};
}

SftExample make_sft_example(const AnnotatedSubgraph& g, PromptVariant variant, const SerializeOptions& options) {
  if (!g.seed.idea || !g.seed.idea->is_valid())
    throw SerializeError("seed " + g.seed.id.str() + " has no usable idea to train on");
  SftExample ex;
  ex.seed_id = g.seed.id;
  ex.variant = variant;
  ex.target = render_target(*g.seed.idea);
  ex.prompt = serialize(g, variant, options);
  ex.mask_boundary = ex.prompt.size();
  ex.prompt += ex.target;
  return ex;
}

std::size_t estimate_tokens(std::string_view text) {
  auto is_word = [](unsigned char c) { return c >= 0x80 || std::isalnum(c); };
  std::size_t tokens = 0;
  std::size_t run = 0;
  auto flush = [&] {
    if (run) tokens += (run + 5) / 6;
    run = 0;
  };
  for (unsigned char c : text) {
    if (is_word(c)) {
      ++run;
      continue;
    }
    flush();
    if (!std::isspace(c)) ++tokens;
  }
  flush();
  return tokens;
}

namespace {

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

int to_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw SerializeError("bad integer for " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

bool to_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw SerializeError("bad boolean: '" + std::string(s) + "'");
}

std::vector<std::string_view> split_list(std::string_view s) {
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') throw SerializeError("bad list: '" + std::string(s) + "'");
  s = s.substr(1, s.size() - 2);
  std::vector<std::string_view> items;
  while (!s.empty()) {
    auto comma = s.find(", ");
    items.push_back(s.substr(0, comma));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 2);
  }
  return items;
}

void parse_node_header(std::string_view line, ParsedNode& node) {
  // ## [i] Title (year, venue) authors: ...
  auto close = line.find("] ");
  node.index = to_int(line.substr(4, close - 4), "node index");
  auto rest = line.substr(close + 2);
  auto auth = rest.rfind(") authors: ");
  if (auth == std::string_view::npos) throw SerializeError("node header lacks authors: " + std::string(line));
  node.authors = std::string(rest.substr(auth + 11));
  auto head = rest.substr(0, auth);
  // The last " (" followed by a year token and ", " opens the (year, venue) part.
  for (auto pos = head.rfind(" ("); pos != std::string_view::npos; pos = pos ? head.rfind(" (", pos - 1) : std::string_view::npos) {
    auto inner = head.substr(pos + 2);
    auto comma = inner.find(", ");
    if (comma == std::string_view::npos) continue;
    auto year = inner.substr(0, comma);
    bool year_like = year == "n/a" || (!year.empty() && std::ranges::all_of(year, [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }));
    if (!year_like) continue;
    node.title = std::string(head.substr(0, pos));
    node.year = std::string(year);
    node.venue = std::string(inner.substr(comma + 2));
    return;
  }
  throw SerializeError("node header lacks (year, venue): " + std::string(line));
}

void parse_feature(std::string_view line, EdgeFeatures& f) {
  auto eq = line.find(" = ");
  if (eq == std::string_view::npos) throw SerializeError("bad [EDGE] line: " + std::string(line));
  auto key = line.substr(0, eq);
  auto value = line.substr(eq + 3);
  if (key == "layer_depth") f.layer_depth = to_int(value, key);
  else if (key == "cited_in_sections") {
    for (auto item : split_list(value)) {
      auto label = section_label_from_string(item);
      if (!label) throw SerializeError("unknown section label: " + std::string(item));
      f.cited_in_sections.insert(*label);
    }
  } else if (key == "cite_count") f.cite_count = static_cast<std::uint64_t>(to_int(value, key));
  else if (key == "section_weight") f.section_weight = std::stod(std::string(value));
  else if (key == "delta_year") f.delta_year = to_int(value, key);
  else if (key == "is_influential_raw") f.is_influential_raw = to_bool(value);
  else if (key == "low_confidence") f.low_confidence = to_bool(value);
  else if (key == "cited_by_subgraph") f.cited_by_subgraph = static_cast<std::uint64_t>(to_int(value, key));
  else throw SerializeError("unknown [EDGE] key: " + std::string(key));
}

void parse_predecessor(std::string_view line, ParsedNode& node) {
  if (line == "- edge_type=direct_to_seed") {
    node.direct_to_seed = true;
    return;
  }
  // - ref_idx=[..]  delta_yr=N  edge_type=T
  if (!starts_with(line, "- ref_idx=")) throw SerializeError("bad [PREDECESSORS] line: " + std::string(line));
  line.remove_prefix(10);
  auto d = line.find("  delta_yr=");
  auto t = line.find("  edge_type=");
  if (d == std::string_view::npos || t == std::string_view::npos || t < d)
    throw SerializeError("bad [PREDECESSORS] line: " + std::string(line));
  ParsedPredecessorGroup group;
  for (auto item : split_list(line.substr(0, d))) group.ref_idx.push_back(to_int(item, "ref_idx"));
  group.delta_yr = to_int(line.substr(d + 11, t - d - 11), "delta_yr");
  auto type = edge_type_from_string(line.substr(t + 12));
  if (!type || *type == EdgeType::kDirectToSeed) throw SerializeError("bad edge_type: " + std::string(line.substr(t + 12)));
  group.type = *type;
  node.predecessors.push_back(std::move(group));
}

}  // namespace

ParsedPrompt parse_prompt(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    auto nl = text.find('\n');
    lines.push_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }

  ParsedPrompt out;
  std::size_t i = 0;
  auto expect = [&](bool ok, std::string_view what) {
    if (!ok) throw SerializeError("prompt line " + std::to_string(i + 1) + ": expected " + std::string(what));
  };
  expect(i < lines.size() && lines[i] == "# SEED META", "# SEED META");
  ++i;
  expect(i < lines.size() && starts_with(lines[i], "venue: "), "seed venue/year line");
  {
    auto l = lines[i];
    auto y = l.rfind("    year: ");
    expect(y != std::string_view::npos, "seed year");
    out.seed_venue = std::string(l.substr(7, y - 7));
    out.seed_year = std::string(l.substr(y + 10));
  }
  i += 2;
  expect(i < lines.size(), "subgraph header");
  std::string_view header = lines[i];
  if (starts_with(header, kGraphHeader)) {
    out.variant = PromptVariant::kGraph;
    header.remove_prefix(kGraphHeader.size());
  } else if (starts_with(header, kPlainHeader)) {
    out.variant = PromptVariant::kPlain;
    header.remove_prefix(kPlainHeader.size());
  } else {
    expect(false, "subgraph header");
  }
  expect(starts_with(header, " (") && header.find(" refs") != std::string_view::npos, "node count");
  out.declared_count = to_int(header.substr(2, header.find(" refs") - 2), "node count");
  ++i;

  enum class Block { kNone, kEdge, kPreds, kIdea };
  Block block = Block::kNone;
  std::vector<std::string> idea_values;
  bool idea_unavailable = false;
  auto finish_idea = [&] {
    if (out.nodes.empty()) return;
    auto& node = out.nodes.back();
    if (idea_values.size() == 5) node.idea = FiveFieldIdea{idea_values[0], idea_values[1], idea_values[2], idea_values[3], idea_values[4]};
    else if (!idea_unavailable) throw SerializeError("node " + std::to_string(node.index) + " has an incomplete idea block");
    idea_values.clear();
    idea_unavailable = false;
  };

  for (; i < lines.size(); ++i) {
    auto line = lines[i];
    if (line.empty()) break;
    if (starts_with(line, "## [")) {
      out.nodes.emplace_back();
      parse_node_header(line, out.nodes.back());
      block = Block::kNone;
      continue;
    }
    expect(!out.nodes.empty(), "node header");
    auto& node = out.nodes.back();
    if (line == "   [EDGE]") {
      node.features.emplace();
      block = Block::kEdge;
    } else if (line == "   [PREDECESSORS]") {
      block = Block::kPreds;
    } else if (line == "   [IDEA -- 5 fields]") {
      block = Block::kIdea;
    } else if (starts_with(line, "   [ABSTRACT]")) {
      finish_idea();
      auto rest = line.substr(13);
      node.abstract_text = std::string(rest.empty() ? rest : rest.substr(1));
      block = Block::kNone;
    } else if (starts_with(line, "     ")) {
      auto body = line.substr(5);
      switch (block) {
        case Block::kEdge: parse_feature(body, *node.features); break;
        case Block::kPreds: parse_predecessor(body, node); break;
        case Block::kIdea: {
          if (body == "unavailable") {
            idea_unavailable = true;
            break;
          }
          const auto& names = FiveFieldIdea::field_names();
          expect(idea_values.size() < names.size(), "at most five idea fields");
          const auto& name = names[idea_values.size()];
          expect(starts_with(body, name + ":"), name);
          auto value = body.substr(name.size() + 1);
          idea_values.emplace_back(value.empty() ? value : value.substr(1));
          break;
        }
        case Block::kNone: expect(false, "a block marker"); break;
      }
    } else {
      expect(false, "a node line");
    }
  }
  expect(i + 1 < lines.size() && lines[i + 1] == "# TASK", "# TASK");
  return out;
}

}  // namespace citedag
