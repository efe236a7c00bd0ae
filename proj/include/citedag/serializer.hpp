#pragma once
// Structured-text prompt rendering for annotated subgraphs, the plain
// "references only" variant, the strict-JSON target and masked SFT examples.
//
// Layout of one node block in the graph variant:
//
//   ## [i] Title (year, venue) authors: A, B, C
//      [EDGE]
//        layer_depth = 1
//        ...                        eight features, fixed order
//      [PREDECESSORS]
//        - ref_idx=[2, 3]  delta_yr=1  edge_type=explicit_pred
//      [IDEA -- 5 fields]
//        Problem: ...               or the single line "unavailable"
//      [ABSTRACT] text
//
// The plain variant omits [EDGE] and [PREDECESSORS] and titles the node
// list "# REFERENCES". Titles, venues, abstracts and idea fields are
// whitespace-collapsed onto one line. Floats use two decimals.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "citedag/core_model.hpp"

namespace citedag {

class SerializeError : public Error {
 public:
  using Error::Error;
};

struct SerializeOptions {
  int max_authors = 6;
};

std::string serialize(const AnnotatedSubgraph& g, PromptVariant variant, const SerializeOptions& options = {});
std::string serialize_graph(const AnnotatedSubgraph& g, const SerializeOptions& options = {});
std::string serialize_plain(const AnnotatedSubgraph& g, const SerializeOptions& options = {});

// Ordered JSON object, 2-space indent, no trailing newline.
std::string render_target(const FiveFieldIdea& idea);
// Inverse of render_target. Accepts any JSON object carrying the five keys;
// throws SerializeError otherwise.
FiveFieldIdea parse_idea(std::string_view json_text);

// Throws SerializeError when the seed has no idea.
SftExample make_sft_example(const AnnotatedSubgraph& g, PromptVariant variant, const SerializeOptions& options = {});

// Word-piece estimate: each maximal run of letters/digits (bytes >= 0x80
// count as letters) costs ceil(len / 6) tokens, each other non-space byte
// costs one token, whitespace is free.
std::size_t estimate_tokens(std::string_view text);

// Reference parser for rendered prompts.
struct ParsedPredecessorGroup {
  std::vector<int> ref_idx;
  int delta_yr = 0;
  EdgeType type = EdgeType::kExplicitPred;
  friend bool operator==(const ParsedPredecessorGroup&, const ParsedPredecessorGroup&) = default;
};

struct ParsedNode {
  int index = 0;
  std::string title;
  std::string year;
  std::string venue;
  std::string authors;
  std::optional<EdgeFeatures> features;             // graph variant only
  std::vector<ParsedPredecessorGroup> predecessors;  // graph variant only
  bool direct_to_seed = false;
  std::optional<FiveFieldIdea> idea;
  std::string abstract_text;
};

struct ParsedPrompt {
  PromptVariant variant = PromptVariant::kGraph;
  std::string seed_venue;
  std::string seed_year;
  int declared_count = 0;
  std::vector<ParsedNode> nodes;
};

ParsedPrompt parse_prompt(std::string_view text);

}  // namespace citedag
