#pragma once
// JSON mapping for the domain types. Objects are emitted with sorted keys
// and scores rounded to 6 decimals, so equal values always produce equal
// bytes.

#include <nlohmann/json.hpp>
#include <string>

#include "citedag/core_model.hpp"

namespace citedag {

using json = nlohmann::json;

json to_json(const PaperId& id);
json to_json(const FiveFieldIdea& idea);
json to_json(const PaperRecord& record);
json to_json(const EdgeFeatures& features);
json to_json(const SubgraphNode& node);
json to_json(const AnnotatedSubgraph& graph);
json to_json(const SftExample& example);

// Throws Error on missing keys or wrong value types.
PaperRecord record_from_json(const json& j);
FiveFieldIdea idea_from_json(const json& j);
AnnotatedSubgraph subgraph_from_json(const json& j);
SftExample sft_example_from_json(const json& j);

// 2-space indented, sorted keys, trailing newline.
std::string canonical_dump(const json& j);

}  // namespace citedag
