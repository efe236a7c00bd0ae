#include "citedag/json_io.hpp"

#include "citedag/util.hpp"

namespace citedag {

namespace {

template <typename T>
T get_required(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw Error(std::string("missing JSON key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(std::string("bad JSON value for '") + key + "': " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(std::string("bad JSON value for '") + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const PaperId& id) { return id.str(); }

json to_json(const FiveFieldIdea& idea) {
  json j = json::object();
  const auto& names = FiveFieldIdea::field_names();
  const auto values = idea.fields();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = std::string(values[i]);
  return j;
}

FiveFieldIdea idea_from_json(const json& j) {
  if (!j.is_object()) throw Error("idea must be a JSON object");
  FiveFieldIdea idea{
      get_required<std::string>(j, "Problem"),
      get_required<std::string>(j, "Existing Methods"),
      get_required<std::string>(j, "Motivation"),
      get_required<std::string>(j, "Proposed Method"),
      get_required<std::string>(j, "Experiment Plan"),
  };
  return idea;
}

json to_json(const PaperRecord& r) {
  json refs = json::array();
  for (const auto& id : r.reference_ids) refs.push_back(id.str());
  return json{
      {"id", r.id.str()},
      {"title", r.title},
      {"year", r.year ? json(*r.year) : json(nullptr)},
      {"venue", r.venue},
      {"authors", r.authors},
      {"abstract", r.abstract_text},
      {"citation_count", r.global_cite_count},
      {"is_influential", r.is_influential},
      {"contexts", r.contexts},
      {"reference_ids", refs},
      {"idea", r.idea ? to_json(*r.idea) : json(nullptr)},
  };
}

PaperRecord record_from_json(const json& j) {
  PaperRecord r;
  r.id = PaperId(get_required<std::string>(j, "id"));
  r.title = get_or<std::string>(j, "title", "");
  if (j.contains("year") && !j.at("year").is_null()) r.year = get_required<int>(j, "year");
  r.venue = get_or<std::string>(j, "venue", "");
  r.authors = get_or<std::vector<std::string>>(j, "authors", {});
  r.abstract_text = get_or<std::string>(j, "abstract", "");
  r.global_cite_count = get_or<std::uint64_t>(j, "citation_count", 0);
  r.is_influential = get_or<bool>(j, "is_influential", false);
  r.contexts = get_or<std::vector<std::string>>(j, "contexts", {});
  for (const auto& ref : get_or<std::vector<std::string>>(j, "reference_ids", {}))
    r.reference_ids.emplace_back(ref);
  if (j.contains("idea") && !j.at("idea").is_null()) r.idea = idea_from_json(j.at("idea"));
  return r;
}

json to_json(const EdgeFeatures& f) {
  json sections = json::array();
  for (auto label : f.cited_in_sections) sections.push_back(std::string(to_string(label)));
  return json{
      {"layer_depth", f.layer_depth},
      {"cited_in_sections", sections},
      {"cite_count", f.cite_count},
      {"section_weight", round6(f.section_weight)},
      {"delta_year", f.delta_year},
      {"is_influential_raw", f.is_influential_raw},
      {"low_confidence", f.low_confidence},
      {"cited_by_subgraph", f.cited_by_subgraph},
  };
}

namespace {

EdgeFeatures features_from_json(const json& j) {
  EdgeFeatures f;
  f.layer_depth = get_required<int>(j, "layer_depth");
  for (const auto& s : get_required<std::vector<std::string>>(j, "cited_in_sections")) {
    auto label = section_label_from_string(s);
    if (!label) throw Error("unknown section label '" + s + "'");
    f.cited_in_sections.insert(*label);
  }
  f.cite_count = get_required<std::uint64_t>(j, "cite_count");
  f.section_weight = get_required<double>(j, "section_weight");
  f.delta_year = get_required<int>(j, "delta_year");
  f.is_influential_raw = get_required<bool>(j, "is_influential_raw");
  f.low_confidence = get_required<bool>(j, "low_confidence");
  f.cited_by_subgraph = get_required<std::uint64_t>(j, "cited_by_subgraph");
  return f;
}

}  // namespace

json to_json(const SubgraphNode& node) {
  json preds = json::array();
  for (const auto& p : node.predecessors)
    preds.push_back({{"id", p.id.str()}, {"type", std::string(to_string(p.type))}, {"delta_yr", p.delta_yr}});
  return json{
      {"record", to_json(node.record)},
      {"features", to_json(node.seed_features)},
      {"predecessors", preds},
      {"direct_to_seed", node.direct_to_seed()},
      {"components",
       {{"cite", round6(node.components.cite)},
        {"sec", round6(node.components.sec)},
        {"infl", round6(node.components.infl)},
        {"sib", round6(node.components.sib)}}},
      {"pass1_score", round6(node.pass1_score)},
      {"pass2_score", round6(node.pass2_score)},
  };
}

json to_json(const AnnotatedSubgraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes) nodes.push_back(to_json(n));
  const auto counts = g.edge_counts();
  return json{
      {"seed", to_json(g.seed)},
      {"k_budget", g.k_budget},
      {"nodes", nodes},
      {"edge_counts",
       {{"explicit_pred", counts.explicit_pred},
        {"parallel_pred", counts.parallel_pred},
        {"direct_to_seed", counts.direct_to_seed},
        {"total", counts.total()}}},
  };
}

AnnotatedSubgraph subgraph_from_json(const json& j) {
  AnnotatedSubgraph g;
  g.seed = record_from_json(get_required<json>(j, "seed"));
  g.k_budget = get_required<int>(j, "k_budget");
  for (const auto& jn : get_required<json>(j, "nodes")) {
    SubgraphNode node;
    node.record = record_from_json(get_required<json>(jn, "record"));
    node.seed_features = features_from_json(get_required<json>(jn, "features"));
    for (const auto& jp : get_required<json>(jn, "predecessors")) {
      auto type = edge_type_from_string(get_required<std::string>(jp, "type"));
      if (!type) throw Error("unknown edge type in predecessor list");
      node.predecessors.push_back(
          {PaperId(get_required<std::string>(jp, "id")), *type, get_required<int>(jp, "delta_yr")});
    }
    const auto comps = get_or<json>(jn, "components", json::object());
    node.components = {get_or<double>(comps, "cite", 0.0), get_or<double>(comps, "sec", 0.0),
                       get_or<double>(comps, "infl", 0.0), get_or<double>(comps, "sib", 0.0)};
    node.pass1_score = get_or<double>(jn, "pass1_score", 0.0);
    node.pass2_score = get_or<double>(jn, "pass2_score", 0.0);
    g.nodes.push_back(std::move(node));
  }
  return g;
}

json to_json(const SftExample& e) {
  return json{
      {"seed_id", e.seed_id.str()},
      {"variant", std::string(to_string(e.variant))},
      {"prompt", e.prompt},
      {"target", e.target},
      {"mask_boundary", e.mask_boundary},
  };
}

SftExample sft_example_from_json(const json& j) {
  SftExample e;
  e.seed_id = PaperId(get_required<std::string>(j, "seed_id"));
  auto variant = prompt_variant_from_string(get_required<std::string>(j, "variant"));
  if (!variant) throw Error("unknown prompt variant");
  e.variant = *variant;
  e.prompt = get_required<std::string>(j, "prompt");
  e.target = get_required<std::string>(j, "target");
  e.mask_boundary = get_required<std::size_t>(j, "mask_boundary");
  return e;
}

std::string canonical_dump(const json& j) {
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

}  // namespace citedag
