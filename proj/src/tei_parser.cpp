#include "citedag/tei_parser.hpp"

#include <expat.h>

#include <cctype>
#include <climits>
#include <memory>

#include "citedag/util.hpp"

namespace citedag {

namespace {

// Expat is created in namespace mode with '|' as separator, so element
// names arrive as "uri|local".
std::string_view local_name(const XML_Char* name) {
  std::string_view full(name);
  auto bar = full.rfind('|');
  return bar == std::string_view::npos ? full : full.substr(bar + 1);
}

const XML_Char* find_attr(const XML_Char** attrs, std::string_view wanted) {
  for (int i = 0; attrs[i] != nullptr; i += 2)
    if (local_name(attrs[i]) == wanted) return attrs[i + 1];
  return nullptr;
}

std::optional<int> first_year(std::string_view text) {
  for (std::size_t i = 0; i + 4 <= text.size(); ++i) {
    bool digits = true;
    for (std::size_t k = 0; k < 4; ++k) digits = digits && std::isdigit(static_cast<unsigned char>(text[i + k]));
    if (digits && (i + 4 == text.size() || !std::isdigit(static_cast<unsigned char>(text[i + 4])))) {
      return std::stoi(std::string(text.substr(i, 4)));
    }
    if (digits) i += 3;
  }
  return std::nullopt;
}

struct PendingAnchor {
  std::string target;  // without leading '#', may be empty
  std::size_t section;
  std::size_t offset;
};

class TeiBuilder {
 public:
  explicit TeiBuilder(const std::vector<SectionKeywords>& keywords) : keywords_(keywords) {}

  void start(const XML_Char* raw_name, const XML_Char** attrs) {
    const auto name = local_name(raw_name);
    if (depth_ == 0) saw_tei_root_ = (name == "TEI" || name == "teiCorpus");
    ++depth_;
    frames_.push_back(Frame{std::string(name)});
    Frame& frame = frames_.back();

    if (name == "text") ++in_text_;
    if (name == "body" && in_text_) saw_body_ = true;
    if (name == "teiHeader") ++in_header_;

    if (name == "biblStruct" && in_text_) {
      ++in_bibl_;
      BibEntry entry;
      if (const auto* id = find_attr(attrs, "id")) entry.key = id;
      bibl_ = std::move(entry);
      return;
    }
    if (in_bibl_) {
      start_bibl_child(name, attrs);
      return;
    }
    if (in_header_ && name == "title" && paper_title_.empty()) {
      const auto* type = find_attr(attrs, "type");
      if (!type || std::string_view(type) == "main") capture_ = &paper_title_buffer_;
      return;
    }
    if (!in_text_) return;

    if (name == "div") {
      const auto* type = find_attr(attrs, "type");
      frame.is_div = true;
      frame.is_references = type && std::string_view(type) == "references";
      frame.is_annex = type && (std::string_view(type) == "annex" || std::string_view(type) == "appendix");
      if (frame.is_references) ++in_references_;
      if (frame.is_annex) ++in_annex_;
      return;
    }
    if (in_references_) return;
    if (name == "head" && frames_.size() >= 2 && frames_[frames_.size() - 2].is_div) {
      head_buffer_.clear();
      capture_ = &head_buffer_;
      frame.is_section_head = true;
      return;
    }
    if (name == "p" || name == "figure" || name == "note" || name == "formula" || name == "table") {
      separate_body();
      return;
    }
    if (name == "ref") {
      const auto* type = find_attr(attrs, "type");
      if (!type || std::string_view(type) != "bibr") return;
      const std::size_t section = ensure_section();
      std::string target;
      if (const auto* t = find_attr(attrs, "target")) {
        target = t;
        if (!target.empty() && target.front() == '#') target.erase(0, 1);
      }
      pending_.push_back({std::move(target), section, paper_.sections[section].body.size()});
    }
  }

  void end(const XML_Char* raw_name) {
    const auto name = local_name(raw_name);
    Frame frame = std::move(frames_.back());
    frames_.pop_back();
    --depth_;

    if (name == "text") --in_text_;
    if (name == "teiHeader") --in_header_;
    if (frame.is_references) --in_references_;
    if (frame.is_annex) --in_annex_;

    if (name == "biblStruct" && in_bibl_) {
      --in_bibl_;
      finish_bibl();
      return;
    }
    if (in_bibl_) {
      end_bibl_child(name);
      return;
    }
    if (in_header_ && name == "title" && capture_ == &paper_title_buffer_) {
      paper_title_ = collapse_whitespace(paper_title_buffer_);
      capture_ = nullptr;
      return;
    }
    if (frame.is_section_head) {
      capture_ = nullptr;
      TeiSection section;
      section.raw_heading = collapse_whitespace(head_buffer_);
      if (in_annex_ > 0) {
        section.label = SectionLabel::kAppendix;
        section.mapped = true;
      } else {
        std::tie(section.label, section.mapped) = canonical_section(section.raw_heading, keywords_);
      }
      paper_.sections.push_back(std::move(section));
      current_section_ = paper_.sections.size() - 1;
    }
  }

  void text(const XML_Char* data, int length) {
    std::string_view chunk(data, static_cast<std::size_t>(length));
    if (in_bibl_) {
      if (bibl_capture_) bibl_capture_->append(chunk);
      return;
    }
    if (capture_) {
      capture_->append(chunk);
      return;
    }
    if (!in_text_ || in_references_ || !current_section_) return;
    paper_.sections[*current_section_].body.append(chunk);
  }

  ParsedPaper finish() {
    if (!saw_tei_root_) throw TeiStructureError("document root is not a TEI element");
    if (!saw_body_) throw TeiStructureError("TEI document has no <text><body>");
    paper_.title = paper_title_;
    std::set<std::string> keys;
    for (const auto& entry : paper_.bib_entries)
      if (!entry.key.empty()) keys.insert(entry.key);
    std::vector<std::vector<std::size_t>> offset_maps;
    for (auto& section : paper_.sections) offset_maps.push_back(collapse_body(section.body));
    for (auto& anchor : pending_) {
      if (anchor.target.empty() || !keys.contains(anchor.target)) {
        ++paper_.dropped_anchors;
        continue;
      }
      paper_.anchors.push_back({std::move(anchor.target), anchor.section, offset_maps[anchor.section][anchor.offset]});
    }
    return std::move(paper_);
  }

 private:
  struct Frame {
    std::string name;
    bool is_div = false;
    bool is_references = false;
    bool is_annex = false;
    bool is_section_head = false;
  };

  void start_bibl_child(std::string_view name, const XML_Char** attrs) {
    if (name == "analytic") in_analytic_ = true;
    if (name == "title") {
      auto& target = in_analytic_ ? analytic_title_ : monogr_title_;
      if (target.empty()) bibl_capture_ = &target;
      return;
    }
    if (name == "persName") {
      author_buffer_.clear();
      in_persname_ = true;
      return;
    }
    if (in_persname_ && (name == "forename" || name == "surname")) {
      if (!author_buffer_.empty()) author_buffer_.push_back(' ');
      bibl_capture_ = &author_buffer_;
      return;
    }
    if (name == "date" && bibl_.raw_year.empty()) {
      if (const auto* when = find_attr(attrs, "when")) {
        bibl_.raw_year = when;
      } else {
        bibl_capture_ = &bibl_.raw_year;
      }
    }
  }

  void end_bibl_child(std::string_view name) {
    if (name == "title" || name == "forename" || name == "surname" || name == "date") bibl_capture_ = nullptr;
    if (name == "persName" && in_persname_) {
      in_persname_ = false;
      auto author = collapse_whitespace(author_buffer_);
      if (!author.empty()) (in_analytic_ ? analytic_authors_ : monogr_authors_).push_back(std::move(author));
    }
    if (name == "analytic") in_analytic_ = false;
  }

  void finish_bibl() {
    bibl_.title = collapse_whitespace(analytic_title_.empty() ? monogr_title_ : analytic_title_);
    bibl_.authors = analytic_authors_.empty() ? std::move(monogr_authors_) : std::move(analytic_authors_);
    bibl_.raw_year = collapse_whitespace(bibl_.raw_year);
    bibl_.year = first_year(bibl_.raw_year);
    paper_.bib_entries.push_back(std::move(bibl_));
    bibl_ = {};
    analytic_title_.clear();
    monogr_title_.clear();
    analytic_authors_.clear();
    monogr_authors_.clear();
    in_analytic_ = false;
    in_persname_ = false;
    bibl_capture_ = nullptr;
  }

  std::size_t ensure_section() {
    if (!current_section_) {
      paper_.sections.push_back(TeiSection{});
      current_section_ = paper_.sections.size() - 1;
    }
    return *current_section_;
  }

  void separate_body() {
    if (!current_section_ || in_references_) return;
    auto& body = paper_.sections[*current_section_].body;
    if (!body.empty() && body.back() != ' ') body.push_back(' ');
  }

  // Collapses whitespace runs in place and returns the old-offset ->
  // new-offset map (one entry per old byte plus the end position).
  static std::vector<std::size_t> collapse_body(std::string& body) {
    std::vector<std::size_t> map(body.size() + 1);
    std::string out;
    out.reserve(body.size());
    bool pending_space = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
      const char c = body[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        pending_space = !out.empty();
        map[i] = out.size() + (pending_space ? 1 : 0);
        continue;
      }
      if (pending_space) out.push_back(' ');
      pending_space = false;
      map[i] = out.size();
      out.push_back(c);
    }
    map[body.size()] = out.size();
    for (auto& m : map) m = std::min(m, out.size());
    body = std::move(out);
    return map;
  }

  const std::vector<SectionKeywords>& keywords_;
  ParsedPaper paper_;
  std::vector<Frame> frames_;
  std::vector<PendingAnchor> pending_;
  int depth_ = 0;
  int in_text_ = 0;
  int in_header_ = 0;
  int in_references_ = 0;
  int in_annex_ = 0;
  int in_bibl_ = 0;
  bool saw_tei_root_ = false;
  bool saw_body_ = false;
  std::optional<std::size_t> current_section_;
  std::string head_buffer_;
  std::string paper_title_;
  std::string paper_title_buffer_;
  std::string* capture_ = nullptr;

  BibEntry bibl_;
  std::string analytic_title_;
  std::string monogr_title_;
  std::vector<std::string> analytic_authors_;
  std::vector<std::string> monogr_authors_;
  std::string* bibl_capture_ = nullptr;
  std::string author_buffer_;
  bool in_analytic_ = false;
  bool in_persname_ = false;
};

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
  static_cast<TeiBuilder*>(user)->start(name, attrs);
}
void XMLCALL on_end(void* user, const XML_Char* name) { static_cast<TeiBuilder*>(user)->end(name); }
void XMLCALL on_text(void* user, const XML_Char* data, int length) {
  static_cast<TeiBuilder*>(user)->text(data, length);
}

struct ParserDeleter {
  void operator()(XML_Parser p) const { XML_ParserFree(p); }
};

}  // namespace

const BibEntry* ParsedPaper::find_entry(std::string_view key) const {
  for (const auto& entry : bib_entries)
    if (entry.key == key) return &entry;
  return nullptr;
}

std::string ParsedPaper::text_of(std::initializer_list<SectionLabel> labels) const {
  std::string out;
  for (const auto& section : sections) {
    if (std::find(labels.begin(), labels.end(), section.label) == labels.end()) continue;
    if (!out.empty()) out += "\n\n";
    out += section.raw_heading;
    out += "\n";
    out += section.body;
  }
  return out;
}

std::pair<SectionLabel, bool> canonical_section(std::string_view heading,
                                                const std::vector<SectionKeywords>& keywords) {
  const auto lowered = to_lower_ascii(heading);
  for (const auto& entry : keywords)
    for (const auto& keyword : entry.keywords)
      if (!keyword.empty() && lowered.find(keyword) != std::string::npos) return {entry.label, true};
  return {SectionLabel::kOther, false};
}

ParsedPaper parse_tei(std::string_view document, const std::vector<SectionKeywords>& keywords) {
  std::unique_ptr<XML_ParserStruct, ParserDeleter> parser(XML_ParserCreateNS(nullptr, '|'));
  if (!parser) throw Error("cannot allocate XML parser");
  TeiBuilder builder(keywords);
  XML_SetUserData(parser.get(), &builder);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  XML_SetCharacterDataHandler(parser.get(), on_text);

  constexpr std::size_t kChunk = 1 << 20;
  std::size_t pos = 0;
  do {
    const std::size_t n = std::min(kChunk, document.size() - pos);
    const bool last = pos + n == document.size();
    if (XML_Parse(parser.get(), document.data() + pos, static_cast<int>(n), last ? 1 : 0) == XML_STATUS_ERROR) {
      const auto offset = XML_GetCurrentByteIndex(parser.get());
      throw TeiParseError(std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(parser.get())),
                          offset < 0 ? 0 : static_cast<std::size_t>(offset));
    }
    pos += n;
  } while (pos < document.size());
  return builder.finish();
}

CitationProfile build_citation_profile(const ParsedPaper& paper, const std::set<std::string>& fuzzy_keys) {
  CitationProfile profile;
  for (const auto& anchor : paper.anchors) {
    auto& stats = profile[anchor.key];
    ++stats.cite_count;
    const auto& section = paper.sections.at(anchor.section);
    stats.sections.insert(section.label);
    if (!section.mapped) stats.low_confidence = true;
  }
  for (auto& [key, stats] : profile)
    if (fuzzy_keys.contains(key)) stats.low_confidence = true;
  return profile;
}

BibMatch match_bib_to_records(const ParsedPaper& paper, const std::vector<PaperRecord>& candidates,
                              const TitleMatchConfig& config) {
  std::map<std::string, PaperId> by_title;  // normalized title -> smallest id
  std::vector<std::string> normalized(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    normalized[i] = normalize_title(candidates[i].title);
    if (normalized[i].empty()) continue;
    auto [it, inserted] = by_title.emplace(normalized[i], candidates[i].id);
    if (!inserted && candidates[i].id < it->second) it->second = candidates[i].id;
  }

  BibMatch result;
  for (const auto& entry : paper.bib_entries) {
    const auto title = normalize_title(entry.title);
    if (!title.empty()) {
      if (auto it = by_title.find(title); it != by_title.end()) {
        result.matched.emplace(entry.key, it->second);
        continue;
      }
    }
    std::optional<std::size_t> best;
    double best_similarity = 0.0;
    if (!title.empty() && entry.year) {
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& year = candidates[i].year;
        if (!year || std::abs(*year - *entry.year) > config.year_tolerance || normalized[i].empty()) continue;
        const double similarity = levenshtein_similarity(title, normalized[i]);
        if (similarity + 1e-12 < config.fuzzy_threshold) continue;
        if (!best || similarity > best_similarity ||
            (similarity == best_similarity && candidates[i].id < candidates[*best].id)) {
          best = i;
          best_similarity = similarity;
        }
      }
    }
    if (best) {
      result.matched.emplace(entry.key, candidates[*best].id);
      result.fuzzy.insert(entry.key);
    } else {
      result.unmatched.push_back(entry.key);
    }
  }
  return result;
}

std::map<PaperId, CitationStats> profile_by_paper(const CitationProfile& profile, const BibMatch& match) {
  std::map<PaperId, CitationStats> out;
  for (const auto& [key, stats] : profile) {
    auto it = match.matched.find(key);
    if (it == match.matched.end()) continue;
    auto& merged = out[it->second];
    merged.cite_count += stats.cite_count;
    merged.sections.insert(stats.sections.begin(), stats.sections.end());
    merged.low_confidence = merged.low_confidence || stats.low_confidence ||
                            match.fuzzy.contains(key);
  }
  return out;
}

json to_json(const ParsedPaper& paper) {
  json sections = json::array();
  for (const auto& s : paper.sections)
    sections.push_back({{"label", std::string(to_string(s.label))},
                        {"mapped", s.mapped},
                        {"raw_heading", s.raw_heading},
                        {"body", s.body}});
  json entries = json::array();
  for (const auto& e : paper.bib_entries)
    entries.push_back({{"key", e.key},
                       {"title", e.title},
                       {"raw_year", e.raw_year},
                       {"year", e.year ? json(*e.year) : json(nullptr)},
                       {"authors", e.authors}});
  json anchors = json::array();
  for (const auto& a : paper.anchors)
    anchors.push_back({{"key", a.key}, {"section", a.section}, {"char_offset", a.char_offset}});
  return {{"title", paper.title},
          {"sections", sections},
          {"bib_entries", entries},
          {"anchors", anchors},
          {"dropped_anchors", paper.dropped_anchors}};
}

json to_json(const CitationProfile& profile) {
  json out = json::object();
  for (const auto& [key, stats] : profile) {
    json sections = json::array();
    for (auto label : stats.sections) sections.push_back(std::string(to_string(label)));
    out[key] = {{"cite_count", stats.cite_count}, {"sections", sections}, {"low_confidence", stats.low_confidence}};
  }
  return out;
}

}  // namespace citedag
