#pragma once
// GROBID TEI-XML ingestion: sections, bibliography and in-text citation
// anchors, reduced to the seed-internal citation signals used for scoring.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "citedag/config.hpp"
#include "citedag/core_model.hpp"
#include "citedag/json_io.hpp"

namespace citedag {

// Malformed XML. `byte_offset` points at the offending input byte.
class TeiParseError : public Error {
 public:
  TeiParseError(const std::string& message, std::size_t byte_offset)
      : Error(message + " at byte " + std::to_string(byte_offset)), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Well-formed XML that is not a usable TEI document (no <TEI> root, no body).
class TeiStructureError : public Error {
 public:
  using Error::Error;
};

struct TeiSection {
  SectionLabel label = SectionLabel::kOther;
  // False when the heading matched no keyword (or the section is implicit).
  bool mapped = false;
  std::string raw_heading;
  std::string body;
};

struct BibEntry {
  std::string key;  // xml:id of the biblStruct, e.g. "b0"
  std::string title;
  std::string raw_year;
  std::optional<int> year;
  std::vector<std::string> authors;
};

struct CitationAnchor {
  std::string key;
  std::size_t section = 0;      // index into ParsedPaper::sections
  std::size_t char_offset = 0;  // byte offset into that section's body
};

struct ParsedPaper {
  std::string title;  // from the TEI header, may be empty
  std::vector<TeiSection> sections;
  std::vector<BibEntry> bib_entries;
  std::vector<CitationAnchor> anchors;
  // Pointers whose target is missing or absent from the bibliography.
  std::size_t dropped_anchors = 0;

  const BibEntry* find_entry(std::string_view key) const;
  // Concatenated bodies of the sections carrying any of the labels.
  std::string text_of(std::initializer_list<SectionLabel> labels) const;
};

// Maps a raw heading onto a canonical label. `second` is false when no
// keyword matched and the label fell back to kOther.
std::pair<SectionLabel, bool> canonical_section(std::string_view heading,
                                                const std::vector<SectionKeywords>& keywords);

// Headed <div>s inside <text> become sections (divs under a type="annex"
// div are labelled appendix). Citation pointers outside <text> (for
// example in the header abstract) are ignored. Anchors inside figures,
// notes and headless divs belong to the most recent section.
ParsedPaper parse_tei(std::string_view document,
                      const std::vector<SectionKeywords>& keywords = PipelineConfig::default_section_keywords());

struct CitationStats {
  std::uint64_t cite_count = 0;
  std::set<SectionLabel> sections;
  bool low_confidence = false;
  friend bool operator==(const CitationStats&, const CitationStats&) = default;
};

// local bibliography key -> stats, only for keys with at least one anchor.
using CitationProfile = std::map<std::string, CitationStats>;

// `fuzzy_keys` are entries joined to their metadata record only fuzzily;
// they are flagged low-confidence.
CitationProfile build_citation_profile(const ParsedPaper& paper, const std::set<std::string>& fuzzy_keys = {});

struct BibMatch {
  std::map<std::string, PaperId> matched;
  std::set<std::string> fuzzy;  // keys matched by the fuzzy rule
  std::vector<std::string> unmatched;
};

// Normalized-title exact match first, then the best fuzzy title match among
// records whose year is within the configured tolerance.
BibMatch match_bib_to_records(const ParsedPaper& paper, const std::vector<PaperRecord>& candidates,
                              const TitleMatchConfig& config = {});

// Re-keys a profile by matched paper id, merging entries that resolve to
// the same paper.
std::map<PaperId, CitationStats> profile_by_paper(const CitationProfile& profile, const BibMatch& match);

json to_json(const ParsedPaper& paper);
json to_json(const CitationProfile& profile);

}  // namespace citedag
