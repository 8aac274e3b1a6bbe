#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dyad {

// Version of the combatant-tag and cell-cleaning rules below. Bump when the
// extraction behaviour changes so downstream manifests can tell them apart.
inline constexpr int kInfoboxRuleVersion = 1;

struct RawArticle {
  std::string title;
  std::uint64_t page_id = 0;
  std::string wikitext;
  bool is_redirect = false;
  std::optional<std::string> redirect_target;
};

struct EntityRef {
  std::string raw_text;
  std::optional<std::string> link_target;
  std::optional<std::string> resolved_title;

  bool operator==(const EntityRef&) const = default;
};

struct InfoboxMilitaryConflict {
  std::string conflict_title;
  std::uint64_t conflict_id = 0;
  std::vector<std::vector<EntityRef>> combatant_groups;
  std::optional<std::string> place;
  std::optional<std::string> date;
  std::optional<std::string> strength;
  std::optional<std::string> casualties;
  std::optional<std::string> commanders;
  std::optional<std::string> result;

  bool operator==(const InfoboxMilitaryConflict&) const = default;
};

struct Section {
  std::string section_title;
  std::string body_text;
};

struct SectionedArticle {
  std::string article_title;
  std::vector<Section> sections;
};

struct CategoryNode {
  std::vector<std::string> subcategories;
  std::vector<std::string> articles;
};
using CategoryIndex = std::map<std::string, CategoryNode>;

using RedirectTable = std::map<std::string, std::string>;

// Articles of `root` and of every subcategory reachable in at most
// `max_depth` steps. Each category is expanded once. Subcategories missing
// from the index contribute nothing; a missing root is a NotFoundError.
std::set<std::string> harvest_category_tree(const CategoryIndex& index, std::string_view root,
                                            int max_depth);

struct InfoboxOptions {
  // Maximum template/link nesting depth inside the infobox.
  std::size_t max_nesting = 128;
};

// Parses the first military-conflict infobox. Returns nothing unless at
// least two combatant cells yield entities. Throws ParseError on unbalanced
// or too deeply nested markup.
std::optional<InfoboxMilitaryConflict> parse_infobox(const RawArticle& article,
                                                     const InfoboxOptions& options = {});

// Entity references of one combatant cell, in order and de-duplicated.
// Wikilinks become linked refs; lines without any link become plain-text refs.
std::vector<EntityRef> extract_entity_refs(std::string_view cell_wikitext);

// Follows `ref.link_target` through the table. Plain-text refs come back
// unchanged. Throws RedirectError on cycles or after `max_hops` hops.
EntityRef resolve_redirect(EntityRef ref, const RedirectTable& redirect_table, int max_hops = 5);

const std::set<std::string>& default_section_blacklist();

// Splits on level-2 headings. Text before the first heading is "Summary".
// Blacklisted sections (case-insensitive, trimmed) are dropped.
SectionedArticle section_split(const RawArticle& article, const std::set<std::string>& blacklist);

// MediaWiki title normalisation: trims, maps '_' to ' ', collapses runs of
// spaces, drops a "#fragment" and upper-cases an ASCII first letter.
std::string normalize_title(std::string_view title);

// Stable id of an entity: its resolved (or linked) title, or
// "unresolved:<normalised raw text>" for plain-text mentions.
inline constexpr std::string_view kUnresolvedPrefix = "unresolved:";
std::string entity_id(const EntityRef& ref);

// Best-effort conversion of wikitext to prose for tokenisation: drops
// comments, references, templates, tables and file links, unwraps links.
std::string plain_text(std::string_view wikitext);

// File name used for an article inside a corpus directory.
std::string title_slug(std::string_view title);

struct Corpus {
  std::vector<RawArticle> articles;  // non-redirect pages with text
  RedirectTable redirects;
  std::vector<std::string> load_errors;
};

// Reads `<dir>/index.json` and the referenced `<slug>.wiki` files. A missing
// index is a NotFoundError; unreadable article files are reported in
// `load_errors` and skipped.
Corpus load_corpus_dir(const std::string& dir);

// Streams <page> elements of a MediaWiki XML export to `on_page`. Only one
// page is held in memory at a time.
void read_mediawiki_xml(std::istream& in, const std::function<void(RawArticle)>& on_page);

}  // namespace dyad
