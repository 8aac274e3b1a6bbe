#include "dyad/wikitext.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "dyad/errors.hpp"

namespace dyad {

namespace {

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), lower);
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim_view(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string trim(std::string_view s) { return std::string(trim_view(s)); }

bool starts_with_ci(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (pos + prefix.size() > s.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (lower(s[pos + i]) != lower(prefix[i])) return false;
  }
  return true;
}

std::size_t find_ci(std::string_view s, std::string_view needle, std::size_t from = 0) {
  if (needle.empty()) return from;
  for (std::size_t i = from; i + needle.size() <= s.size(); ++i) {
    if (starts_with_ci(s, i, needle)) return i;
  }
  return std::string_view::npos;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string remove_comments(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t open = s.find("<!--", pos);
    if (open == std::string_view::npos) {
      out.append(s.substr(pos));
      break;
    }
    out.append(s.substr(pos, open - pos));
    const std::size_t close = s.find("-->", open + 4);
    if (close == std::string_view::npos) break;
    pos = close + 3;
  }
  return out;
}

// Drops <ref>...</ref> and <ref .../> elements.
std::string remove_refs(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t open = find_ci(s, "<ref", pos);
    while (open != std::string_view::npos && open + 4 < s.size() && s[open + 4] != '>' &&
           s[open + 4] != '/' && !is_space(s[open + 4])) {
      open = find_ci(s, "<ref", open + 4);
    }
    if (open == std::string_view::npos) {
      out.append(s.substr(pos));
      break;
    }
    out.append(s.substr(pos, open - pos));
    const std::size_t tag_end = s.find('>', open);
    if (tag_end == std::string_view::npos) break;
    if (s[tag_end - 1] == '/') {
      pos = tag_end + 1;
      continue;
    }
    const std::size_t close = find_ci(s, "</ref>", tag_end);
    pos = close == std::string_view::npos ? tag_end + 1 : close + 6;
  }
  return out;
}

std::string decode_entities(std::string s) {
  replace_all(s, "&nbsp;", " ");
  replace_all(s, "&ndash;", "-");
  replace_all(s, "&mdash;", "-");
  replace_all(s, "&lt;", "<");
  replace_all(s, "&gt;", ">");
  replace_all(s, "&quot;", "\"");
  replace_all(s, "&#39;", "'");
  replace_all(s, "&apos;", "'");
  replace_all(s, "&amp;", "&");
  return s;
}

// Splits on '|' that is not inside [[...]] or {{...}}.
std::vector<std::string> split_top_level(std::string_view s) {
  std::vector<std::string> parts;
  int links = 0;
  int templates = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.compare(i, 2, "[[") == 0) {
      ++links;
      ++i;
    } else if (s.compare(i, 2, "]]") == 0 && links > 0) {
      --links;
      ++i;
    } else if (s.compare(i, 2, "{{") == 0) {
      ++templates;
      ++i;
    } else if (s.compare(i, 2, "}}") == 0 && templates > 0) {
      --templates;
      ++i;
    } else if (s[i] == '|' && links == 0 && templates == 0) {
      parts.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  parts.emplace_back(s.substr(start));
  return parts;
}

std::string template_name(std::string_view raw) {
  std::string name = to_lower(trim_view(raw));
  std::replace(name.begin(), name.end(), '_', ' ');
  return name;
}

std::vector<std::string> positional_args(const std::vector<std::string>& parts) {
  std::vector<std::string> args;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::size_t eq = parts[i].find('=');
    const std::size_t link = parts[i].find("[[");
    if (eq != std::string::npos && (link == std::string::npos || eq < link)) continue;
    args.push_back(parts[i]);
  }
  return args;
}

// Cell-level expansion of the handful of templates that carry entity names.
std::string expand_cell_template(std::string_view inner) {
  static const std::unordered_set<std::string> kLinking = {
      "flag", "flagcountry", "flag country", "flagu", "flagbig", "flagcu"};
  static const std::unordered_set<std::string> kLists = {
      "plainlist",      "plain list", "flatlist",         "unbulleted list", "ubl",
      "ublist",         "hlist",      "bulleted list",    "collapsible list", "cslist",
      "unbulleted-list"};
  static const std::unordered_set<std::string> kWrappers = {"nowrap", "small", "nobold", "big",
                                                            "resize", "nobr",  "noitalic"};
  const auto parts = split_top_level(inner);
  const std::string name = template_name(parts.front());
  const auto args = positional_args(parts);
  if (kLinking.contains(name)) {
    if (args.empty()) return {};
    return "[[" + trim(args.front()) + "]]";
  }
  if (kLists.contains(name)) {
    std::string out;
    for (const auto& a : args) {
      out += "\n";
      out += a;
    }
    return out + "\n";
  }
  if (kWrappers.contains(name)) {
    return args.empty() ? std::string{} : args.back();
  }
  return {};
}

// Replaces templates innermost-first using `expand`.
template <class Expand>
std::string expand_templates(std::string s, Expand&& expand) {
  for (;;) {
    const std::size_t close = s.find("}}");
    if (close == std::string::npos) break;
    const std::size_t open = s.rfind("{{", close);
    if (open == std::string::npos) {
      s.erase(close, 2);
      continue;
    }
    const std::string inner = s.substr(open + 2, close - open - 2);
    s.replace(open, close + 2 - open, expand(inner));
  }
  replace_all(s, "{{", "");
  return s;
}

std::string replace_breaks(std::string s) {
  std::string out;
  out.reserve(s.size());
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t open = s.find('<', pos);
    if (open == std::string::npos) {
      out.append(s, pos, std::string::npos);
      break;
    }
    out.append(s, pos, open - pos);
    const std::size_t close = s.find('>', open);
    if (close == std::string::npos) {
      out.append(s, open, std::string::npos);
      break;
    }
    std::string tag = to_lower(std::string_view(s).substr(open + 1, close - open - 1));
    tag.erase(std::remove(tag.begin(), tag.end(), '/'), tag.end());
    tag = trim(tag);
    const std::string tag_name = tag.substr(0, tag.find(' '));
    if (tag_name == "br" || tag_name == "p" || tag_name == "li" || tag_name == "div") out += '\n';
    pos = close + 1;
  }
  return out;
}

std::string strip_quotes(std::string s) {
  replace_all(s, "'''", "");
  replace_all(s, "''", "");
  return s;
}

bool is_namespaced_link(std::string_view target) {
  static const char* kPrefixes[] = {"file:", "image:", "category:", "media:", "wikt:",
                                    "wiktionary:", "commons:", "template:", "help:", "wp:"};
  const std::string t = to_lower(trim_view(target));
  for (const char* p : kPrefixes) {
    if (t.rfind(p, 0) == 0) return true;
  }
  return false;
}

std::string normalize_plain(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : trim_view(s)) {
    if (is_space(c)) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += lower(c);
  }
  return out;
}

// Plain-text cell line cleanup: drops parentheticals and stray punctuation.
std::string clean_plain_line(std::string_view line) {
  std::string out;
  int paren = 0;
  for (char c : line) {
    if (c == '(') {
      ++paren;
    } else if (c == ')') {
      if (paren > 0) --paren;
    } else if (paren == 0) {
      out += c;
    }
  }
  out = strip_quotes(out);
  std::string_view v = trim_view(out);
  while (!v.empty() && std::string_view(":;,.-*#").find(v.back()) != std::string_view::npos) {
    v.remove_suffix(1);
    v = trim_view(v);
  }
  while (!v.empty() && std::string_view(":;,.-*#").find(v.front()) != std::string_view::npos) {
    v.remove_prefix(1);
    v = trim_view(v);
  }
  return std::string(v);
}

bool is_filler_line(std::string_view cleaned) {
  const std::string l = normalize_plain(cleaned);
  if (l.empty()) return true;
  static const char* kFillers[] = {"supported by", "support", "and", "see below", "see list",
                                   "allies", "various", "others", "…", "..."};
  for (const char* f : kFillers) {
    if (l == f) return true;
  }
  return l.rfind("supported by", 0) == 0 && l.size() <= std::string_view("supported by:").size();
}

}  // namespace

std::string normalize_title(std::string_view title) {
  std::string t(title);
  const std::size_t hash = t.find('#');
  if (hash != std::string::npos) t.erase(hash);
  std::replace(t.begin(), t.end(), '_', ' ');
  std::string out;
  bool space = false;
  for (char c : trim_view(t)) {
    if (is_space(c)) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  if (!out.empty() && out.front() == ':') out = trim(std::string_view(out).substr(1));
  if (!out.empty() && std::islower(static_cast<unsigned char>(out.front()))) {
    out.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(out.front())));
  }
  return out;
}

std::string entity_id(const EntityRef& ref) {
  if (ref.resolved_title) return *ref.resolved_title;
  if (ref.link_target) return *ref.link_target;
  return std::string(kUnresolvedPrefix) + normalize_plain(ref.raw_text);
}

std::set<std::string> harvest_category_tree(const CategoryIndex& index, std::string_view root,
                                            int max_depth) {
  if (max_depth < 0) throw ValidationError("max_depth must be non-negative");
  const auto root_it = index.find(std::string(root));
  if (root_it == index.end()) {
    throw NotFoundError("unknown category: " + std::string(root));
  }
  std::set<std::string> articles;
  std::set<std::string> visited{std::string(root)};
  std::deque<std::pair<std::string, int>> queue{{std::string(root), 0}};
  while (!queue.empty()) {
    auto [name, depth] = queue.front();
    queue.pop_front();
    const auto it = index.find(name);
    if (it == index.end()) continue;
    articles.insert(it->second.articles.begin(), it->second.articles.end());
    if (depth == max_depth) continue;
    for (const auto& sub : it->second.subcategories) {
      if (visited.insert(sub).second) queue.emplace_back(sub, depth + 1);
    }
  }
  return articles;
}

std::vector<EntityRef> extract_entity_refs(std::string_view cell_wikitext) {
  std::string s = remove_refs(remove_comments(cell_wikitext));
  s = expand_templates(std::move(s), expand_cell_template);
  s = decode_entities(replace_breaks(std::move(s)));

  std::vector<EntityRef> refs;
  std::set<std::string> seen;
  auto add = [&](EntityRef ref) {
    const std::string key =
        ref.link_target ? "link:" + *ref.link_target : "plain:" + normalize_plain(ref.raw_text);
    if (seen.insert(key).second) refs.push_back(std::move(ref));
  };

  std::istringstream lines(s);
  std::string line;
  while (std::getline(lines, line)) {
    bool has_link = false;
    std::size_t pos = 0;
    while ((pos = line.find("[[", pos)) != std::string::npos) {
      // Matching close, allowing nested links inside file captions.
      int depth = 0;
      std::size_t end = std::string::npos;
      for (std::size_t i = pos; i + 1 < line.size(); ++i) {
        if (line.compare(i, 2, "[[") == 0) {
          ++depth;
          ++i;
        } else if (line.compare(i, 2, "]]") == 0) {
          if (--depth == 0) {
            end = i;
            break;
          }
          ++i;
        }
      }
      if (end == std::string::npos) break;
      const std::string inner = line.substr(pos + 2, end - pos - 2);
      pos = end + 2;
      const std::size_t bar = inner.find('|');
      const std::string target = inner.substr(0, bar);
      if (is_namespaced_link(target)) continue;
      const std::string normalized = normalize_title(target);
      if (normalized.empty()) continue;
      std::string label = bar == std::string::npos ? target : inner.substr(bar + 1);
      label = trim(strip_quotes(label));
      if (label.empty()) label = trim(target);
      has_link = true;
      add(EntityRef{label, normalized, std::nullopt});
    }
    if (has_link) continue;
    const std::string cleaned = clean_plain_line(line);
    if (is_filler_line(cleaned)) continue;
    add(EntityRef{cleaned, std::nullopt, std::nullopt});
  }
  return refs;
}

EntityRef resolve_redirect(EntityRef ref, const RedirectTable& redirect_table, int max_hops) {
  if (!ref.link_target) return ref;
  std::vector<std::string> chain{*ref.link_target};
  std::string current = *ref.link_target;
  int hops = 0;
  for (auto it = redirect_table.find(current); it != redirect_table.end();
       it = redirect_table.find(current)) {
    current = it->second;
    const bool cycle = std::find(chain.begin(), chain.end(), current) != chain.end();
    chain.push_back(current);
    if (cycle) throw RedirectError(chain, "redirect cycle starting at " + chain.front());
    if (++hops > max_hops) {
      throw RedirectError(chain, "redirect hop limit exceeded at " + chain.front());
    }
  }
  ref.resolved_title = current;
  return ref;
}

std::optional<InfoboxMilitaryConflict> parse_infobox(const RawArticle& article,
                                                     const InfoboxOptions& options) {
  const std::string text = remove_comments(article.wikitext);

  // Locate "{{Infobox military conflict".
  std::size_t start = std::string::npos;
  for (std::size_t pos = text.find("{{"); pos != std::string::npos; pos = text.find("{{", pos + 2)) {
    std::size_t i = pos + 2;
    while (i < text.size() && is_space(text[i])) ++i;
    bool ok = true;
    for (std::string_view word : {"infobox", "military", "conflict"}) {
      if (!starts_with_ci(text, i, word)) {
        ok = false;
        break;
      }
      i += word.size();
      if (word != "conflict") {
        if (i >= text.size() || (text[i] != ' ' && text[i] != '_')) {
          ok = false;
          break;
        }
        while (i < text.size() && (text[i] == ' ' || text[i] == '_')) ++i;
      }
    }
    if (ok && (i >= text.size() || text[i] == '|' || text[i] == '}' || is_space(text[i]))) {
      start = pos;
      break;
    }
  }
  if (start == std::string::npos) return std::nullopt;

  // Balanced scan collecting top-level parameters.
  std::vector<std::string> params;
  std::size_t templates = 0;
  std::size_t links = 0;
  std::size_t seg = start + 2;
  bool closed = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    if (text.compare(i, 2, "{{") == 0) {
      ++templates;
      if (templates + links > options.max_nesting) {
        throw ParseError(article.title, "infobox nesting exceeds bound of " +
                                            std::to_string(options.max_nesting));
      }
      ++i;
    } else if (text.compare(i, 2, "}}") == 0) {
      --templates;
      if (templates == 0) {
        params.push_back(text.substr(seg, i - seg));
        closed = true;
        break;
      }
      ++i;
    } else if (text.compare(i, 2, "[[") == 0) {
      ++links;
      if (templates + links > options.max_nesting) {
        throw ParseError(article.title, "infobox nesting exceeds bound of " +
                                            std::to_string(options.max_nesting));
      }
      ++i;
    } else if (text.compare(i, 2, "]]") == 0) {
      if (links > 0) --links;
      ++i;
    } else if (text[i] == '|' && templates == 1 && links == 0) {
      params.push_back(text.substr(seg, i - seg));
      seg = i + 1;
    }
  }
  if (!closed) throw ParseError(article.title, "unbalanced braces in military-conflict infobox");

  std::map<std::pair<int, std::string>, std::string> combatant_cells;
  std::map<std::string, std::vector<std::string>> meta;
  for (std::size_t p = 1; p < params.size(); ++p) {
    const std::size_t eq = params[p].find('=');
    if (eq == std::string::npos) continue;
    std::string name;
    for (char c : params[p].substr(0, eq)) {
      if (!is_space(c) && c != '_') name += lower(c);
    }
    const std::string value = trim(std::string_view(params[p]).substr(eq + 1));
    if (value.empty()) continue;
    if (name.rfind("combatant", 0) == 0) {
      std::size_t i = 9;
      std::size_t digits = 0;
      while (i + digits < name.size() && std::isdigit(static_cast<unsigned char>(name[i + digits])))
        ++digits;
      const std::string suffix = name.substr(i + digits);
      if (digits == 0 || suffix.size() > 1 ||
          (suffix.size() == 1 && !std::isalpha(static_cast<unsigned char>(suffix[0])))) {
        continue;
      }
      combatant_cells[{std::stoi(name.substr(i, digits)), suffix}] = value;
      continue;
    }
    auto strip_digits = [](std::string n) {
      while (!n.empty() && (std::isdigit(static_cast<unsigned char>(n.back())) ||
                            (n.size() > 1 && std::isdigit(static_cast<unsigned char>(
                                                 n[n.size() - 2])) &&
                             std::isalpha(static_cast<unsigned char>(n.back()))))) {
        n.pop_back();
      }
      return n;
    };
    const std::string base = strip_digits(name);
    if (base == "place" || base == "date" || base == "result") {
      meta[base].push_back(value);
    } else if (base == "strength") {
      meta["strength"].push_back(value);
    } else if (base == "casualties" || base == "casualty") {
      meta["casualties"].push_back(value);
    } else if (base == "commander" || base == "commanders") {
      meta["commanders"].push_back(value);
    }
  }

  std::map<int, std::vector<EntityRef>> groups;
  for (const auto& [key, cell] : combatant_cells) {
    auto refs = extract_entity_refs(cell);
    auto& group = groups[key.first];
    for (auto& r : refs) {
      const bool dup = std::any_of(group.begin(), group.end(), [&](const EntityRef& g) {
        return entity_id(g) == entity_id(r);
      });
      if (!dup) group.push_back(std::move(r));
    }
  }

  InfoboxMilitaryConflict out;
  out.conflict_title = article.title;
  out.conflict_id = article.page_id;
  for (auto& [n, group] : groups) {
    if (!group.empty()) out.combatant_groups.push_back(std::move(group));
  }
  if (out.combatant_groups.size() < 2) return std::nullopt;

  auto joined = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = meta.find(key);
    if (it == meta.end()) return std::nullopt;
    std::string s;
    for (const auto& v : it->second) {
      if (!s.empty()) s += " | ";
      s += v;
    }
    return s;
  };
  out.place = joined("place");
  out.date = joined("date");
  out.strength = joined("strength");
  out.casualties = joined("casualties");
  out.commanders = joined("commanders");
  out.result = joined("result");
  return out;
}

const std::set<std::string>& default_section_blacklist() {
  static const std::set<std::string> kBlacklist = {
      "See also", "Bibliography", "References", "Further reading", "Sources",
      "Literature", "External links", "Citations", "Footnotes", "Notes"};
  return kBlacklist;
}

namespace {

std::optional<std::string> level2_heading(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || is_space(line.back()))) line.remove_suffix(1);
  if (line.size() < 5) return std::nullopt;
  if (line.substr(0, 2) != "==" || line[2] == '=') return std::nullopt;
  if (line.substr(line.size() - 2) != "==" || line[line.size() - 3] == '=') return std::nullopt;
  std::string title = trim(line.substr(2, line.size() - 4));
  if (title.empty()) return std::nullopt;
  return title;
}

}  // namespace

SectionedArticle section_split(const RawArticle& article, const std::set<std::string>& blacklist) {
  std::set<std::string> lowered;
  for (const auto& b : blacklist) lowered.insert(to_lower(trim_view(b)));

  SectionedArticle out;
  out.article_title = article.title;
  const std::string_view text = article.wikitext;
  std::string current = "Summary";
  std::size_t body_start = 0;
  auto flush = [&](std::size_t end) {
    const bool first = out.sections.empty();
    if (first || !lowered.contains(to_lower(current))) {
      out.sections.push_back({current, std::string(text.substr(body_start, end - body_start))});
    } else {
      // Keep an explicit marker that a dropped section was seen.
      out.sections.push_back({"", ""});
    }
  };
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t line_end = nl == std::string_view::npos ? text.size() : nl;
    const std::size_t next = nl == std::string_view::npos ? text.size() : nl + 1;
    if (auto title = level2_heading(text.substr(pos, line_end - pos))) {
      flush(pos);
      current = std::move(*title);
      body_start = next;
    }
    pos = next;
  }
  flush(text.size());
  std::erase_if(out.sections, [](const Section& s) { return s.section_title.empty(); });
  return out;
}

std::string plain_text(std::string_view wikitext) {
  std::string s = remove_refs(remove_comments(wikitext));

  // Drop templates, tables and namespaced links by depth scanning.
  std::string out;
  out.reserve(s.size());
  std::size_t templates = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.compare(i, 2, "{{") == 0) {
      ++templates;
      ++i;
    } else if (s.compare(i, 2, "}}") == 0 && templates > 0) {
      --templates;
      ++i;
    } else if (templates == 0) {
      out += s[i];
    }
  }
  s.swap(out);
  out.clear();
  {
    std::istringstream lines(s);
    std::string line;
    int table = 0;
    while (std::getline(lines, line)) {
      const std::string_view t = trim_view(line);
      if (t.rfind("{|", 0) == 0) {
        ++table;
        continue;
      }
      if (table > 0) {
        if (t.rfind("|}", 0) == 0) --table;
        continue;
      }
      if (auto h = level2_heading(t)) {
        out += *h;
      } else {
        std::string_view body = t;
        while (!body.empty() && body.front() == '=') body.remove_prefix(1);
        while (!body.empty() && body.back() == '=') body.remove_suffix(1);
        while (!body.empty() && (body.front() == '*' || body.front() == '#' ||
                                 body.front() == ':' || body.front() == ';')) {
          body.remove_prefix(1);
        }
        out += body;
      }
      out += '\n';
    }
  }
  s.swap(out);
  out.clear();

  for (std::size_t i = 0; i < s.size();) {
    if (s.compare(i, 2, "[[") == 0) {
      int depth = 0;
      std::size_t end = std::string::npos;
      for (std::size_t j = i; j + 1 < s.size(); ++j) {
        if (s.compare(j, 2, "[[") == 0) {
          ++depth;
          ++j;
        } else if (s.compare(j, 2, "]]") == 0) {
          if (--depth == 0) {
            end = j;
            break;
          }
          ++j;
        }
      }
      if (end == std::string::npos) {
        i += 2;
        continue;
      }
      const std::string inner = s.substr(i + 2, end - i - 2);
      i = end + 2;
      const std::size_t bar = inner.find('|');
      if (is_namespaced_link(inner.substr(0, bar))) continue;
      out += bar == std::string::npos ? inner : inner.substr(bar + 1);
    } else if (s[i] == '[' && (s.compare(i + 1, 4, "http") == 0 || s.compare(i + 1, 2, "//") == 0)) {
      const std::size_t end = s.find(']', i);
      if (end == std::string::npos) {
        ++i;
        continue;
      }
      const std::string inner = s.substr(i + 1, end - i - 1);
      const std::size_t sp = inner.find(' ');
      if (sp != std::string::npos) out += inner.substr(sp + 1);
      i = end + 1;
    } else {
      out += s[i++];
    }
  }
  s = strip_quotes(std::move(out));

  out.clear();
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] == '<') {
      const std::size_t end = s.find('>', i);
      if (end != std::string::npos && end - i < 200) {
        out += ' ';
        i = end + 1;
        continue;
      }
    }
    out += s[i++];
  }
  return decode_entities(std::move(out));
}

std::string title_slug(std::string_view title) {
  static const char* kHex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : title) {
    if (std::isalnum(c) || c == '-' || c == '.' || c == ',' || c == '(' || c == ')' || c == '\'') {
      out += static_cast<char>(c);
    } else if (c == ' ' || c == '_') {
      out += '_';
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 15];
    }
  }
  return out;
}

Corpus load_corpus_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path index_path = fs::path(dir) / "index.json";
  std::ifstream index_file(index_path);
  if (!index_file) throw NotFoundError("missing corpus index: " + index_path.string());
  nlohmann::json index;
  try {
    index_file >> index;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed corpus index: " + std::string(e.what()));
  }
  if (!index.is_array()) throw ValidationError("corpus index must be a JSON array");

  Corpus corpus;
  std::set<std::uint64_t> page_ids;
  for (const auto& entry : index) {
    RawArticle a;
    a.title = normalize_title(entry.at("title").get<std::string>());
    a.page_id = entry.at("page_id").get<std::uint64_t>();
    a.is_redirect = entry.value("is_redirect", false);
    if (a.title.empty()) throw ValidationError("index entry with empty title");
    if (!page_ids.insert(a.page_id).second) {
      throw ValidationError("duplicate page_id " + std::to_string(a.page_id));
    }
    if (a.is_redirect) {
      const auto target = entry.find("redirect_target");
      if (target == entry.end() || !target->is_string()) {
        throw ValidationError("redirect without target: " + a.title);
      }
      corpus.redirects[a.title] = normalize_title(target->get<std::string>());
      continue;
    }
    const fs::path file = fs::path(dir) / (title_slug(a.title) + ".wiki");
    std::ifstream in(file, std::ios::binary);
    if (!in) {
      corpus.load_errors.push_back(a.title + ": missing article file " + file.filename().string());
      continue;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    a.wikitext = buf.str();
    corpus.articles.push_back(std::move(a));
  }
  std::sort(corpus.articles.begin(), corpus.articles.end(),
            [](const RawArticle& x, const RawArticle& y) { return x.page_id < y.page_id; });
  return corpus;
}

namespace {

std::string xml_element(std::string_view page, std::string_view tag) {
  const std::string open = "<" + std::string(tag);
  std::size_t pos = page.find(open);
  while (pos != std::string_view::npos) {
    const char next = pos + open.size() < page.size() ? page[pos + open.size()] : '\0';
    if (next == '>' || next == ' ' || next == '/') break;
    pos = page.find(open, pos + 1);
  }
  if (pos == std::string_view::npos) return {};
  const std::size_t gt = page.find('>', pos);
  if (gt == std::string_view::npos || page[gt - 1] == '/') return {};
  const std::size_t close = page.find("</" + std::string(tag) + ">", gt);
  if (close == std::string_view::npos) return {};
  return std::string(page.substr(gt + 1, close - gt - 1));
}

std::string xml_unescape(std::string s) {
  replace_all(s, "&lt;", "<");
  replace_all(s, "&gt;", ">");
  replace_all(s, "&quot;", "\"");
  replace_all(s, "&#039;", "'");
  replace_all(s, "&apos;", "'");
  replace_all(s, "&amp;", "&");
  return s;
}

}  // namespace

void read_mediawiki_xml(std::istream& in, const std::function<void(RawArticle)>& on_page) {
  std::string buffer;
  std::string chunk(1 << 16, '\0');
  auto drain = [&]() {
    for (;;) {
      const std::size_t open = buffer.find("<page>");
      if (open == std::string::npos) {
        // Keep a tail that may hold a split "<page>" marker.
        if (buffer.size() > 8) buffer.erase(0, buffer.size() - 8);
        return;
      }
      const std::size_t close = buffer.find("</page>", open);
      if (close == std::string::npos) {
        buffer.erase(0, open);
        return;
      }
      const std::string_view page = std::string_view(buffer).substr(open, close - open);
      const std::string ns = xml_element(page, "ns");
      if (ns.empty() || trim_view(ns) == "0") {
        RawArticle a;
        a.title = normalize_title(xml_unescape(xml_element(page, "title")));
        const std::string id = trim(xml_element(page, "id"));
        a.page_id = id.empty() ? 0 : std::stoull(id);
        const std::size_t redirect = page.find("<redirect");
        if (redirect != std::string_view::npos) {
          const std::size_t q = page.find("title=\"", redirect);
          if (q != std::string_view::npos) {
            const std::size_t e = page.find('"', q + 7);
            a.is_redirect = true;
            a.redirect_target =
                normalize_title(xml_unescape(std::string(page.substr(q + 7, e - q - 7))));
          }
        }
        a.wikitext = xml_unescape(xml_element(page, "text"));
        on_page(std::move(a));
      }
      buffer.erase(0, close + 7);
    }
  };
  while (in) {
    in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    buffer.append(chunk.data(), static_cast<std::size_t>(in.gcount()));
    drain();
  }
}

}  // namespace dyad
