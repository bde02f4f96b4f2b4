#include "apexsql/guidance.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "apexsql/prompts.hpp"

namespace apexsql {

using nlohmann::json;

namespace embedded {
extern const char* const kTipsJson;
extern const char* const kRulesJson;
}  // namespace embedded

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TipLibrary TipLibrary::from_json_text(const std::string& text) {
  json doc = json::parse(text);
  TipLibrary lib;
  for (const auto& c : doc.at("categories"))
    lib.categories_.push_back(c.get<std::string>());
  std::set<std::string> category_set(lib.categories_.begin(), lib.categories_.end());
  std::set<std::string> seen_ids;
  for (const auto& t : doc.at("tips")) {
    Tip tip;
    tip.id = t.at("id").get<std::string>();
    tip.category = t.at("category").get<std::string>();
    tip.title = t.at("title").get<std::string>();
    tip.description = t.at("description").get<std::string>();
    if (!seen_ids.insert(tip.id).second)
      throw std::runtime_error("duplicate tip id " + tip.id);
    if (!category_set.count(tip.category))
      throw std::runtime_error("tip " + tip.id + " has unknown category " + tip.category);
    lib.tips_.push_back(std::move(tip));
  }
  std::sort(lib.tips_.begin(), lib.tips_.end(),
            [](const Tip& a, const Tip& b) { return a.id < b.id; });
  return lib;
}

TipLibrary TipLibrary::from_file(const std::string& path) {
  return from_json_text(read_file(path));
}

const TipLibrary& TipLibrary::builtin() {
  static TipLibrary lib = from_json_text(embedded::kTipsJson);
  return lib;
}

const Tip* TipLibrary::find(const std::string& id) const {
  for (const auto& t : tips_)
    if (t.id == id) return &t;
  return nullptr;
}

RuleSet RuleSet::from_json_text(const std::string& text) {
  json doc = json::parse(text);
  RuleSet set;
  for (const auto& r : doc.at("rules")) {
    RetrievalRule rule;
    rule.id = r.at("id").get<std::string>();
    rule.source = r.at("source").get<std::string>();
    rule.predicate = r.at("predicate");
    for (const auto& e : r.at("emits")) rule.emits.push_back(e.get<std::string>());
    set.rules_.push_back(std::move(rule));
  }
  return set;
}

RuleSet RuleSet::from_file(const std::string& path) {
  return from_json_text(read_file(path));
}

const RuleSet& RuleSet::builtin() {
  static RuleSet set = from_json_text(embedded::kRulesJson);
  return set;
}

void RuleSet::validate_against(const TipLibrary& library) const {
  for (const auto& rule : rules_)
    for (const auto& id : rule.emits)
      if (!library.find(id))
        throw std::runtime_error("rule " + rule.id + " emits unknown tip " + id);
}

bool keyword_match(const std::string& text, const std::string& keyword) {
  std::string kw = keyword;
  bool open_suffix = false;
  if (!kw.empty() && kw.back() == '*') {
    open_suffix = true;
    kw.pop_back();
  }
  return contains_word_ci(text, kw, open_suffix);
}

long count_keyword(const std::string& text, const std::string& keyword) {
  // Counts start-bounded occurrences; suffix continuation allowed so
  // inflected forms ("joins") still count.
  long n = 0;
  for (size_t i = 0; i + keyword.size() <= text.size(); ++i) {
    if (!starts_with_ci(std::string_view(text).substr(i), keyword)) continue;
    bool left_ok = (i == 0) || !(std::isalnum(static_cast<unsigned char>(text[i - 1])) ||
                                 text[i - 1] == '_');
    if (left_ok) ++n;
  }
  return n;
}

namespace {

const std::string& field_text(const MatchInputs& in, const std::string& field,
                              std::string& scratch) {
  if (field == "question") return in.question;
  if (field == "evidence") return in.evidence;
  if (field == "plan") return in.plan_text;
  if (field == "question_or_evidence") {
    scratch = in.question + "\n" + in.evidence;
    return scratch;
  }
  if (field == "schema_columns") {
    scratch.clear();
    for (const auto& c : in.schema_columns) {
      scratch += c;
      scratch += '\n';
    }
    return scratch;
  }
  throw std::runtime_error("unknown predicate field: " + field);
}

bool eval_predicate(const json& node, const MatchInputs& in) {
  if (node.contains("always")) return node.at("always").get<bool>();
  if (node.contains("all_of")) {
    for (const auto& child : node.at("all_of"))
      if (!eval_predicate(child, in)) return false;
    return true;
  }
  if (node.contains("any_of")) {
    for (const auto& child : node.at("any_of"))
      if (eval_predicate(child, in)) return true;
    return false;
  }
  if (node.contains("not")) return !eval_predicate(node.at("not"), in);
  if (node.contains("plan_steps_at_least"))
    return in.plan_step_count >= node.at("plan_steps_at_least").get<int>();
  if (node.contains("plan_mentions_tables_at_least")) {
    int need = node.at("plan_mentions_tables_at_least").get<int>();
    int mentioned = 0;
    for (const auto& t : in.schema_tables)
      if (keyword_match(in.plan_text, t)) ++mentioned;
    return mentioned >= need;
  }

  std::string scratch;
  const std::string& text = field_text(in, node.at("field").get<std::string>(), scratch);
  if (node.contains("contains_any")) {
    for (const auto& kw : node.at("contains_any"))
      if (keyword_match(text, kw.get<std::string>())) return true;
    return false;
  }
  if (node.contains("contains_all")) {
    for (const auto& kw : node.at("contains_all"))
      if (!keyword_match(text, kw.get<std::string>())) return false;
    return true;
  }
  if (node.contains("starts_with_any")) {
    std::string lead = to_lower(trim(text));
    for (const auto& p : node.at("starts_with_any"))
      if (lead.rfind(to_lower(p.get<std::string>()), 0) == 0) return true;
    return false;
  }
  if (node.contains("regex")) {
    std::regex re(node.at("regex").get<std::string>(),
                  std::regex::ECMAScript | std::regex::icase);
    return std::regex_search(text, re);
  }
  if (node.contains("count_at_least")) {
    const json& spec = node.at("count_at_least");
    return count_keyword(text, spec.at("token").get<std::string>()) >=
           spec.at("n").get<long>();
  }
  throw std::runtime_error("unknown predicate node: " + node.dump());
}

}  // namespace

bool RuleSet::rule_matches(const RetrievalRule& rule, const MatchInputs& in) const {
  return eval_predicate(rule.predicate, in);
}

std::vector<std::string> RuleSet::matching_tip_ids(const MatchInputs& in) const {
  std::set<std::string> ids;
  for (const auto& rule : rules_)
    if (rule_matches(rule, in))
      for (const auto& id : rule.emits) ids.insert(id);
  return std::vector<std::string>(ids.begin(), ids.end());
}

std::string RealizedPlan::combined_text() const {
  std::string out = raw_text;
  for (const auto& step : steps) {
    for (const auto& kw : step.keywords) {
      out += '\n';
      out += kw;
    }
  }
  return out;
}

std::optional<RealizedPlan> parse_realized_plan(const std::string& content) {
  RealizedPlan plan;
  plan.raw_text = content;
  std::istringstream in(content);
  std::string line;
  RealizedStep* current = nullptr;
  auto list_items = [](const std::string& payload) {
    std::vector<std::string> items;
    std::string cur;
    for (char c : payload) {
      if (c == ',') {
        std::string item = strip_quotes(trim(cur));
        if (!item.empty()) items.push_back(item);
        cur.clear();
      } else {
        cur += c;
      }
    }
    std::string item = strip_quotes(trim(cur));
    if (!item.empty()) items.push_back(item);
    return items;
  };
  static const std::regex step_re(R"(^\s*(?:\*\*)?Step\s+(\d+)\s*:?\s*(.*))",
                                  std::regex::icase);
  std::smatch m;
  while (std::getline(in, line)) {
    if (std::regex_search(line, m, step_re)) {
      plan.steps.emplace_back();
      current = &plan.steps.back();
      current->description = trim(m[2].str());
      continue;
    }
    if (!current) continue;
    std::string t = trim(line);
    std::string lower = to_lower(t);
    auto payload = [&](size_t label_len) { return trim(t.substr(label_len)); };
    if (lower.rfind("- info need:", 0) == 0) current->info_need = payload(12);
    else if (lower.rfind("info need:", 0) == 0) current->info_need = payload(10);
    else if (lower.rfind("- possible paths:", 0) == 0)
      current->possible_paths = list_items(payload(17));
    else if (lower.rfind("possible paths:", 0) == 0)
      current->possible_paths = list_items(payload(15));
    else if (lower.rfind("- keywords:", 0) == 0) current->keywords = list_items(payload(11));
    else if (lower.rfind("keywords:", 0) == 0) current->keywords = list_items(payload(9));
    else if (lower.rfind("- evidence:", 0) == 0) current->evidence_snippet = payload(11);
    else if (lower.rfind("evidence:", 0) == 0) current->evidence_snippet = payload(9);
  }
  if (plan.steps.empty()) return std::nullopt;
  return plan;
}

RealizedPlan realize_plan(Gateway& gateway, const std::string& question,
                          const std::string& evidence, const SchemaSubset& subset,
                          const std::vector<std::string>& plan_steps) {
  std::string plan_text;
  for (const auto& s : plan_steps) {
    plan_text += s;
    plan_text += '\n';
  }
  ChatRequest request;
  request.tag = "sql_kw";
  request.temperature = 0.0;
  request.messages = {{Role::kUser, prompts::render(prompts::kRealizationPaths,
                                                    {{"question", question},
                                                     {"evidence", evidence},
                                                     {"schema", serialize_for_prompt(subset)},
                                                     {"logical_plan", plan_text}})}};
  auto [parsed, response] = complete_parsed<RealizedPlan>(
      gateway, request, [](const std::string& content) { return parse_realized_plan(content); });
  if (parsed) return *std::move(parsed);

  // Fail-safe: a single step whose keywords are the tokenized question.
  RealizedPlan fallback;
  RealizedStep step;
  step.description = question;
  std::istringstream qs(question);
  std::string token;
  while (qs >> token) step.keywords.push_back(token);
  fallback.steps.push_back(std::move(step));
  fallback.raw_text = question;
  return fallback;
}

std::vector<Tip> retrieve_tips(const TipLibrary& library, const RuleSet& rules,
                               const MatchInputs& inputs) {
  std::vector<Tip> out;
  for (const auto& id : rules.matching_tip_ids(inputs)) {
    const Tip* tip = library.find(id);
    if (tip) out.push_back(*tip);
  }
  std::sort(out.begin(), out.end(), [](const Tip& a, const Tip& b) { return a.id < b.id; });
  return out;
}

std::vector<Tip> retrieve_tips(const TipLibrary& library, const RuleSet& rules,
                               const std::string& question, const std::string& evidence,
                               const RealizedPlan& realized, const SchemaSubset& subset) {
  MatchInputs in;
  in.question = question;
  in.evidence = evidence;
  in.plan_text = realized.combined_text();
  in.plan_step_count = int(realized.steps.size());
  for (const auto& ref : subset.refs()) in.schema_columns.push_back(ref.column);
  for (const auto& t : subset.tables_in_schema_order())
    in.schema_tables.push_back(ColumnRef::normalize(t));
  return retrieve_tips(library, rules, in);
}

std::string render_guidance(const std::vector<Tip>& tips) {
  std::string out;
  for (const auto& tip : tips) {
    if (!out.empty()) out += "\n";
    out += "[" + tip.id + "] " + tip.title + "\n" + tip.description + "\n";
  }
  return out;
}

}  // namespace apexsql
