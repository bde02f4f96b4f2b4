#pragma once

#include <optional>
#include <string>
#include <vector>

#include "apexsql/gateway.hpp"
#include "apexsql/schema.hpp"
#include "json.hpp"

namespace apexsql {

struct Tip {
  std::string id;
  std::string category;
  std::string title;
  std::string description;
};

class TipLibrary {
 public:
  static TipLibrary from_json_text(const std::string& text);
  static TipLibrary from_file(const std::string& path);
  static const TipLibrary& builtin();

  const std::vector<Tip>& tips() const { return tips_; }
  const Tip* find(const std::string& id) const;
  const std::vector<std::string>& categories() const { return categories_; }

 private:
  std::vector<Tip> tips_;
  std::vector<std::string> categories_;
};

// Everything the retrieval rules can test. Plan text covers the realized
// plan body plus its keywords; schema names come from D* per Eq-style
// conditioning on the linked subset.
struct MatchInputs {
  std::string question;
  std::string evidence;
  std::string plan_text;
  int plan_step_count = 0;
  std::vector<std::string> schema_columns;
  std::vector<std::string> schema_tables;
};

struct RetrievalRule {
  std::string id;
  std::string source;  // universal | evidence | question | plan | schema
  nlohmann::json predicate;
  std::vector<std::string> emits;
};

class RuleSet {
 public:
  static RuleSet from_json_text(const std::string& text);
  static RuleSet from_file(const std::string& path);
  static const RuleSet& builtin();

  // Throws on rules that emit unknown tip ids.
  void validate_against(const TipLibrary& library) const;
  const std::vector<RetrievalRule>& rules() const { return rules_; }

  bool rule_matches(const RetrievalRule& rule, const MatchInputs& in) const;
  std::vector<std::string> matching_tip_ids(const MatchInputs& in) const;

 private:
  std::vector<RetrievalRule> rules_;
};

// Keyword containment used by the rule engine: case-insensitive, word
// boundary at the match start; a trailing '*' on the keyword frees the end
// boundary, otherwise the end is bounded too.
bool keyword_match(const std::string& text, const std::string& keyword);
long count_keyword(const std::string& text, const std::string& keyword);

struct RealizedStep {
  std::string description;
  std::string info_need;
  std::vector<std::string> possible_paths;
  std::vector<std::string> keywords;
  std::string evidence_snippet;
};

struct RealizedPlan {
  std::vector<RealizedStep> steps;
  std::string raw_text;

  std::string combined_text() const;  // raw text + keywords, lowercased input to rules
};

struct LogicalPlan;  // linking.hpp

// One gateway call mapping logical steps to candidate SQL realizations;
// unparseable output degrades to a single step whose keywords are the
// whitespace-tokenized question.
RealizedPlan realize_plan(Gateway& gateway, const std::string& question,
                          const std::string& evidence, const SchemaSubset& subset,
                          const std::vector<std::string>& plan_steps);

// Parses the "Step N:" structure; exposed for testing.
std::optional<RealizedPlan> parse_realized_plan(const std::string& content);

std::vector<Tip> retrieve_tips(const TipLibrary& library, const RuleSet& rules,
                               const std::string& question, const std::string& evidence,
                               const RealizedPlan& realized, const SchemaSubset& subset);

std::vector<Tip> retrieve_tips(const TipLibrary& library, const RuleSet& rules,
                               const MatchInputs& inputs);

std::string render_guidance(const std::vector<Tip>& tips);

}  // namespace apexsql
