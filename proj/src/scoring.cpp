#include "apexsql/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>

#include "apexsql/prompts.hpp"

namespace apexsql {

using nlohmann::json;

VoteOutcome vote(const CandidateBundle& bundle, Gateway* gateway,
                 const std::string& question, const std::string& schema_text) {
  VoteOutcome outcome;
  if (bundle.candidates.empty()) {
    outcome.unselectable = true;
    return outcome;
  }
  std::map<std::string, std::vector<int>> groups;  // key -> candidate indices
  for (size_t i = 0; i < bundle.candidates.size(); ++i) {
    const auto& c = bundle.candidates[i];
    if (!c.canonical_key) continue;
    groups[*c.canonical_key].push_back(int(i));
  }
  if (groups.empty()) {
    outcome.selected_index = 0;
    outcome.unselectable = true;
    return outcome;
  }
  size_t best = 0;
  for (const auto& [key, members] : groups) best = std::max(best, members.size());
  std::vector<const std::vector<int>*> top;
  for (const auto& [key, members] : groups)
    if (members.size() == best) top.push_back(&members);
  // Representatives in candidate-index order make the fallback and the
  // tie-breaker prompt deterministic.
  std::sort(top.begin(), top.end(),
            [](const std::vector<int>* a, const std::vector<int>* b) {
              return a->front() < b->front();
            });
  if (top.size() == 1) {
    outcome.selected_index = top.front()->front();
    return outcome;
  }

  outcome.tie_break_used = true;
  outcome.selected_index = top.front()->front();  // fallback
  if (!gateway) return outcome;

  std::string candidates_text;
  std::vector<int> representatives;
  for (const auto* members : top) {
    int idx = members->front();
    representatives.push_back(idx);
    const auto& episode = bundle.candidates[idx].episode;
    candidates_text += "### candidate_" + std::to_string(idx + 1) + ".sql\n";
    candidates_text += "Votes for this result: " + std::to_string(members->size()) + "\n";
    candidates_text += "Exploration rounds: " + std::to_string(episode.rounds) + "\n";
    candidates_text += "SQL:\n```sql\n" + episode.final_sql.value_or("") + "\n```\n\n";
  }
  ChatRequest request;
  request.tag = "answer_selection";
  request.messages = {{Role::kUser, prompts::render(prompts::kAnswerSelection,
                                                    {{"schema", schema_text},
                                                     {"question", question},
                                                     {"candidates", candidates_text}})}};
  try {
    ChatResponse response = gateway->complete(request);
    static const std::regex pick_re(R"(candidate_(\d+)\.sql)", std::regex::icase);
    std::smatch m;
    if (std::regex_search(response.content, m, pick_re)) {
      int picked = std::stoi(m[1].str()) - 1;
      for (int rep : representatives) {
        if (rep == picked) {
          outcome.selected_index = picked;
          return outcome;
        }
      }
    }
  } catch (const GatewayError&) {
    // fall through to the lowest-index representative
  }
  return outcome;
}

LinkingExample score_linking(const std::set<ColumnRef>& pred,
                             const std::set<ColumnRef>& gold) {
  if (gold.empty()) throw std::invalid_argument("gold column set must be non-empty");
  LinkingExample out;
  long hit = 0;
  for (const auto& g : gold)
    if (pred.count(g)) ++hit;
  out.recall = double(hit) / double(gold.size());
  out.precision = pred.empty() ? 0.0 : double(hit) / double(pred.size());
  out.f1 = (out.recall + out.precision) == 0.0
               ? 0.0
               : 2.0 * out.recall * out.precision / (out.recall + out.precision);
  out.covered = out.recall == 1.0;
  out.retained_count = long(pred.size());
  return out;
}

LinkingExample score_linking(const SchemaSubset& pred, const std::set<ColumnRef>& gold) {
  std::set<ColumnRef> normalized_gold;
  for (const auto& g : gold) normalized_gold.insert(ColumnRef::make(g.table, g.column));
  return score_linking(pred.refs(), normalized_gold);
}

LinkingAggregate aggregate_linking(const std::vector<LinkingExample>& examples) {
  LinkingAggregate agg;
  agg.n = long(examples.size());
  if (examples.empty()) return agg;
  for (const auto& e : examples) {
    agg.srr += e.covered ? 1.0 : 0.0;
    agg.nsr += e.recall;
    agg.nsp += e.precision;
    agg.nsf += e.f1;
    agg.c_bar += double(e.retained_count);
  }
  agg.srr /= double(agg.n);
  agg.nsr /= double(agg.n);
  agg.nsp /= double(agg.n);
  agg.nsf /= double(agg.n);
  agg.c_bar /= double(agg.n);
  return agg;
}

GenerationScore score_generation(const std::vector<CandidateBundle>& bundles,
                                 const std::vector<std::optional<ResultSet>>& golds,
                                 const std::vector<int>& voted_indices,
                                 CompareMode mode) {
  if (bundles.size() != golds.size() || bundles.size() != voted_indices.size())
    throw std::invalid_argument("one gold and one voted index per bundle required");
  GenerationScore score;
  long episodes = 0;
  double rounds_sum = 0.0, queries_sum = 0.0;
  for (size_t i = 0; i < bundles.size(); ++i) {
    GenerationExample ex;
    const auto& bundle = bundles[i];
    for (const auto& c : bundle.candidates) {
      ex.rounds.push_back(c.episode.rounds);
      ex.query_counts.push_back(c.episode.query_count);
      rounds_sum += c.episode.rounds;
      queries_sum += c.episode.query_count;
      ++episodes;
    }
    if (!golds[i]) {
      ex.gold_failed = true;
      ex.note = "gold SQL failed to execute";
      score.examples.push_back(std::move(ex));
      continue;
    }
    const ResultSet& gold = *golds[i];
    std::vector<bool> correct;
    for (const auto& c : bundle.candidates)
      correct.push_back(c.episode.final_result &&
                        compare_results(*c.episode.final_result, gold, mode));
    int voted = voted_indices[i];
    ex.ex = voted >= 0 && voted < int(correct.size()) && correct[voted];
    ex.pass_at_k = std::any_of(correct.begin(), correct.end(), [](bool b) { return b; });
    long hits = std::count(correct.begin(), correct.end(), true);
    ex.ex_at_k = correct.empty() ? 0.0 : double(hits) / double(correct.size());
    score.examples.push_back(std::move(ex));
  }
  for (const auto& e : score.examples) {
    if (e.gold_failed) continue;
    score.ex += e.ex ? 1.0 : 0.0;
    score.pass_at_k += e.pass_at_k ? 1.0 : 0.0;
    score.ex_at_k += e.ex_at_k;
    ++score.scored_n;
  }
  if (score.scored_n > 0) {
    score.ex /= double(score.scored_n);
    score.pass_at_k /= double(score.scored_n);
    score.ex_at_k /= double(score.scored_n);
  }
  if (episodes > 0) {
    score.r_bar = rounds_sum / double(episodes);
    score.q_bar = queries_sum / double(episodes);
  }
  return score;
}

// --- gold-column extraction ------------------------------------------------

namespace {

struct SqlToken {
  enum class Kind { kIdent, kQuotedIdent, kString, kNumber, kPunct, kStar };
  Kind kind;
  std::string text;  // identifiers normalized to lowercase
};

std::vector<SqlToken> tokenize_sql(const std::string& sql) {
  std::vector<SqlToken> tokens;
  size_t i = 0;
  auto push = [&](SqlToken::Kind k, std::string t) {
    tokens.push_back(SqlToken{k, std::move(t)});
  };
  while (i < sql.size()) {
    char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
    if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
      while (i < sql.size() && sql[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < sql.size() && sql[i + 1] == '*') {
      size_t close = sql.find("*/", i + 2);
      i = close == std::string::npos ? sql.size() : close + 2;
      continue;
    }
    if (c == '\'') {
      std::string text;
      ++i;
      while (i < sql.size()) {
        if (sql[i] == '\'' && i + 1 < sql.size() && sql[i + 1] == '\'') {
          text += '\'';
          i += 2;
          continue;
        }
        if (sql[i] == '\'') { ++i; break; }
        text += sql[i++];
      }
      push(SqlToken::Kind::kString, text);
      continue;
    }
    if (c == '"' || c == '`' || c == '[') {
      char closer = c == '[' ? ']' : c;
      std::string text;
      ++i;
      while (i < sql.size() && sql[i] != closer) text += sql[i++];
      if (i < sql.size()) ++i;
      push(SqlToken::Kind::kQuotedIdent, to_lower(text));
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string text;
      while (i < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[i])) ||
                                sql[i] == '.' || sql[i] == '_'))
        text += sql[i++];
      push(SqlToken::Kind::kNumber, text);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string text;
      while (i < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[i])) ||
                                sql[i] == '_'))
        text += sql[i++];
      push(SqlToken::Kind::kIdent, to_lower(text));
      continue;
    }
    if (c == '*') { push(SqlToken::Kind::kStar, "*"); ++i; continue; }
    push(SqlToken::Kind::kPunct, std::string(1, c));
    ++i;
  }
  return tokens;
}

const std::set<std::string>& sql_keywords() {
  static const std::set<std::string> kw = {
      "select", "from", "where", "join", "on", "as", "and", "or", "not", "in",
      "is", "null", "group", "by", "order", "having", "limit", "offset",
      "distinct", "case", "when", "then", "else", "end", "inner", "left",
      "right", "outer", "full", "cross", "union", "all", "except", "intersect",
      "with", "asc", "desc", "between", "like", "exists", "cast", "over",
      "partition", "values", "using", "natural", "glob", "collate", "escape",
      "true", "false", "real", "integer", "int", "text", "blob", "numeric"};
  return kw;
}

bool is_ident(const SqlToken& t) {
  return t.kind == SqlToken::Kind::kIdent || t.kind == SqlToken::Kind::kQuotedIdent;
}

bool is_keyword(const SqlToken& t) {
  return t.kind == SqlToken::Kind::kIdent && sql_keywords().count(t.text) > 0;
}

bool is_punct(const SqlToken& t, const char* p) {
  return t.kind == SqlToken::Kind::kPunct && t.text == p;
}

}  // namespace

GoldExtraction extract_gold_columns(const std::string& golden_sql,
                                    const DatabaseSchema& schema) {
  GoldExtraction out;
  auto tokens = tokenize_sql(golden_sql);
  auto at = [&](size_t i) -> const SqlToken* {
    return i < tokens.size() ? &tokens[i] : nullptr;
  };

  // CTE names shadow schema tables.
  std::set<std::string> cte_names;
  for (size_t i = 0; i < tokens.size(); ++i) {
    bool with_here = tokens[i].kind == SqlToken::Kind::kIdent && tokens[i].text == "with";
    bool comma_sep = is_punct(tokens[i], ",") && !cte_names.empty();
    if (!with_here && !comma_sep) continue;
    const SqlToken* name = at(i + 1);
    if (!name || !is_ident(*name) || is_keyword(*name)) continue;
    // require ... AS ( to follow (optionally after a column list)
    size_t j = i + 2;
    if (at(j) && is_punct(*at(j), "(")) {
      int depth = 1;
      ++j;
      while (at(j) && depth > 0) {
        if (is_punct(*at(j), "(")) ++depth;
        if (is_punct(*at(j), ")")) --depth;
        ++j;
      }
    }
    if (at(j) && at(j)->kind == SqlToken::Kind::kIdent && at(j)->text == "as" &&
        at(j + 1) && is_punct(*at(j + 1), "("))
      cte_names.insert(name->text);
  }

  // Table sources and aliases from FROM/JOIN clauses (all nesting levels).
  std::map<std::string, std::string> alias_to_table;  // alias -> schema table
  std::set<std::string> derived_aliases;
  std::set<std::string> referenced_tables;
  for (size_t i = 0; i < tokens.size(); ++i) {
    bool from_here = tokens[i].kind == SqlToken::Kind::kIdent &&
                     (tokens[i].text == "from" || tokens[i].text == "join");
    if (!from_here) continue;
    size_t j = i + 1;
    bool continue_list = tokens[i].text == "from";
    for (;;) {
      const SqlToken* t = at(j);
      if (!t) break;
      if (is_punct(*t, "(")) {
        // Derived table: skip the body, then record its alias as virtual.
        int depth = 1;
        ++j;
        while (at(j) && depth > 0) {
          if (is_punct(*at(j), "(")) ++depth;
          if (is_punct(*at(j), ")")) --depth;
          ++j;
        }
        const SqlToken* maybe_as = at(j);
        if (maybe_as && maybe_as->kind == SqlToken::Kind::kIdent && maybe_as->text == "as")
          ++j, maybe_as = at(j);
        if (maybe_as && is_ident(*maybe_as) && !is_keyword(*maybe_as)) {
          derived_aliases.insert(maybe_as->text);
          ++j;
        }
      } else if (is_ident(*t) && !is_keyword(*t)) {
        std::string table = t->text;
        ++j;
        // schema-qualified name: keep the last component
        while (at(j) && is_punct(*at(j), ".") && at(j + 1) && is_ident(*at(j + 1))) {
          table = at(j + 1)->text;
          j += 2;
        }
        std::string alias = table;
        const SqlToken* next = at(j);
        if (next && next->kind == SqlToken::Kind::kIdent && next->text == "as") {
          ++j;
          next = at(j);
        }
        if (next && is_ident(*next) && !is_keyword(*next)) {
          alias = next->text;
          ++j;
        }
        if (cte_names.count(table)) {
          derived_aliases.insert(alias);
          derived_aliases.insert(table);
        } else if (schema.find_table(table)) {
          referenced_tables.insert(table);
          alias_to_table[alias] = table;
          alias_to_table[table] = table;
        } else {
          out.flags.push_back("unknown table '" + table + "'");
        }
      } else {
        break;
      }
      if (continue_list && at(j) && is_punct(*at(j), ",")) {
        ++j;
        continue;
      }
      break;
    }
  }

  auto add_ref = [&](const std::string& table, const std::string& column) {
    const Table* t = schema.find_table(table);
    if (!t) return;
    if (!t->find_column(column)) {
      out.flags.push_back("unresolvable column '" + table + "." + column + "'");
      return;
    }
    out.refs.insert(ColumnRef::make(table, column));
  };
  auto expand_star = [&](const std::string& table) {
    const Table* t = schema.find_table(table);
    if (!t) return;
    for (const auto& c : t->columns) out.refs.insert(ColumnRef::make(table, c.name));
  };

  // Qualified refs, stars, then unqualified idents.
  std::set<size_t> consumed;  // token indices already handled as qualified refs
  for (size_t i = 0; i < tokens.size(); ++i) {
    const SqlToken* t = at(i);
    if (!t || !is_ident(*t)) continue;
    const SqlToken* dot = at(i + 1);
    const SqlToken* member = at(i + 2);
    if (!dot || !is_punct(*dot, ".") || !member) continue;
    std::string qualifier = t->text;
    consumed.insert(i);
    consumed.insert(i + 2);
    if (derived_aliases.count(qualifier) || cte_names.count(qualifier))
      continue;  // inner columns were collected from the subquery body
    auto it = alias_to_table.find(qualifier);
    if (it == alias_to_table.end()) {
      out.flags.push_back("unknown qualifier '" + qualifier + "'");
      continue;
    }
    if (member->kind == SqlToken::Kind::kStar) expand_star(it->second);
    else if (is_ident(*member)) add_ref(it->second, member->text);
  }

  for (size_t i = 0; i < tokens.size(); ++i) {
    const SqlToken* t = at(i);
    if (t->kind == SqlToken::Kind::kStar) {
      // Bare star: expand every table in scope; flag when that is more
      // than one table.
      const SqlToken* prev = at(i - 1);
      if (prev && is_punct(*prev, ".")) continue;  // handled above
      if (prev && is_punct(*prev, "(")) continue;  // COUNT(*) and friends
      if (referenced_tables.size() > 1)
        out.flags.push_back("bare * with multiple tables in scope");
      for (const auto& table : referenced_tables) expand_star(table);
      continue;
    }
    if (!is_ident(*t) || is_keyword(*t) || consumed.count(i)) continue;
    const SqlToken* prev = at(i - 1);
    const SqlToken* next = at(i + 1);
    if (prev && is_punct(*prev, ".")) continue;          // member of qualified ref
    if (next && is_punct(*next, "(")) continue;          // function call
    if (next && is_punct(*next, ".")) continue;          // qualifier
    if (prev && prev->kind == SqlToken::Kind::kIdent && prev->text == "as") continue;
    if (alias_to_table.count(t->text) || derived_aliases.count(t->text) ||
        cte_names.count(t->text))
      continue;  // table name or alias standing alone
    std::vector<std::string> owners;
    for (const auto& table : referenced_tables) {
      const Table* tab = schema.find_table(table);
      if (tab && tab->find_column(t->text)) owners.push_back(table);
    }
    if (owners.empty()) continue;  // output alias or free text
    if (owners.size() > 1)
      out.flags.push_back("ambiguous column '" + t->text + "' matches " +
                          std::to_string(owners.size()) + " tables");
    for (const auto& table : owners) add_ref(table, t->text);
  }
  return out;
}

}  // namespace apexsql
