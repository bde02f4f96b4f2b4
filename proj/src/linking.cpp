#include "apexsql/linking.hpp"

#include <algorithm>
#include <atomic>
#include <future>
#include <sstream>

#include "apexsql/prompts.hpp"

namespace apexsql {

using nlohmann::json;

std::string LogicalPlan::text() const {
  std::string out;
  for (const auto& s : steps) {
    out += s;
    out += '\n';
  }
  return out;
}

SchemaLinker::SchemaLinker(Gateway& gateway, const DatabaseSchema& schema,
                           const std::string& db_path, LinkConfig config)
    : gateway_(gateway), schema_(schema), db_path_(db_path), config_(std::move(config)) {}

std::vector<LogicalPlan> SchemaLinker::generate_plans(const std::string& question,
                                                      const std::string& evidence) {
  (void)evidence;  // planning conditions on the question alone
  std::vector<LogicalPlan> plans;
  std::string prompt = prompts::render(prompts::kLogicalPlan, {{"question", question}});
  for (int i = 0; i < std::max(1, config_.plan_samples); ++i) {
    ChatRequest request;
    request.tag = "sl_plan";
    request.temperature = config_.plan_temperature;
    request.messages = {{Role::kUser, prompt}};
    auto [parsed, response] = complete_parsed<std::vector<std::string>>(
        gateway_, request, [](const std::string& content) -> std::optional<std::vector<std::string>> {
          auto obj = extract_json_object(content);
          if (!obj || !obj->contains("logical_steps")) return std::nullopt;
          std::vector<std::string> steps;
          for (const auto& s : obj->at("logical_steps"))
            if (s.is_string()) steps.push_back(s.get<std::string>());
          if (steps.empty()) return std::nullopt;
          return steps;
        });
    LogicalPlan plan;
    plan.source = LogicalPlan::Source::kCandidate;
    plan.candidate_index = i;
    if (parsed) {
      plan.steps = *parsed;
    } else {
      plan.steps = {"Answer: " + question};
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

LogicalPlan SchemaLinker::aggregate_plans(const std::string& question,
                                          const std::vector<LogicalPlan>& candidates) {
  std::string plans_text;
  for (size_t i = 0; i < candidates.size(); ++i) {
    plans_text += "Draft plan " + std::to_string(i + 1) + ":\n";
    plans_text += candidates[i].text();
    plans_text += "\n";
  }
  ChatRequest request;
  request.tag = "sl_agg";
  request.temperature = config_.aggregate_temperature;
  request.messages = {{Role::kUser, prompts::render(prompts::kAggregatePlans,
                                                    {{"count", std::to_string(candidates.size())},
                                                     {"question", question},
                                                     {"plans", plans_text}})}};
  auto [parsed, response] = complete_parsed<std::vector<std::string>>(
      gateway_, request, [](const std::string& content) -> std::optional<std::vector<std::string>> {
        // Master plan arrives as a numbered list.
        std::vector<std::string> steps;
        std::istringstream in(content);
        std::string line;
        while (std::getline(in, line)) {
          std::string t = trim(line);
          if (t.empty()) continue;
          bool numbered = std::isdigit(static_cast<unsigned char>(t[0])) ||
                          t.rfind("- ", 0) == 0 || t.rfind("* ", 0) == 0;
          if (numbered) steps.push_back(t);
        }
        if (steps.empty()) return std::nullopt;
        return steps;
      });
  LogicalPlan master;
  master.source = LogicalPlan::Source::kMaster;
  if (parsed) master.steps = *parsed;
  else if (!candidates.empty()) master.steps = candidates.front().steps;
  else master.steps = {"Answer: " + question};
  return master;
}

namespace {

std::string batch_schema_text(const DatabaseSchema& schema, const SchemaBatch& batch) {
  std::string out;
  for (const auto& entry : batch.entries) {
    if (!out.empty()) out += "\n";
    out += serialize_table(schema.tables()[entry.table_index], SerializeStyle::kFull,
                           entry.member_names);
  }
  return out;
}

// Expands "table" / (table, columns) instructions against a batch. Merged
// entries expand per member table name; whole-table mentions expand to all
// of that table's columns. Refs outside the batch are dropped with a
// warning.
void expand_into_set(const DatabaseSchema& schema, const SchemaBatch& batch,
                     const json& tables_list, const json& columns_list,
                     std::set<ColumnRef>* out, std::vector<std::string>* warnings) {
  std::set<std::string> batch_tables;  // normalized member names
  std::map<std::string, size_t> rep_of;
  for (const auto& entry : batch.entries) {
    for (const auto& member : entry.member_names) {
      std::string norm = ColumnRef::normalize(member);
      batch_tables.insert(norm);
      rep_of[norm] = entry.table_index;
    }
  }
  auto add_whole_table = [&](const std::string& raw) {
    std::string norm = ColumnRef::normalize(raw);
    auto it = rep_of.find(norm);
    if (it == rep_of.end()) {
      warnings->push_back("table '" + raw + "' not in batch");
      return;
    }
    for (const auto& c : schema.tables()[it->second].columns)
      out->insert(ColumnRef{norm, ColumnRef::normalize(c.name)});
  };
  if (tables_list.is_array())
    for (const auto& t : tables_list)
      if (t.is_string()) add_whole_table(t.get<std::string>());
  if (columns_list.is_array()) {
    for (const auto& item : columns_list) {
      if (!item.is_object()) continue;
      std::string table = item.value("table", "");
      std::string norm = ColumnRef::normalize(table);
      auto it = rep_of.find(norm);
      if (it == rep_of.end()) {
        warnings->push_back("table '" + table + "' not in batch");
        continue;
      }
      const Table& rep = schema.tables()[it->second];
      if (!item.contains("columns")) continue;
      for (const auto& c : item.at("columns")) {
        if (!c.is_string()) continue;
        std::string col = c.get<std::string>();
        if (!rep.find_column(col)) {
          warnings->push_back("column '" + table + "." + col + "' not in batch");
          continue;
        }
        out->insert(ColumnRef{norm, ColumnRef::normalize(col)});
      }
    }
  }
}

}  // namespace

PruneDecision SchemaLinker::prune_batch(const std::string& question,
                                        const std::string& evidence,
                                        const LogicalPlan& plan, const SchemaBatch& batch,
                                        int batch_id, CallScope* scope) {
  PruneDecision decision;
  decision.batch_id = batch_id;
  std::string schema_text = batch_schema_text(schema_, batch);
  std::map<std::string, std::string> slots = {{"question", question},
                                              {"logical_plan", plan.text()},
                                              {"schema", schema_text},
                                              {"evidence", evidence}};

  // Deletion pass; garbage output leaves the batch fully preserved.
  {
    ChatRequest request;
    request.tag = "sl_del";
    request.messages = {{Role::kUser, prompts::render(prompts::kDeletionPass, slots)}};
    auto [parsed, response] = complete_parsed<json>(
        gateway_, request,
        [](const std::string& content) { return extract_json_object(content); },
        2, scope);
    if (parsed)
      expand_into_set(schema_, batch, parsed->value("obviously_irrelevant_tables", json()),
                      parsed->value("obviously_irrelevant_columns", json()),
                      &decision.deletion_set, &decision.warnings);
  }
  // Selection pass; garbage output selects nothing (fusion keeps the rest).
  {
    ChatRequest request;
    request.tag = "sl_sel";
    request.messages = {{Role::kUser, prompts::render(prompts::kSelectionPass, slots)}};
    auto [parsed, response] = complete_parsed<json>(
        gateway_, request,
        [](const std::string& content) { return extract_json_object(content); },
        2, scope);
    if (parsed)
      expand_into_set(schema_, batch, parsed->value("relevant_tables", json()),
                      parsed->value("relevant_columns", json()),
                      &decision.preservation_set, &decision.warnings);
  }
  return decision;
}

std::set<ColumnRef> fuse_rule(const std::set<ColumnRef>& batch_columns,
                              const std::set<ColumnRef>& deletion,
                              const std::set<ColumnRef>& preservation) {
  std::set<ColumnRef> result;
  for (const auto& ref : batch_columns)
    if (!deletion.count(ref)) result.insert(ref);
  for (const auto& ref : preservation)
    if (batch_columns.count(ref)) result.insert(ref);
  return result;
}

std::set<ColumnRef> batch_column_set(const DatabaseSchema& schema, const SchemaBatch& batch) {
  std::set<ColumnRef> out;
  for (const auto& entry : batch.entries) {
    const Table& rep = schema.tables()[entry.table_index];
    for (const auto& member : entry.member_names) {
      std::string norm = ColumnRef::normalize(member);
      for (const auto& c : rep.columns)
        out.insert(ColumnRef{norm, ColumnRef::normalize(c.name)});
    }
  }
  return out;
}

SchemaSubset SchemaLinker::fuse_pruned(const std::vector<SchemaBatch>& batches,
                                       const std::vector<PruneDecision>& decisions) const {
  if (batches.size() != decisions.size())
    throw std::invalid_argument("one decision per batch required");
  SchemaSubset pruned(&schema_);
  for (size_t i = 0; i < batches.size(); ++i) {
    auto columns = batch_column_set(schema_, batches[i]);
    for (const auto& ref :
         fuse_rule(columns, decisions[i].deletion_set, decisions[i].preservation_set))
      pruned.add(ref);
  }
  return pruned;
}

RoleAnalysis SchemaLinker::semantic_link(const std::string& question,
                                         const std::string& evidence,
                                         const LogicalPlan& plan,
                                         const SchemaSubset& pruned) {
  ChatRequest request;
  request.tag = "sl_semantics";
  request.messages = {
      {Role::kUser, prompts::render(prompts::kSemanticLinking,
                                    {{"critical_rules", config_.critical_rules},
                                     {"question", question},
                                     {"logical_plan", plan.text()},
                                     {"evidence", evidence},
                                     {"schema", serialize_for_prompt(pruned)}})}};
  auto [parsed, response] = complete_parsed<json>(
      gateway_, request, [](const std::string& content) { return extract_json_object(content); });
  RoleAnalysis roles;
  std::set<std::string> pruned_tables;
  for (const auto& t : pruned.tables_in_schema_order())
    pruned_tables.insert(ColumnRef::normalize(t));
  if (!parsed) {
    // Unguided exploration: every table proceeds with an unknown role.
    for (const auto& t : pruned_tables) roles.table_roles[t] = "unknown";
    return roles;
  }
  roles.database_structure = parsed->value("database_structure", "");
  roles.content_analysis = parsed->value("query_specific_content_analysis", "");
  if (parsed->contains("table_functions") && parsed->at("table_functions").is_object()) {
    for (const auto& [table, role] : parsed->at("table_functions").items()) {
      std::string norm = ColumnRef::normalize(table);
      if (!pruned_tables.count(norm)) continue;  // dropped with warning downstream
      roles.table_roles[norm] = role.is_string() ? role.get<std::string>() : role.dump();
    }
  }
  for (const auto& t : pruned_tables)
    if (!roles.table_roles.count(t)) roles.table_roles[t] = "unknown";
  return roles;
}

TableObservation SchemaLinker::profile_table(const std::string& question,
                                             const std::string& evidence,
                                             const std::string& table,
                                             const SchemaSubset& pruned,
                                             const std::string& role, CallScope* scope) {
  TableObservation obs;
  obs.table = ColumnRef::normalize(table);
  const Table* full = schema_.find_table(table);
  if (!full) return obs;

  Table restricted;
  restricted.name = full->name;
  for (const Column* c : pruned.columns_of(table)) restricted.columns.push_back(*c);

  std::string table_block = serialize_table(restricted, SerializeStyle::kFull);
  ChatRequest explore;
  explore.tag = "sl_profile_explore";
  explore.messages = {
      {Role::kUser, prompts::render(prompts::kTableExploration,
                                    {{"critical_rules", config_.critical_rules},
                                     {"table_name", full->name},
                                     {"table_block", table_block},
                                     {"question", question},
                                     {"semantic_role", role},
                                     {"evidence", evidence}})}};
  auto [statements, explore_response] = complete_parsed<std::vector<std::string>>(
      gateway_, explore,
      [](const std::string& content) -> std::optional<std::vector<std::string>> {
        auto stmts = extract_sql_statements(content);
        if (stmts.empty()) return std::nullopt;
        return stmts;
      },
      2, scope);

  std::string observation_log;
  if (statements) {
    // Hard cap regardless of how many the model emitted.
    if (long(statements->size()) > config_.profile_query_cap)
      statements->resize(config_.profile_query_cap);
    Database db = Database::open_read_only(db_path_);
    ExecOptions opts;
    opts.timeout_seconds = config_.exec_timeout_seconds;
    for (const auto& sql : *statements) {
      ExecOutcome outcome = db.execute(sql, ExecMode::kReadOnly, opts);
      std::string text = render_outcome(outcome);
      obs.executed_queries.push_back(ExecutedQuery{sql, text});
      observation_log += "Query: " + sql + "\nResult: " + text + "\n\n";
    }
  } else {
    observation_log = "(no exploration queries were executed; judge from the schema alone)";
  }

  ChatRequest verdict;
  verdict.tag = "sl_profile_verdict";
  verdict.messages = {{Role::kUser, prompts::render(prompts::kTableVerdict,
                                                    {{"table_name", full->name},
                                                     {"observations", observation_log},
                                                     {"question", question},
                                                     {"evidence", evidence}})}};
  auto [parsed, verdict_response] = complete_parsed<json>(
      gateway_, verdict,
      [](const std::string& content) { return extract_json_object(content); }, 2, scope);
  if (!parsed) {
    // Preservation bias: keep the whole pruned column set of this table.
    obs.relevant = true;
    for (const Column* c : pruned.columns_of(table))
      obs.relevant_columns.push_back(
          RelevantColumn{c->name, "verdict unparseable; retained for recall", ""});
    obs.table_summary = "retained by fail-safe";
    return obs;
  }
  obs.relevant = parsed->value("relevant", false);
  obs.table_summary = parsed->value("table_summary", "");
  if (parsed->contains("relevant_columns") && parsed->at("relevant_columns").is_array()) {
    for (const auto& c : parsed->at("relevant_columns")) {
      if (!c.is_object()) continue;
      RelevantColumn rc;
      rc.column = c.value("column_name", c.value("column", ""));
      rc.reason = c.value("relevance_reason", "");
      rc.observations = c.value("observations", "");
      if (!rc.column.empty() && restricted.find_column(rc.column))
        obs.relevant_columns.push_back(std::move(rc));
    }
  }
  if (obs.relevant && obs.relevant_columns.empty() && obs.table_summary.empty())
    obs.table_summary = "marked relevant without column detail";
  return obs;
}

json SchemaLinker::run_exploration_batch(const std::vector<std::string>& statements,
                                         std::vector<ExecutedQuery>* log, CallScope* scope) {
  (void)scope;
  json results = json::array();
  Database db = Database::open_read_only(db_path_);
  ExecOptions opts;
  opts.timeout_seconds = config_.exec_timeout_seconds;
  for (const auto& sql : statements) {
    ExecOutcome outcome = db.execute(sql, ExecMode::kReadOnly, opts);
    std::string text = render_outcome(outcome);
    if (log) log->push_back(ExecutedQuery{sql, text});
    results.push_back({{"sql", sql}, {"result", text}});
  }
  return results;
}

SchemaSubset SchemaLinker::global_synthesis(
    const std::string& question, const std::string& evidence, const RoleAnalysis& roles,
    const std::vector<TableObservation>& observations, const SchemaSubset& pruned,
    int* rounds_out, std::vector<std::pair<ColumnRef, std::string>>* rejected_out) {
  // Per-table status blocks presented to the synthesis template.
  std::string schema_status;
  std::map<std::string, const TableObservation*> obs_by_table;
  for (const auto& o : observations) obs_by_table[o.table] = &o;
  for (const auto& name : pruned.tables_in_schema_order()) {
    std::string norm = ColumnRef::normalize(name);
    const TableObservation* o =
        obs_by_table.count(norm) ? obs_by_table.at(norm) : nullptr;
    schema_status += "Table: " + name + " ";
    schema_status += (o && o->relevant) ? "[MARKED RELEVANT]" : "[MARKED IRRELEVANT]";
    schema_status += "\nColumns:\n";
    for (const Column* c : pruned.columns_of(name)) {
      schema_status += "  " + c->name;
      if (!c->data_type.empty()) schema_status += " (" + c->data_type + ")";
      if (!c->description.empty()) schema_status += ": " + c->description;
      schema_status += "\n";
    }
    if (o) {
      std::string obs_text;
      for (const auto& rc : o->relevant_columns) {
        if (!obs_text.empty()) obs_text += "; ";
        obs_text += rc.column;
        if (!rc.observations.empty()) obs_text += ": " + rc.observations;
      }
      if (!obs_text.empty()) schema_status += "Observations: " + obs_text + "\n";
      if (!o->table_summary.empty()) schema_status += "Reason: " + o->table_summary + "\n";
    }
    schema_status += "\n";
  }

  std::string db_summary = roles.database_structure;
  if (!roles.content_analysis.empty()) db_summary += "\n" + roles.content_analysis;

  // Columns profiling marked relevant; silently dropping one of these
  // without an explicit rejection re-adds it afterwards.
  std::set<ColumnRef> profiling_relevant;
  for (const auto& o : observations) {
    if (!o.relevant) continue;
    for (const auto& rc : o.relevant_columns) {
      ColumnRef ref = ColumnRef::make(o.table, rc.column);
      if (pruned.contains(ref)) profiling_relevant.insert(ref);
    }
  }

  std::optional<json> latest_refined;
  std::vector<std::pair<ColumnRef, std::string>> rejected;
  std::string round_feedback;
  int round = 0;
  for (round = 1; round <= config_.max_refine_rounds; ++round) {
    ChatRequest request;
    request.tag = "sl_final";
    request.messages = {
        {Role::kUser,
         prompts::render(prompts::kGlobalSynthesis,
                         {{"question", question},
                          {"evidence", evidence},
                          {"db_summary", db_summary},
                          {"schema_status", schema_status},
                          {"max_rounds", std::to_string(config_.max_refine_rounds)},
                          {"round_feedback", round_feedback}})}};
    auto [parsed, response] = complete_parsed<json>(
        gateway_, request,
        [](const std::string& content) { return extract_json_object(content); });
    if (!parsed) break;

    if (parsed->contains("refined_schema") && parsed->at("refined_schema").is_object())
      latest_refined = parsed->at("refined_schema");
    rejected.clear();
    if (parsed->contains("rejected_candidates") &&
        parsed->at("rejected_candidates").is_array()) {
      for (const auto& r : parsed->at("rejected_candidates")) {
        if (!r.is_object()) continue;
        rejected.emplace_back(ColumnRef::make(r.value("table", ""), r.value("column", "")),
                              r.value("reject_reason", ""));
      }
    }
    std::string status = parsed->value("status", "");
    bool confirmed = status.find("CONFIRM") != std::string::npos;
    std::vector<std::string> queries;
    if (parsed->contains("exploration_queries") &&
        parsed->at("exploration_queries").is_array())
      for (const auto& q : parsed->at("exploration_queries"))
        if (q.is_string()) queries.push_back(q.get<std::string>());
    if (confirmed || queries.empty()) break;
    if (round == config_.max_refine_rounds) break;  // force-terminate on budget

    json results = run_exploration_batch(queries, nullptr);
    round_feedback = "\n*** VERIFICATION RESULTS (round " + std::to_string(round) + ") ***\n";
    for (const auto& r : results)
      round_feedback += "Query: " + r.at("sql").get<std::string>() + "\n" +
                        r.at("result").get<std::string>() + "\n";
  }
  if (rounds_out) *rounds_out = std::min(round, config_.max_refine_rounds);

  SchemaSubset d_star(&schema_);
  if (latest_refined) {
    for (const auto& [table, body] : latest_refined->items()) {
      if (!body.is_object() || !body.contains("relevant_columns")) continue;
      for (const auto& c : body.at("relevant_columns")) {
        std::string col = c.is_object() ? c.value("column_name", c.value("column", ""))
                                        : (c.is_string() ? c.get<std::string>() : "");
        if (col.empty()) continue;
        ColumnRef ref = ColumnRef::make(table, col);
        std::string reason =
            c.is_object() ? c.value("relevance_reason", "") : std::string();
        if (!pruned.contains(ref)) continue;  // synthesis cannot widen beyond D_pruned
        d_star.add(ref, SubsetAnnotation{reason, ""});
      }
    }
    // Explicit-rejection rule: profiling-relevant columns missing from the
    // refined schema without a rejection entry are put back.
    std::set<ColumnRef> rejected_refs;
    for (const auto& [ref, reason] : rejected) rejected_refs.insert(ref);
    for (const auto& ref : profiling_relevant)
      if (!d_star.contains(ref) && !rejected_refs.count(ref))
        d_star.add(ref, SubsetAnnotation{"re-added: relevant in profiling, not rejected", ""});
  } else {
    // No parseable refinement ever appeared.
    for (const auto& ref : profiling_relevant)
      d_star.add(ref, SubsetAnnotation{"profiling-relevant (synthesis unparseable)", ""});
    if (d_star.empty())
      for (const auto& ref : pruned.refs()) d_star.add(ref);
  }
  if (rejected_out) *rejected_out = rejected;
  return d_star;
}

LinkOutcome SchemaLinker::link(const std::string& question, const std::string& evidence,
                               const std::string& question_id) {
  LinkOutcome outcome;
  auto candidates = generate_plans(question, evidence);
  outcome.master_plan = aggregate_plans(question, candidates);

  auto merged = merge_identical_tables(schema_);
  auto batches = partition_batches(schema_, merged, config_.min_batch_tokens,
                                   config_.max_batch_tokens);
  std::vector<PruneDecision> decisions;
  for (size_t i = 0; i < batches.size(); ++i)
    decisions.push_back(prune_batch(question, evidence, outcome.master_plan, batches[i],
                                    int(i)));
  outcome.d_pruned = fuse_pruned(batches, decisions);
  outcome.roles = semantic_link(question, evidence, outcome.master_plan, outcome.d_pruned);

  // Parallel per-table profiling; observations keep table order in
  // D_pruned no matter which worker finishes first.
  auto tables = outcome.d_pruned.tables_in_schema_order();
  size_t degree = std::min<size_t>(std::max(1, config_.profile_parallelism), tables.size());
  outcome.observations.resize(tables.size());
  if (!tables.empty()) {
    auto scopes = gateway_.make_scopes(tables.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= tables.size()) return;
        const std::string& t = tables[i];
        std::string norm = ColumnRef::normalize(t);
        std::string role = outcome.roles.table_roles.count(norm)
                               ? outcome.roles.table_roles.at(norm)
                               : "unknown";
        outcome.observations[i] =
            profile_table(question, evidence, t, outcome.d_pruned, role, &scopes[i]);
      }
    };
    std::vector<std::future<void>> futures;
    for (size_t w = 0; w < degree; ++w)
      futures.push_back(std::async(std::launch::async, worker));
    for (auto& f : futures) f.get();
  }

  outcome.d_star = global_synthesis(question, evidence, outcome.roles,
                                    outcome.observations, outcome.d_pruned,
                                    &outcome.synthesis_rounds, &outcome.rejected);

  json final_columns = json::array();
  for (const auto& ref : outcome.d_star.refs()) {
    const SubsetAnnotation* note = outcome.d_star.annotation(ref);
    final_columns.push_back({{"table", ref.table},
                             {"column", ref.column},
                             {"reason", note ? note->reason : ""}});
  }
  json rejected = json::array();
  for (const auto& [ref, reason] : outcome.rejected)
    rejected.push_back({{"table", ref.table}, {"column", ref.column}, {"reason", reason}});
  outcome.report = {{"question_id", question_id},
                    {"plan", outcome.master_plan.steps},
                    {"pruned_count", outcome.d_pruned.size()},
                    {"final_columns", final_columns},
                    {"rejected", rejected},
                    {"rounds", outcome.synthesis_rounds},
                    {"token_usage", gateway_.ledger().to_json()}};
  return outcome;
}

}  // namespace apexsql
