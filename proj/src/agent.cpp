#include "apexsql/agent.hpp"

#include <algorithm>
#include <sstream>

#include "apexsql/prompts.hpp"

namespace apexsql {

using nlohmann::json;

SqlAgent::SqlAgent(Gateway& gateway, const std::string& db_path,
                   const SchemaSubset& d_star, const std::string& question,
                   const std::string& evidence, const std::string& guidance,
                   AgentConfig config, std::string episode_tag, CallScope* scope)
    : gateway_(gateway),
      db_path_(db_path),
      db_(Database::open_read_only(db_path)),
      d_star_(d_star),
      question_(question),
      evidence_(evidence),
      guidance_(guidance),
      config_(config),
      tag_(std::move(episode_tag)),
      scope_(scope),
      schema_text_(serialize_for_prompt(d_star)) {}

bool SqlAgent::forced_synthesis(const AgentState& state) const {
  return state.action_count >= config_.budget.force_sql_actions ||
         state.token_count >= config_.budget.force_sql_tokens;
}

std::string SqlAgent::render_context(const AgentState& state) const {
  // Fixed assembly order: schema, question, evidence, guidance,
  // consolidated snapshot, surviving history. The action-space text rides
  // in the system message.
  std::string out;
  out += "*** DATABASE SCHEMA ***\n" + schema_text_ + "\n";
  out += "*** USER QUESTION ***\n" + question_ + "\n\n";
  out += "*** EVIDENCE ***\n" + evidence_ + "\n\n";
  out += "*** GUIDANCE ***\n" + guidance_ + "\n\n";
  if (state.consolidated.present) {
    out += "*** CONSOLIDATED PLAN ***\n" + state.consolidated.plan + "\n\n";
    out += "*** CONSOLIDATED UNDERSTANDING ***\n" + state.consolidated.understanding +
           "\n\n";
  }
  if (state.history.empty()) {
    out += "*** HISTORY ***\nNo actions taken yet. Choose your first action.\n";
  } else {
    out += "*** HISTORY ***\n";
    for (const auto& entry : state.history) {
      if (!entry.in_context) continue;
      out += "--- step " + std::to_string(entry.step) + " [" +
             (entry.kind ? action_tag_name(*entry.kind) : "INVALID") + "] ---\n";
      out += entry.body + "\n";
      if (!entry.observation.empty())
        out += "Observation:\n" + entry.observation + "\n";
    }
  }
  if (forced_synthesis(state)) {
    out += "\n";
    out += prompts::kForcedSynthesisDirective;
    out += "\n";
  }
  return out;
}

bool parse_consolidation(const std::string& body, ConsolidatedState* out) {
  std::string lower = to_lower(body);
  size_t plan_pos = lower.find("query plan");
  size_t und_pos = lower.find("updated understanding");
  if (plan_pos == std::string::npos && und_pos == std::string::npos) return false;
  auto section = [&](size_t heading_pos) -> std::string {
    if (heading_pos == std::string::npos) return "";
    size_t start = body.find('\n', heading_pos);
    if (start == std::string::npos) return "";
    size_t end = body.find("###", start);
    return trim(body.substr(start, end == std::string::npos ? std::string::npos
                                                            : end - start));
  };
  out->present = true;
  out->plan = section(plan_pos);
  out->understanding = section(und_pos);
  if (out->understanding.empty() && und_pos == std::string::npos)
    out->understanding = trim(body);
  return true;
}

void SqlAgent::consolidate(AgentState& state) {
  // Exploration evidence is never lost; everything else shrinks to the
  // latest snapshot plus the latest SQL attempt.
  int latest_sql_step = -1;
  for (const auto& e : state.history)
    if (e.kind == ActionTag::kSql) latest_sql_step = e.step;
  for (auto& e : state.history) {
    if (e.kind == ActionTag::kExplore) e.in_context = true;
    else if (e.kind == ActionTag::kSql) e.in_context = (e.step == latest_sql_step);
    else e.in_context = false;
  }
}

void SqlAgent::dispatch(AgentState& state, HistoryEntry& entry, bool forced) {
  if (!entry.kind) {
    entry.observation = prompts::kUnparsableActionNotice;
    return;
  }
  if (forced && entry.kind != ActionTag::kSql && entry.kind != ActionTag::kConfirm) {
    entry.observation = prompts::kForcedSynthesisDirective;
    return;
  }
  ExecOptions opts;
  opts.timeout_seconds = config_.exec_timeout_seconds;
  opts.row_cap = config_.result_row_cap;
  switch (*entry.kind) {
    case ActionTag::kExplore: {
      auto statements = extract_sql_statements(entry.body);
      if (statements.empty() && !leading_keyword(entry.body).empty())
        statements = split_sql_statements(entry.body);
      if (statements.empty()) {
        entry.observation = "No SQL statements found in the [EXPLORE] body.";
        return;
      }
      std::string obs;
      for (const auto& sql : statements) {
        ExecOutcome outcome = db_.execute(sql, ExecMode::kReadOnly, opts);
        obs += "Query: " + sql + "\n" + render_outcome(outcome) + "\n\n";
        ++entry.executed_statements;
      }
      entry.observation = trim(obs);
      return;
    }
    case ActionTag::kRefine: {
      ConsolidatedState snapshot;
      if (parse_consolidation(entry.body, &snapshot)) {
        state.consolidated = snapshot;
        consolidate(state);
      }
      return;
    }
    case ActionTag::kSql: {
      auto statements = extract_sql_statements(entry.body);
      if (statements.empty() && !leading_keyword(entry.body).empty())
        statements = split_sql_statements(entry.body);
      if (statements.empty()) {
        entry.observation = "No SQL query found in the [SQL] body.";
        return;
      }
      const std::string& candidate = statements.front();
      state.last_attempted_sql = candidate;
      opts.allow_writes = config_.allow_writes_final;
      ExecOutcome outcome = db_.execute(candidate, ExecMode::kFinal, opts);
      if (auto* err = std::get_if<ExecError>(&outcome)) {
        // Feedback drives self-correction on the next steps.
        entry.observation = std::string("final SQL failed (") +
                            exec_error_kind_name(err->kind) + "): " + err->message;
      } else {
        auto& rs = std::get<ResultSet>(outcome);
        state.last_successful_sql = candidate;
        state.last_successful_result = rs;
        entry.observation =
            "final SQL executed successfully.\n" + render_summarized(summarize(rs));
        if (statements.size() > 1)
          entry.observation += "\n(note: only the first statement was executed)";
      }
      return;
    }
    case ActionTag::kConfirm: {
      if (!state.last_successful_sql) {
        entry.observation = prompts::kPrematureConfirmNotice;
        return;
      }
      state.terminated = true;
      state.confirmed = true;
      state.final_sql = state.last_successful_sql;
      return;
    }
  }
}

void SqlAgent::step(AgentState& state) {
  if (state.terminated) return;
  // The enforcement decision matches the directive the prompt carried.
  bool forced = forced_synthesis(state);
  ChatRequest request;
  request.tag = tag_;
  request.messages = {{Role::kSystem, prompts::kActionSpace},
                      {Role::kUser, render_context(state)}};
  ChatResponse response =
      scope_ ? gateway_.complete(request, *scope_) : gateway_.complete(request);

  HistoryEntry entry;
  entry.step = state.action_count + 1;
  entry.tokens = response.input_tokens + response.output_tokens;
  auto action = extract_action(response.content);
  if (action) {
    entry.kind = action->tag;
    entry.body = action->body;
  } else {
    entry.body = response.content;
  }
  state.token_count += entry.tokens;
  state.action_count += 1;
  dispatch(state, entry, forced);
  state.history.push_back(std::move(entry));

  if (!state.terminated &&
      default_token_estimate(render_context(state)) > config_.consolidate_threshold_tokens)
    consolidate(state);
}

int SqlAgent::count_exploration_rounds(const AgentState& state) {
  int rounds = 0;
  bool in_run = false;
  for (const auto& e : state.history) {
    bool is_explore = e.kind == ActionTag::kExplore;
    if (is_explore && !in_run) ++rounds;
    in_run = is_explore;
  }
  return rounds;
}

int SqlAgent::count_exploratory_statements(const AgentState& state) {
  int n = 0;
  for (const auto& e : state.history)
    if (e.kind == ActionTag::kExplore) n += e.executed_statements;
  return n;
}

EpisodeResult SqlAgent::run() {
  AgentState state;
  while (!state.terminated) {
    if (state.action_count >= config_.budget.max_actions) break;
    if (state.token_count >= config_.budget.max_tokens) break;
    step(state);
  }
  if (!state.terminated) {
    // Out of budget: the last successfully executed SQL stands, or the
    // last attempt when nothing ever succeeded.
    if (state.last_successful_sql) state.final_sql = state.last_successful_sql;
    else if (state.last_attempted_sql) state.final_sql = state.last_attempted_sql;
  }

  EpisodeResult result;
  result.final_sql = state.final_sql;
  if (state.final_sql && state.last_successful_sql &&
      *state.final_sql == *state.last_successful_sql)
    result.final_result = state.last_successful_result;
  result.confirmed = state.confirmed;
  result.failed = !state.final_sql.has_value();
  result.rounds = count_exploration_rounds(state);
  result.query_count = count_exploratory_statements(state);
  result.actions = state.action_count;
  result.tokens = state.token_count;
  json trace = json::array();
  for (const auto& e : state.history)
    trace.push_back({{"step", e.step},
                     {"kind", e.kind ? action_tag_name(*e.kind) : "INVALID"},
                     {"body", e.body},
                     {"observation", e.observation},
                     {"tokens", e.tokens}});
  result.trace = std::move(trace);
  return result;
}

std::string prefilter_evidence(Gateway& gateway, const std::string& question,
                               const std::string& knowledge_doc,
                               const std::string& doc_name, long passthrough_tokens,
                               const TokenEstimator& estimator, CallScope* scope) {
  if (knowledge_doc.empty()) return "";
  if (estimator(knowledge_doc) < passthrough_tokens) return knowledge_doc;
  ChatRequest request;
  request.tag = "evidence_filter";
  request.messages = {{Role::kUser, prompts::render(prompts::kEvidenceLinking,
                                                    {{"query", question},
                                                     {"knowledge_file_name", doc_name},
                                                     {"knowledge_content", knowledge_doc}})}};
  ChatResponse response =
      scope ? gateway.complete(request, *scope) : gateway.complete(request);
  return response.content;  // raw text accepted verbatim
}

}  // namespace apexsql
