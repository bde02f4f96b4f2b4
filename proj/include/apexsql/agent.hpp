#pragma once

#include <optional>
#include <string>
#include <vector>

#include "apexsql/exec.hpp"
#include "apexsql/gateway.hpp"
#include "apexsql/schema.hpp"
#include "json.hpp"

namespace apexsql {

struct HistoryEntry {
  int step = 0;
  std::optional<ActionTag> kind;  // empty for unparseable output
  std::string body;
  std::string observation;
  long tokens = 0;
  int executed_statements = 0;
  bool in_context = true;  // false once consolidation pruned it
};

struct ConsolidatedState {
  bool present = false;
  std::string plan;
  std::string understanding;
};

struct EpisodeBudget {
  int max_actions = 40;
  long max_tokens = 56000;
  int force_sql_actions = 38;
  long force_sql_tokens = 52000;
};

struct AgentState {
  std::vector<HistoryEntry> history;
  ConsolidatedState consolidated;
  int action_count = 0;
  long token_count = 0;  // episode input+output tokens
  std::optional<std::string> last_attempted_sql;
  std::optional<std::string> last_successful_sql;
  std::optional<ResultSet> last_successful_result;
  bool terminated = false;
  bool confirmed = false;
  std::optional<std::string> final_sql;
};

struct EpisodeResult {
  std::optional<std::string> final_sql;
  std::optional<ResultSet> final_result;
  int rounds = 0;       // maximal runs of consecutive EXPLORE actions
  int query_count = 0;  // executed exploratory statements
  bool confirmed = false;
  bool failed = false;
  int actions = 0;
  long tokens = 0;
  nlohmann::json trace;  // one record per action
};

struct AgentConfig {
  EpisodeBudget budget;
  long consolidate_threshold_tokens = 20000;
  double exec_timeout_seconds = 30.0;
  long result_row_cap = 10000;
  bool allow_writes_final = false;
};

// One guided generation episode over D*: a strictly sequential loop with
// σ-compressed observations, consolidation-based context pruning, and
// execution-feedback self-correction. Multiple episodes run concurrently
// with independent states and connections.
class SqlAgent {
 public:
  SqlAgent(Gateway& gateway, const std::string& db_path, const SchemaSubset& d_star,
           const std::string& question, const std::string& evidence,
           const std::string& guidance, AgentConfig config = {},
           std::string episode_tag = "sql_agent_step", CallScope* scope = nullptr);

  EpisodeResult run();

  // Exposed for step-level tests.
  void step(AgentState& state);
  static void consolidate(AgentState& state);
  std::string render_context(const AgentState& state) const;
  bool forced_synthesis(const AgentState& state) const;

  static int count_exploration_rounds(const AgentState& state);
  static int count_exploratory_statements(const AgentState& state);

 private:
  void dispatch(AgentState& state, HistoryEntry& entry, bool forced);
  Gateway& gateway_;
  std::string db_path_;
  Database db_;
  const SchemaSubset& d_star_;
  std::string question_;
  std::string evidence_;
  std::string guidance_;
  AgentConfig config_;
  std::string tag_;
  CallScope* scope_;
  std::string schema_text_;
};

// Evidence pre-filter: empty documents cost nothing, small documents pass
// through unchanged, anything larger goes through one extraction call whose
// raw output is accepted verbatim.
std::string prefilter_evidence(Gateway& gateway, const std::string& question,
                               const std::string& knowledge_doc,
                               const std::string& doc_name = "knowledge.md",
                               long passthrough_tokens = 2000,
                               const TokenEstimator& estimator = default_estimator(),
                               CallScope* scope = nullptr);

// Pulls the consolidation snapshot out of a REFINE body when the body
// carries the structured headings; otherwise returns false.
bool parse_consolidation(const std::string& body, ConsolidatedState* out);

}  // namespace apexsql
