#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "apexsql/exec.hpp"
#include "apexsql/gateway.hpp"
#include "apexsql/schema.hpp"
#include "json.hpp"

namespace apexsql {

struct LogicalPlan {
  enum class Source { kCandidate, kMaster };
  std::vector<std::string> steps;
  Source source = Source::kCandidate;
  int candidate_index = -1;

  std::string text() const;
};

struct RoleAnalysis {
  std::string database_structure;
  std::string content_analysis;
  std::map<std::string, std::string> table_roles;  // normalized table name -> role
};

struct ExecutedQuery {
  std::string sql;
  std::string outcome;
};

struct RelevantColumn {
  std::string column;
  std::string reason;
  std::string observations;
};

struct TableObservation {
  std::string table;
  bool relevant = false;
  std::vector<RelevantColumn> relevant_columns;
  std::string table_summary;
  std::vector<ExecutedQuery> executed_queries;
};

struct PruneDecision {
  int batch_id = 0;
  std::set<ColumnRef> deletion_set;
  std::set<ColumnRef> preservation_set;
  std::vector<std::string> warnings;  // out-of-batch refs dropped
};

struct LinkConfig {
  int plan_samples = 2;
  double plan_temperature = 0.8;
  double aggregate_temperature = 0.2;
  long min_batch_tokens = 8000;
  long max_batch_tokens = 12000;
  int max_refine_rounds = 3;
  int profile_query_cap = 8;
  int profile_parallelism = 8;  // effective degree = min(cap, table count)
  double exec_timeout_seconds = 30.0;
  std::string critical_rules;  // configurable slot, empty by default
};

struct LinkOutcome {
  SchemaSubset d_star;
  SchemaSubset d_pruned;
  LogicalPlan master_plan;
  RoleAnalysis roles;
  std::vector<TableObservation> observations;
  std::vector<std::pair<ColumnRef, std::string>> rejected;  // ref, reason
  int synthesis_rounds = 0;
  nlohmann::json report;
};

// The schema-linking pipeline over one question: logical planning with
// consensus aggregation, dual-pathway pruning, semantic role linking,
// per-table profiling, and global synthesis with connectivity repair.
// Every stage fail-safes toward recall; only backend transport failures
// propagate.
class SchemaLinker {
 public:
  SchemaLinker(Gateway& gateway, const DatabaseSchema& schema,
               const std::string& db_path, LinkConfig config = {});

  std::vector<LogicalPlan> generate_plans(const std::string& question,
                                          const std::string& evidence);
  LogicalPlan aggregate_plans(const std::string& question,
                              const std::vector<LogicalPlan>& candidates);
  PruneDecision prune_batch(const std::string& question, const std::string& evidence,
                            const LogicalPlan& plan, const SchemaBatch& batch,
                            int batch_id, CallScope* scope = nullptr);
  SchemaSubset fuse_pruned(const std::vector<SchemaBatch>& batches,
                           const std::vector<PruneDecision>& decisions) const;
  RoleAnalysis semantic_link(const std::string& question, const std::string& evidence,
                             const LogicalPlan& plan, const SchemaSubset& pruned);
  TableObservation profile_table(const std::string& question, const std::string& evidence,
                                 const std::string& table, const SchemaSubset& pruned,
                                 const std::string& role, CallScope* scope = nullptr);
  SchemaSubset global_synthesis(const std::string& question, const std::string& evidence,
                                const RoleAnalysis& roles,
                                const std::vector<TableObservation>& observations,
                                const SchemaSubset& pruned, int* rounds_out = nullptr,
                                std::vector<std::pair<ColumnRef, std::string>>* rejected_out = nullptr);

  LinkOutcome link(const std::string& question, const std::string& evidence,
                   const std::string& question_id = "");

  const LinkConfig& config() const { return config_; }

 private:
  nlohmann::json run_exploration_batch(const std::vector<std::string>& statements,
                                       std::vector<ExecutedQuery>* log,
                                       CallScope* scope = nullptr);
  Gateway& gateway_;
  const DatabaseSchema& schema_;
  std::string db_path_;
  LinkConfig config_;
};

// Pure set algebra behind fuse_pruned, shared with the property tests:
// result = (batch \ deletion) ∪ preservation per batch, unioned.
std::set<ColumnRef> fuse_rule(const std::set<ColumnRef>& batch_columns,
                              const std::set<ColumnRef>& deletion,
                              const std::set<ColumnRef>& preservation);

std::set<ColumnRef> batch_column_set(const DatabaseSchema& schema, const SchemaBatch& batch);

}  // namespace apexsql
