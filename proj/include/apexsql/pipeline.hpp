#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "apexsql/agent.hpp"
#include "apexsql/exec.hpp"
#include "apexsql/gateway.hpp"
#include "apexsql/guidance.hpp"
#include "apexsql/linking.hpp"
#include "apexsql/scoring.hpp"
#include "json.hpp"

namespace apexsql {

struct BackendSpec {
  enum class Kind { kReplay, kHttp, kCanned };
  Kind kind = Kind::kCanned;
  std::string replay_path;  // file, or directory of <question_id>.json scripts
  std::string base_url;
  std::string model;
  std::string api_key;
};

struct RunConfig {
  BackendSpec backend;
  int n_samples = 8;
  std::optional<CompareMode> mode;  // unset -> dataset default
  std::string out_dir = "out";
  std::string run_id;  // empty -> "run-replay" under deterministic backends
  int task_parallelism = 4;
  bool oracle_schema = false;
  std::string link_reports_dir;  // reuse D* from an earlier link run
  LinkConfig link;
  AgentConfig agent;
  std::string tips_path;   // empty -> builtin library
  std::string rules_path;  // empty -> builtin rules
};

RunConfig load_config_file(const std::string& path);
RunConfig load_config_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& config);

struct TaskRecord {
  std::string question_id;
  std::string question;
  std::string evidence;       // inline text (knowledge docs already read)
  std::string evidence_file;  // provenance note for multi-file cases
  std::string database_path;
  std::string golden_sql;
  std::vector<ColumnRef> gold_columns;
  std::string note;
};

// Dataset adapters normalize to TaskRecord: BIRD-style (sqlite file plus a
// question/evidence JSON) and Spider-2.0-style (per-task folder with
// knowledge markdown). "native" accepts TaskRecord JSON directly.
std::vector<TaskRecord> load_tasks(const nlohmann::json& tasks_spec);
std::vector<TaskRecord> load_tasks_bird(const std::string& questions_path,
                                        const std::string& db_root);
std::vector<TaskRecord> load_tasks_spider2(const std::string& root);
std::vector<TaskRecord> load_tasks_native(const nlohmann::json& list,
                                          const std::string& base_dir);

enum class DatasetKind { kBird, kSpider2, kNative };
CompareMode default_mode(DatasetKind kind);

class Runner {
 public:
  explicit Runner(RunConfig config);

  // Each command writes its artifacts under <out_dir>/<run_id>/ and
  // returns the aggregate report. Failures inside one task never abort
  // the batch; they are recorded and counted.
  nlohmann::json run_link(const std::vector<TaskRecord>& tasks);
  nlohmann::json run_generate(const std::vector<TaskRecord>& tasks);
  nlohmann::json run_eval(const std::vector<TaskRecord>& tasks,
                          const std::string& answers_dir = "");
  nlohmann::json run_pipeline(const std::vector<TaskRecord>& tasks);

  std::filesystem::path run_dir() const;
  const RunConfig& config() const { return config_; }
  CompareMode effective_mode(DatasetKind kind) const;

  // One backend per task keeps replay scripts and traces isolated.
  std::shared_ptr<Backend> backend_for(const TaskRecord& task) const;

 private:
  struct GenerateArtifacts {
    CandidateBundle bundle;
    int voted_index = 0;
    bool unselectable = false;
    nlohmann::json report;
  };
  nlohmann::json link_one(const TaskRecord& task, std::filesystem::path task_dir);
  GenerateArtifacts generate_one(const TaskRecord& task, std::filesystem::path task_dir);
  SchemaSubset oracle_subset(const TaskRecord& task, const DatabaseSchema& schema) const;
  RunConfig config_;
  DatasetKind dataset_kind_ = DatasetKind::kNative;

 public:
  void set_dataset_kind(DatasetKind kind) { dataset_kind_ = kind; }
};

std::string render_eval_table(const nlohmann::json& eval_report);

}  // namespace apexsql
