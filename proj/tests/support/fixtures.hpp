#pragma once

#include <filesystem>
#include <array>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "apexsql/exec.hpp"
#include "apexsql/gateway.hpp"
#include "apexsql/schema.hpp"
#include "json.hpp"

namespace apexsql::testing {

// Scratch directory under the build tree, wiped per construction.
class TempDir {
 public:
  explicit TempDir(const std::string& name);
  ~TempDir();
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Creates a SQLite database file by running a script of statements.
void create_database(const std::string& path, const std::vector<std::string>& statements);

// Two-table toy schema shared by several suites.
DatabaseSchema toy_schema();

// Builds a ResultSet from integer rows, one column per tuple slot.
ResultSet make_result(const std::vector<std::string>& columns,
                      const std::vector<std::vector<Value>>& rows);

// Random result generation for the comparator and σ-compression suites.
ResultSet random_result(std::mt19937& rng, int max_rows = 120, int max_cols = 5,
                        double null_prob = 0.2);
ResultSet permute_rows_and_columns(const ResultSet& in, std::mt19937& rng);

// Replay-script builder: accumulate entries, then serialize or write.
class ScriptBuilder {
 public:
  ScriptBuilder& add(const std::string& tag, const std::string& response,
                     const std::string& match = "");
  std::string to_json() const;
  void write(const std::string& path) const;
  std::shared_ptr<ReplayBackend> backend() const;

 private:
  nlohmann::json entries_ = nlohmann::json::array();
};

// The deps.dev-style case-study fixture: three tables, NPM release rows
// seeded so exactly 437 of 1000 have a NULL upstream timestamp. Returns
// the in-memory rows used for brute-force expectations.
struct PackageRow {
  std::string name;
  std::string version;
  std::string system;
  bool is_release = false;
  long ordinal = 0;
  bool upstream_null = false;
  long upstream_at = 0;
};

struct ProjectRow {
  std::string name;
  long stars = 0;
};

struct DepsFixture {
  std::vector<PackageRow> versions;
  std::vector<ProjectRow> projects;                  // distinct star counts
  std::vector<std::pair<std::string, std::string>> package_project;  // pkg -> project
  long npm_release_rows = 0;
  long npm_release_nulls = 0;
};

DepsFixture build_deps_fixture(const std::string& db_path);

// Brute-force "top 8 by stars over latest releases" computed from the
// in-memory fixture rows, independent of any SQL.
std::vector<std::pair<std::string, std::string>> deps_top8(const DepsFixture& fixture);

}  // namespace apexsql::testing

namespace apexsql::testing {

// Standard replay-script fragments for a full pipeline pass over one task.
// Tables are profiled concurrently, so per-table entries carry content
// matchers; everything else matches by tag in call order.
struct TableScript {
  std::string table;                         // exact table name
  bool relevant = true;
  std::vector<std::string> relevant_columns; // column names
  std::string exploration_sql;               // defaults to a COUNT(*)
};

struct LinkScript {
  std::vector<std::string> plan_steps = {"1. Identify the rows.", "2. Return the values."};
  std::vector<TableScript> tables;
  // table -> columns for the final refined schema; empty map means
  // "use every relevant column from profiling".
  std::map<std::string, std::vector<std::string>> refined;
  std::vector<std::array<std::string, 3>> rejected;  // table, column, reason
  int plan_samples = 2;
};

void append_link_script(ScriptBuilder& script, const LinkScript& spec);

// One agent episode: explore once, refine, emit the final SQL, confirm.
void append_episode_script(ScriptBuilder& script, const std::string& tag,
                           const std::string& explore_sql, const std::string& final_sql);

// Realization-paths response for the guidance stage.
void append_kw_script(ScriptBuilder& script, const std::vector<std::string>& keywords);

}  // namespace apexsql::testing
