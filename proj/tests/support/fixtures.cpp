#include "fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <tuple>

namespace apexsql::testing {

namespace fs = std::filesystem;
using nlohmann::json;

TempDir::TempDir(const std::string& name) {
  path_ = fs::temp_directory_path() / ("apexsql_test_" + name);
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void create_database(const std::string& path, const std::vector<std::string>& statements) {
  fs::remove(path);
  Database db = Database::open_read_write(path);
  ExecOptions opts;
  opts.allow_writes = true;
  auto run = [&](const std::string& sql) {
    ExecOutcome outcome = db.execute(sql, ExecMode::kFinal, opts);
    if (auto* err = std::get_if<ExecError>(&outcome))
      throw std::runtime_error("fixture statement failed: " + err->message + "\n" + sql);
  };
  run("BEGIN");
  for (const auto& sql : statements) run(sql);
  run("COMMIT");
}

DatabaseSchema toy_schema() {
  Table users;
  users.name = "users";
  users.columns = {{"id", "INTEGER", "", {}},
                   {"name", "TEXT", "", {}},
                   {"age", "INTEGER", "", {}}};
  users.primary_key = {"id"};
  Table orders;
  orders.name = "orders";
  orders.columns = {{"id", "INTEGER", "", {}},
                    {"user_id", "INTEGER", "", {}},
                    {"amount", "REAL", "", {}}};
  orders.foreign_keys = {{"user_id", "users", "id"}};
  return DatabaseSchema("toy", {users, orders});
}

ResultSet make_result(const std::vector<std::string>& columns,
                      const std::vector<std::vector<Value>>& rows) {
  ResultSet rs;
  for (const auto& c : columns) rs.columns.push_back(ResultColumn{c, ""});
  rs.rows = rows;
  return rs;
}

ResultSet random_result(std::mt19937& rng, int max_rows, int max_cols, double null_prob) {
  std::uniform_int_distribution<int> cols_dist(1, max_cols);
  std::uniform_int_distribution<int> rows_dist(0, max_rows);
  std::uniform_int_distribution<int> kind_dist(0, 2);
  std::uniform_int_distribution<int> int_dist(-50, 50);
  std::uniform_real_distribution<double> real_dist(-10.0, 10.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  static const char* words[] = {"alpha", "beta", "gamma", "delta", " pad ", ""};
  int ncols = cols_dist(rng);
  int nrows = rows_dist(rng);
  ResultSet rs;
  std::vector<int> kinds;
  for (int c = 0; c < ncols; ++c) {
    rs.columns.push_back(ResultColumn{"c" + std::to_string(c), ""});
    kinds.push_back(kind_dist(rng));
  }
  for (int r = 0; r < nrows; ++r) {
    std::vector<Value> row;
    for (int c = 0; c < ncols; ++c) {
      if (unit(rng) < null_prob) {
        row.push_back(Value::null());
        continue;
      }
      switch (kinds[c]) {
        case 0: row.push_back(Value::integer(int_dist(rng))); break;
        case 1: row.push_back(Value::real(real_dist(rng))); break;
        default: row.push_back(Value::text(words[rng() % 6])); break;
      }
    }
    rs.rows.push_back(std::move(row));
  }
  return rs;
}

ResultSet permute_rows_and_columns(const ResultSet& in, std::mt19937& rng) {
  ResultSet out;
  std::vector<size_t> col_order(in.columns.size());
  for (size_t i = 0; i < col_order.size(); ++i) col_order[i] = i;
  std::shuffle(col_order.begin(), col_order.end(), rng);
  for (size_t c : col_order) out.columns.push_back(in.columns[c]);
  std::vector<size_t> row_order(in.rows.size());
  for (size_t i = 0; i < row_order.size(); ++i) row_order[i] = i;
  std::shuffle(row_order.begin(), row_order.end(), rng);
  for (size_t r : row_order) {
    std::vector<Value> row;
    for (size_t c : col_order) row.push_back(in.rows[r][c]);
    out.rows.push_back(std::move(row));
  }
  return out;
}

ScriptBuilder& ScriptBuilder::add(const std::string& tag, const std::string& response,
                                  const std::string& match) {
  json entry = {{"tag", tag}, {"response", response}};
  if (!match.empty()) entry["match"] = match;
  entries_.push_back(std::move(entry));
  return *this;
}

std::string ScriptBuilder::to_json() const {
  return json{{"entries", entries_}}.dump(2);
}

void ScriptBuilder::write(const std::string& path) const {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << to_json();
}

std::shared_ptr<ReplayBackend> ScriptBuilder::backend() const {
  return ReplayBackend::from_json_text(to_json());
}

DepsFixture build_deps_fixture(const std::string& db_path) {
  DepsFixture fixture;

  // 100 NPM packages x 10 versions = 1000 release rows; 437 carry a NULL
  // upstream timestamp (43.7%). The first ten rows inserted are NULL ones
  // so a LIMIT 10 sample shows only NULLs.
  const int packages = 100, versions_per = 10;
  int null_budget = 437;
  std::mt19937 rng(20240117);
  for (int p = 0; p < packages; ++p) {
    std::string pkg = "pkg-" + std::to_string(p);
    std::string project = "org/" + pkg;
    fixture.projects.push_back(ProjectRow{project, 1000 + 37L * ((p * 13) % packages) + p});
    fixture.package_project.emplace_back(pkg, project);
    for (int v = 0; v < versions_per; ++v) {
      PackageRow row;
      row.name = pkg;
      row.version = "1." + std::to_string(v) + ".0";
      row.system = "NPM";
      row.is_release = true;
      row.ordinal = v + 1;
      row.upstream_null = null_budget > 0;
      if (row.upstream_null) --null_budget;
      row.upstream_at = row.upstream_null ? 0 : 1600000000L + p * 1000 + v;
      fixture.versions.push_back(row);
      ++fixture.npm_release_rows;
      if (row.upstream_null) ++fixture.npm_release_nulls;
    }
    // Non-release and non-NPM rows exercise the filters.
    PackageRow pre;
    pre.name = pkg;
    pre.version = "2.0.0-beta";
    pre.system = "NPM";
    pre.is_release = false;
    pre.ordinal = versions_per + 1;
    pre.upstream_null = false;
    pre.upstream_at = 1700000000L + p;
    fixture.versions.push_back(pre);
    PackageRow pypi;
    pypi.name = pkg;
    pypi.version = "9.9.9";
    pypi.system = "PYPI";
    pypi.is_release = true;
    pypi.ordinal = 1;
    pypi.upstream_null = false;
    pypi.upstream_at = 1650000000L + p;
    fixture.versions.push_back(pypi);
  }
  std::shuffle(fixture.projects.begin(), fixture.projects.end(), rng);

  std::vector<std::string> statements;
  statements.push_back(
      "CREATE TABLE PROJECTS (Name TEXT, Type TEXT, StarsCount INTEGER, SnapshotAt INTEGER)");
  statements.push_back(
      "CREATE TABLE PACKAGEVERSIONS (Name TEXT, Version TEXT, System TEXT, "
      "VersionInfo TEXT, UpstreamPublishedAt INTEGER, SnapshotAt INTEGER)");
  statements.push_back(
      "CREATE TABLE PACKAGEVERSIONTOPROJECT (System TEXT, Name TEXT, Version TEXT, "
      "ProjectType TEXT, ProjectName TEXT, RelationType TEXT)");
  auto quote = [](const std::string& s) { return "'" + s + "'"; };
  for (const auto& p : fixture.projects)
    statements.push_back("INSERT INTO PROJECTS VALUES (" + quote(p.name) + ", 'GITHUB', " +
                         std::to_string(p.stars) + ", 1700000000)");
  for (const auto& v : fixture.versions) {
    std::string info = std::string("{\"IsRelease\": ") + (v.is_release ? "true" : "false") +
                       ", \"Ordinal\": " + std::to_string(v.ordinal) + "}";
    statements.push_back(
        "INSERT INTO PACKAGEVERSIONS VALUES (" + quote(v.name) + ", " + quote(v.version) +
        ", " + quote(v.system) + ", " + quote(info) + ", " +
        (v.upstream_null ? "NULL" : std::to_string(v.upstream_at)) + ", 1700000000)");
  }
  for (const auto& [pkg, project] : fixture.package_project) {
    // Link every version of the package to its project.
    for (const auto& v : fixture.versions) {
      if (v.name != pkg || v.system != "NPM") continue;
      statements.push_back("INSERT INTO PACKAGEVERSIONTOPROJECT VALUES ('NPM', " +
                           quote(pkg) + ", " + quote(v.version) +
                           ", 'GITHUB', " + quote(project) + ", 'SOURCE_REPO_TYPE')");
    }
  }
  create_database(db_path, statements);
  return fixture;
}

std::vector<std::pair<std::string, std::string>> deps_top8(const DepsFixture& fixture) {
  // Latest NPM release per package by ordinal, then stars descending.
  std::map<std::string, const PackageRow*> latest;
  for (const auto& v : fixture.versions) {
    if (v.system != "NPM" || !v.is_release) continue;
    auto it = latest.find(v.name);
    if (it == latest.end() || v.ordinal > it->second->ordinal) latest[v.name] = &v;
  }
  std::map<std::string, std::string> project_of(fixture.package_project.begin(),
                                                fixture.package_project.end());
  std::map<std::string, long> stars_of;
  for (const auto& p : fixture.projects) stars_of[p.name] = p.stars;
  std::vector<std::tuple<long, std::string, std::string>> ranked;
  for (const auto& [pkg, row] : latest) {
    auto proj = project_of.find(pkg);
    if (proj == project_of.end()) continue;
    ranked.emplace_back(stars_of.at(proj->second), pkg, row->version);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return std::get<0>(a) > std::get<0>(b);
  });
  std::vector<std::pair<std::string, std::string>> top;
  for (size_t i = 0; i < ranked.size() && i < 8; ++i)
    top.emplace_back(std::get<1>(ranked[i]), std::get<2>(ranked[i]));
  return top;
}

}  // namespace apexsql::testing

namespace apexsql::testing {

void append_link_script(ScriptBuilder& script, const LinkScript& spec) {
  json steps = json::array();
  for (const auto& s : spec.plan_steps) steps.push_back(s);
  std::string plan_json = "```json\n" + json{{"logical_steps", steps}}.dump() + "\n```";
  for (int i = 0; i < spec.plan_samples; ++i) script.add("sl_plan", plan_json);
  std::string master;
  for (const auto& s : spec.plan_steps) master += s + "\n";
  script.add("sl_agg", master);
  script.add("sl_del",
             "```json\n{\"obviously_irrelevant_tables\": [], "
             "\"obviously_irrelevant_columns\": []}\n```");
  script.add("sl_sel", "```json\n{\"relevant_tables\": [], \"relevant_columns\": []}\n```");
  json functions = json::object();
  for (const auto& t : spec.tables)
    functions[t.table] = t.relevant ? "target table for the question" : "unrelated table";
  script.add("sl_semantics",
             "```json\n" +
                 json{{"database_structure", "fixture database"},
                      {"query_specific_content_analysis", "fixture analysis"},
                      {"table_functions", functions}}
                     .dump() +
                 "\n```");
  for (const auto& t : spec.tables) {
    std::string sql = t.exploration_sql.empty()
                          ? "SELECT COUNT(*) FROM \"" + t.table + "\";"
                          : t.exploration_sql;
    script.add("sl_profile_explore", "```sql\n-- glance\n" + sql + "\n```",
               "TARGET TABLE: " + t.table + " ");
    json cols = json::array();
    for (const auto& c : t.relevant_columns)
      cols.push_back({{"column_name", c},
                      {"relevance_reason", "needed"},
                      {"observations", "looks usable"}});
    script.add("sl_profile_verdict",
               "```json\n" +
                   json{{"relevant", t.relevant},
                        {"relevant_columns", cols},
                        {"table_summary", t.relevant ? "keep" : "skip"}}
                       .dump() +
                   "\n```",
               "table `" + t.table + "`");
  }
  json refined = json::object();
  if (spec.refined.empty()) {
    for (const auto& t : spec.tables) {
      if (!t.relevant || t.relevant_columns.empty()) continue;
      json cols = json::array();
      for (const auto& c : t.relevant_columns)
        cols.push_back({{"column_name", c}, {"relevance_reason", "needed"}});
      refined[t.table] = {{"relevant_columns", cols}};
    }
  } else {
    for (const auto& [table, columns] : spec.refined) {
      json cols = json::array();
      for (const auto& c : columns)
        cols.push_back({{"column_name", c}, {"relevance_reason", "needed"}});
      refined[table] = {{"relevant_columns", cols}};
    }
  }
  json rejected = json::array();
  for (const auto& [table, column, reason] : spec.rejected)
    rejected.push_back({{"table", table}, {"column", column}, {"reject_reason", reason}});
  script.add("sl_final",
             "```json\n" +
                 json{{"refined_schema", refined},
                      {"rejected_candidates", rejected},
                      {"exploration_queries", json::array()},
                      {"status", "[CONFIRM]"}}
                     .dump() +
                 "\n```");
}

void append_episode_script(ScriptBuilder& script, const std::string& tag,
                           const std::string& explore_sql, const std::string& final_sql) {
  script.add(tag, "[EXPLORE]\n```sql\n-- look before leaping\n" + explore_sql + "\n```");
  script.add(tag,
             "[REFINE]\n### Findings from Exploration:\n- data shape verified\n"
             "### Updated Understanding:\n- the direct query answers it\n"
             "### Query Plan:\n- select the requested values\n"
             "### Next Action:\n- Generate SQL");
  script.add(tag, "[SQL]\n```sql\n" + final_sql + "\n```");
  script.add(tag, "[CONFIRM] the query answers the question");
}

void append_kw_script(ScriptBuilder& script, const std::vector<std::string>& keywords) {
  std::string kw;
  for (size_t i = 0; i < keywords.size(); ++i) {
    if (i) kw += ", ";
    kw += keywords[i];
  }
  script.add("sql_kw",
             "Step 1: Answer the question\n  - Info need: the requested values\n"
             "  - Possible paths: 'direct access'\n  - Keywords: " + kw + "\n");
}

}  // namespace apexsql::testing
