#include "apex.h"

#include <cstring>
#include <fstream>
#include <string>

#include "apexsql/pipeline.hpp"

using namespace apexsql;
using nlohmann::json;

struct apex_engine {
  RunConfig config;
  std::string last_error;
};

struct apex_session {
  apex_engine* engine = nullptr;
  std::string db_path;
  json last_answer;
  json last_trace = json::array();
  std::string last_error;
};

namespace {

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

apex_status classify_exception(const std::exception& e, std::string* message) {
  *message = e.what();
  if (dynamic_cast<const GatewayError*>(&e)) return APEX_ERROR_BACKEND;
  return APEX_ERROR_CONFIG;
}

DatasetKind dataset_kind_of(const json& spec) {
  std::string dataset = spec.value("dataset", "native");
  if (dataset == "bird") return DatasetKind::kBird;
  if (dataset == "spider2") return DatasetKind::kSpider2;
  return DatasetKind::kNative;
}

using Command = json (*)(Runner&, const std::vector<TaskRecord>&);

apex_status run_command(apex_engine* engine, const char* tasks_spec_json,
                        char** report_json_out, Command command) {
  if (!engine || !tasks_spec_json || !report_json_out) return APEX_ERROR_INVALID;
  try {
    json spec = json::parse(tasks_spec_json);
    std::vector<TaskRecord> tasks = load_tasks(spec);
    Runner runner(engine->config);
    runner.set_dataset_kind(dataset_kind_of(spec));
    json report = command(runner, tasks);
    *report_json_out = dup_string(report.dump(2));
    int failed = report.value("failed_tasks", 0);
    if (report.contains("eval"))
      failed += report["eval"].value("io_failures", 0);
    if (report.contains("io_failures")) failed += report.value("io_failures", 0);
    return failed > 0 ? APEX_ERROR_PARTIAL : APEX_OK;
  } catch (const std::exception& e) {
    return classify_exception(e, &engine->last_error);
  }
}

}  // namespace

extern "C" {

const char* apex_version(void) { return "0.1.0"; }

apex_status apex_engine_open(const char* config_path, apex_engine** out) {
  if (!config_path || !out) return APEX_ERROR_INVALID;
  try {
    auto* engine = new apex_engine{load_config_file(config_path), ""};
    *out = engine;
    return APEX_OK;
  } catch (const std::exception&) {
    return APEX_ERROR_CONFIG;
  }
}

apex_status apex_engine_open_json(const char* config_json, apex_engine** out) {
  if (!config_json || !out) return APEX_ERROR_INVALID;
  try {
    auto* engine = new apex_engine{load_config_json(json::parse(config_json)), ""};
    *out = engine;
    return APEX_OK;
  } catch (const std::exception&) {
    return APEX_ERROR_CONFIG;
  }
}

void apex_engine_close(apex_engine* engine) { delete engine; }

const char* apex_engine_last_error(const apex_engine* engine) {
  return engine ? engine->last_error.c_str() : "";
}

apex_status apex_engine_run_link(apex_engine* engine, const char* tasks_spec_json,
                                 char** report_json_out) {
  return run_command(engine, tasks_spec_json, report_json_out,
                     [](Runner& r, const std::vector<TaskRecord>& t) {
                       return r.run_link(t);
                     });
}

apex_status apex_engine_run_generate(apex_engine* engine, const char* tasks_spec_json,
                                     char** report_json_out) {
  return run_command(engine, tasks_spec_json, report_json_out,
                     [](Runner& r, const std::vector<TaskRecord>& t) {
                       return r.run_generate(t);
                     });
}

apex_status apex_engine_run_eval(apex_engine* engine, const char* tasks_spec_json,
                                 char** report_json_out) {
  return run_command(engine, tasks_spec_json, report_json_out,
                     [](Runner& r, const std::vector<TaskRecord>& t) {
                       return r.run_eval(t);
                     });
}

apex_status apex_engine_run_pipeline(apex_engine* engine, const char* tasks_spec_json,
                                     char** report_json_out) {
  return run_command(engine, tasks_spec_json, report_json_out,
                     [](Runner& r, const std::vector<TaskRecord>& t) {
                       return r.run_pipeline(t);
                     });
}

apex_status apex_session_open(apex_engine* engine, const char* db_path,
                              apex_session** out) {
  if (!engine || !db_path || !out) return APEX_ERROR_INVALID;
  try {
    Database::open_read_only(db_path);  // validate early
    auto* session = new apex_session;
    session->engine = engine;
    session->db_path = db_path;
    *out = session;
    return APEX_OK;
  } catch (const std::exception& e) {
    engine->last_error = e.what();
    return APEX_ERROR_IO;
  }
}

apex_status apex_session_ask(apex_session* session, const char* question,
                             char** answer_json_out) {
  if (!session || !question || !answer_json_out) return APEX_ERROR_INVALID;
  try {
    RunConfig config = session->engine->config;
    config.n_samples = 1;
    Runner runner(config);
    TaskRecord task;
    task.question_id = "repl";
    task.question = question;
    task.database_path = session->db_path;
    json report = runner.run_generate({task});
    const json& entry = report.at("tasks").at(0);
    if (entry.contains("error"))
      throw std::runtime_error(entry.at("error").get<std::string>());

    std::string sql = entry.value("final_sql", "");
    json answer = {{"sql", sql}};
    Database db = Database::open_read_only(session->db_path);
    if (!sql.empty()) {
      ExecOutcome outcome = db.execute(sql, ExecMode::kReadOnly, {});
      if (auto* rs = std::get_if<ResultSet>(&outcome))
        answer["result"] = render_result(*rs, 20);
      else
        answer["result"] = render_outcome(outcome);
    } else {
      answer["result"] = "(no SQL produced)";
    }
    const json& candidate = entry.at("candidates").at(0);
    answer["rounds"] = candidate.value("rounds", 0);
    answer["summary"] = "exploration rounds: " +
                        std::to_string(candidate.value("rounds", 0)) +
                        ", exploratory queries: " +
                        std::to_string(candidate.value("query_count", 0)) +
                        ", actions: " + std::to_string(candidate.value("actions", 0));
    // Keep the action trace for :trace.
    auto dir = runner.run_dir() / "tasks" / "repl" / "episodes.jsonl";
    session->last_trace = json::array();
    {
      std::ifstream in(dir);
      std::string line;
      while (in && std::getline(in, line))
        if (!line.empty()) session->last_trace.push_back(json::parse(line));
    }
    session->last_answer = answer;
    *answer_json_out = dup_string(answer.dump(2));
    return APEX_OK;
  } catch (const GatewayError& e) {
    session->last_error = e.what();
    session->engine->last_error = e.what();
    return APEX_ERROR_BACKEND;
  } catch (const std::exception& e) {
    session->last_error = e.what();
    session->engine->last_error = e.what();
    return APEX_ERROR_INTERNAL;
  }
}

apex_status apex_session_trace(apex_session* session, char** trace_json_out) {
  if (!session || !trace_json_out) return APEX_ERROR_INVALID;
  *trace_json_out = dup_string(session->last_trace.dump(2));
  return APEX_OK;
}

void apex_session_close(apex_session* session) { delete session; }

void apex_string_free(char* s) { std::free(s); }

}  // extern "C"
