/* C interface to the agentic text-to-SQL engine.
 *
 * All functions return apex_status; APEX_OK means success. Output strings
 * are heap-allocated UTF-8 JSON owned by the caller; release them with
 * apex_string_free(). Handles are opaque and must be closed with their
 * matching close function. A handle's last error message stays valid until
 * the next call on that handle.
 */
#ifndef APEX_H
#define APEX_H

#ifdef __cplusplus
extern "C" {
#endif

typedef struct apex_engine apex_engine;
typedef struct apex_session apex_session;

typedef enum apex_status {
  APEX_OK = 0,
  APEX_ERROR_CONFIG = 1,   /* bad configuration or unreadable input */
  APEX_ERROR_IO = 2,       /* filesystem failure */
  APEX_ERROR_BACKEND = 3,  /* chat backend unavailable or script exhausted */
  APEX_ERROR_PARTIAL = 4,  /* batch finished but some tasks failed */
  APEX_ERROR_INVALID = 5,  /* null/invalid argument */
  APEX_ERROR_INTERNAL = 6
} apex_status;

const char* apex_version(void);

/* Engine lifecycle. Configuration is a JSON document (see README);
 * apex_engine_open reads it from a file, apex_engine_open_json takes the
 * document text directly. */
apex_status apex_engine_open(const char* config_path, apex_engine** out);
apex_status apex_engine_open_json(const char* config_json, apex_engine** out);
void apex_engine_close(apex_engine* engine);
const char* apex_engine_last_error(const apex_engine* engine);

/* Batch commands. tasks_spec_json selects a dataset adapter:
 *   {"dataset":"bird","questions":"q.json","db_root":"dbs"}
 *   {"dataset":"spider2","root":"tasks/"}
 *   {"dataset":"native","tasks":[...]} or {"dataset":"native","tasks_file":"t.json"}
 * The aggregate report JSON is returned through report_json_out. */
apex_status apex_engine_run_link(apex_engine* engine, const char* tasks_spec_json,
                                 char** report_json_out);
apex_status apex_engine_run_generate(apex_engine* engine, const char* tasks_spec_json,
                                     char** report_json_out);
apex_status apex_engine_run_eval(apex_engine* engine, const char* tasks_spec_json,
                                 char** report_json_out);
apex_status apex_engine_run_pipeline(apex_engine* engine, const char* tasks_spec_json,
                                     char** report_json_out);

/* Interactive sessions against one database. apex_session_ask runs the
 * two-stage pipeline with a single sample and returns
 * {"sql":..., "result":..., "rounds":..., "summary":...}. */
apex_status apex_session_open(apex_engine* engine, const char* db_path,
                              apex_session** out);
apex_status apex_session_ask(apex_session* session, const char* question,
                             char** answer_json_out);
apex_status apex_session_trace(apex_session* session, char** trace_json_out);
void apex_session_close(apex_session* session);

void apex_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* APEX_H */
