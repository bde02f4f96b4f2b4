// Command-line front end. Everything functional goes through the C API in
// apex.h; this file only parses flags, assembles the task spec, and prints.
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "apex.h"
#include "json.hpp"

using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string dataset = "native";
  std::string questions;
  std::string db_root;
  std::string root;
  std::string tasks_file;
  std::string replay;
  std::string mode;
  std::string out;
  std::string tips;
  std::string rules;
  int n = -1;
  bool oracle_schema = false;
};

void add_common(CLI::App* cmd, CommonFlags* flags, bool needs_tasks) {
  cmd->add_option("--config", flags->config_path, "Config file (JSON)");
  if (needs_tasks) {
    cmd->add_option("--dataset", flags->dataset, "Dataset adapter: bird|spider2|native")
        ->check(CLI::IsMember({"bird", "spider2", "native"}));
    cmd->add_option("--questions", flags->questions, "BIRD-style question/evidence JSON");
    cmd->add_option("--db-root", flags->db_root, "BIRD-style database root directory");
    cmd->add_option("--root", flags->root, "Spider-2.0-style task folder root");
    cmd->add_option("--tasks", flags->tasks_file, "Native task list JSON");
  }
  cmd->add_option("--replay", flags->replay, "Replay script file or directory");
  cmd->add_option("--n", flags->n, "Samples per task");
  cmd->add_option("--mode", flags->mode, "Comparison mode: strict|relaxed")
      ->check(CLI::IsMember({"", "strict", "relaxed"}));
  cmd->add_option("--out", flags->out, "Output directory");
  cmd->add_option("--tips", flags->tips, "Tip library override (JSON)");
  cmd->add_option("--rules", flags->rules, "Retrieval rules override (JSON)");
  cmd->add_flag("--oracle-schema", flags->oracle_schema,
                "Use gold columns instead of the linker output");
}

std::string build_config_json(const CommonFlags& flags) {
  json config = json::object();
  if (!flags.config_path.empty()) {
    std::FILE* f = std::fopen(flags.config_path.c_str(), "rb");
    if (!f) {
      std::cerr << "cannot read config: " << flags.config_path << "\n";
      std::exit(1);
    }
    std::string text;
    char buf[4096];
    size_t got;
    while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, got);
    std::fclose(f);
    config = json::parse(text);
  }
  if (!flags.replay.empty()) {
    config["backend"] = {{"kind", "replay"}, {"script", flags.replay}};
  } else if (!config.contains("backend")) {
    const char* url = std::getenv("APEX_BASE_URL");
    config["backend"] = {{"kind", url ? "http" : "canned"}};
  }
  if (flags.n > 0) config["n_samples"] = flags.n;
  if (!flags.mode.empty()) config["mode"] = flags.mode;
  if (!flags.out.empty()) config["out_dir"] = flags.out;
  if (!flags.tips.empty()) config["tips_path"] = flags.tips;
  if (!flags.rules.empty()) config["rules_path"] = flags.rules;
  if (flags.oracle_schema) config["oracle_schema"] = true;
  return config.dump();
}

std::string build_tasks_spec(const CommonFlags& flags) {
  json spec = {{"dataset", flags.dataset}};
  if (flags.dataset == "bird") {
    spec["questions"] = flags.questions;
    spec["db_root"] = flags.db_root;
  } else if (flags.dataset == "spider2") {
    spec["root"] = flags.root;
  } else {
    spec["tasks_file"] = flags.tasks_file;
  }
  return spec.dump();
}

int finish(apex_engine* engine, apex_status status, char* report) {
  if (report) {
    std::cout << report << "\n";
    apex_string_free(report);
  }
  if (status != APEX_OK && status != APEX_ERROR_PARTIAL)
    std::cerr << "error: " << apex_engine_last_error(engine) << "\n";
  apex_engine_close(engine);
  if (status == APEX_OK) return 0;
  if (status == APEX_ERROR_PARTIAL) return 2;
  return 1;
}

int run_repl(const CommonFlags& flags, const std::string& db_path) {
  apex_engine* engine = nullptr;
  if (apex_engine_open_json(build_config_json(flags).c_str(), &engine) != APEX_OK) {
    std::cerr << "error: invalid configuration\n";
    return 1;
  }
  apex_session* session = nullptr;
  if (apex_session_open(engine, db_path.c_str(), &session) != APEX_OK) {
    std::cerr << "error: " << apex_engine_last_error(engine) << "\n";
    apex_engine_close(engine);
    return 1;
  }
  std::cout << "apex repl over " << db_path << " (:quit to exit, :trace for the last run)\n";
  std::string line;
  while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
    if (line == ":quit" || line == ":q") break;
    if (line.empty()) continue;
    if (line == ":trace") {
      char* trace = nullptr;
      apex_session_trace(session, &trace);
      std::cout << (trace ? trace : "[]") << "\n";
      apex_string_free(trace);
      continue;
    }
    char* answer = nullptr;
    apex_status status = apex_session_ask(session, line.c_str(), &answer);
    if (status != APEX_OK) {
      std::cout << "error: " << apex_engine_last_error(engine) << "\n";
      continue;
    }
    json doc = json::parse(answer);
    apex_string_free(answer);
    std::cout << "SQL:\n" << doc.value("sql", "") << "\n\n"
              << doc.value("result", "") << "\n"
              << doc.value("summary", "") << "\n";
  }
  apex_session_close(session);
  apex_engine_close(engine);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agentic text-to-SQL engine"};
  app.require_subcommand(1);

  CommonFlags link_flags, gen_flags, eval_flags, run_flags, repl_flags;
  std::string repl_db;

  CLI::App* link = app.add_subcommand("link", "Schema linking only");
  add_common(link, &link_flags, true);
  CLI::App* generate = app.add_subcommand("generate", "SQL generation (needs D* source)");
  add_common(generate, &gen_flags, true);
  std::string link_dir;
  generate->add_option("--link-dir", link_dir, "tasks/ directory of an earlier link run");
  CLI::App* eval = app.add_subcommand("eval", "Score saved answers against golds");
  add_common(eval, &eval_flags, true);
  CLI::App* run = app.add_subcommand("run", "Both stages plus eval");
  add_common(run, &run_flags, true);
  CLI::App* repl = app.add_subcommand("repl", "Interactive questions against a database");
  add_common(repl, &repl_flags, false);
  repl->add_option("database", repl_db, "SQLite database file")->required();

  CLI11_PARSE(app, argc, argv);

  if (repl->parsed()) return run_repl(repl_flags, repl_db);

  const CommonFlags& flags = link->parsed()   ? link_flags
                             : generate->parsed() ? gen_flags
                             : eval->parsed()     ? eval_flags
                                                  : run_flags;
  std::string config_json = build_config_json(flags);
  if (generate->parsed() && !link_dir.empty()) {
    json config = json::parse(config_json);
    config["link_reports_dir"] = link_dir;
    config_json = config.dump();
  }
  apex_engine* engine = nullptr;
  if (apex_engine_open_json(config_json.c_str(), &engine) != APEX_OK) {
    std::cerr << "error: invalid configuration\n";
    return 1;
  }
  std::string tasks_spec = build_tasks_spec(flags);
  char* report = nullptr;
  apex_status status;
  if (link->parsed())
    status = apex_engine_run_link(engine, tasks_spec.c_str(), &report);
  else if (generate->parsed())
    status = apex_engine_run_generate(engine, tasks_spec.c_str(), &report);
  else if (eval->parsed())
    status = apex_engine_run_eval(engine, tasks_spec.c_str(), &report);
  else
    status = apex_engine_run_pipeline(engine, tasks_spec.c_str(), &report);
  return finish(engine, status, report);
}
