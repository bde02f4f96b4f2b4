#include "apexsql/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <future>
#include <sstream>

namespace apexsql {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? v : fallback;
}

}  // namespace

RunConfig load_config_json(const json& doc) {
  RunConfig config;
  if (doc.contains("backend")) {
    const json& b = doc.at("backend");
    std::string kind = b.value("kind", "canned");
    if (kind == "replay") config.backend.kind = BackendSpec::Kind::kReplay;
    else if (kind == "http") config.backend.kind = BackendSpec::Kind::kHttp;
    else if (kind == "canned") config.backend.kind = BackendSpec::Kind::kCanned;
    else throw std::runtime_error("unknown backend kind: " + kind);
    config.backend.replay_path = b.value("script", "");
    config.backend.base_url = b.value("base_url", "");
    config.backend.model = b.value("model", "");
    std::string key_env = b.value("api_key_env", "APEX_API_KEY");
    config.backend.api_key = env_or(key_env.c_str(), "");
  }
  // Secrets and endpoint come from the environment when present.
  config.backend.base_url = env_or("APEX_BASE_URL", config.backend.base_url);
  config.backend.model = env_or("APEX_MODEL", config.backend.model);
  if (config.backend.kind == BackendSpec::Kind::kReplay &&
      config.backend.replay_path.empty())
    throw std::runtime_error("replay backend requires backend.script");
  if (config.backend.kind == BackendSpec::Kind::kHttp &&
      !config.backend.replay_path.empty())
    throw std::runtime_error("replay script and live backend are mutually exclusive");

  config.n_samples = doc.value("n_samples", 8);
  if (doc.contains("mode") && !doc.at("mode").is_null()) {
    std::string mode = doc.at("mode").get<std::string>();
    if (mode == "strict") config.mode = CompareMode::kStrict;
    else if (mode == "relaxed") config.mode = CompareMode::kRelaxed;
    else throw std::runtime_error("unknown mode: " + mode);
  }
  config.out_dir = doc.value("out_dir", "out");
  config.run_id = doc.value("run_id", "");
  config.task_parallelism = doc.value("task_parallelism", 4);
  config.oracle_schema = doc.value("oracle_schema", false);
  config.link_reports_dir = doc.value("link_reports_dir", "");
  config.tips_path = doc.value("tips_path", "");
  config.rules_path = doc.value("rules_path", "");
  if (doc.contains("link")) {
    const json& l = doc.at("link");
    config.link.plan_samples = l.value("plan_samples", config.link.plan_samples);
    config.link.plan_temperature = l.value("plan_temperature", config.link.plan_temperature);
    config.link.aggregate_temperature =
        l.value("aggregate_temperature", config.link.aggregate_temperature);
    config.link.min_batch_tokens = l.value("min_batch_tokens", config.link.min_batch_tokens);
    config.link.max_batch_tokens = l.value("max_batch_tokens", config.link.max_batch_tokens);
    config.link.max_refine_rounds = l.value("max_refine_rounds", config.link.max_refine_rounds);
    config.link.profile_query_cap = l.value("profile_query_cap", config.link.profile_query_cap);
    config.link.profile_parallelism =
        l.value("profile_parallelism", config.link.profile_parallelism);
    config.link.exec_timeout_seconds =
        l.value("exec_timeout_seconds", config.link.exec_timeout_seconds);
    config.link.critical_rules = l.value("critical_rules", config.link.critical_rules);
  }
  if (doc.contains("agent")) {
    const json& a = doc.at("agent");
    config.agent.budget.max_actions = a.value("max_actions", config.agent.budget.max_actions);
    config.agent.budget.max_tokens = a.value("max_tokens", config.agent.budget.max_tokens);
    config.agent.budget.force_sql_actions =
        a.value("force_sql_actions", config.agent.budget.force_sql_actions);
    config.agent.budget.force_sql_tokens =
        a.value("force_sql_tokens", config.agent.budget.force_sql_tokens);
    config.agent.consolidate_threshold_tokens =
        a.value("consolidate_threshold_tokens", config.agent.consolidate_threshold_tokens);
    config.agent.exec_timeout_seconds =
        a.value("exec_timeout_seconds", config.agent.exec_timeout_seconds);
    config.agent.result_row_cap = a.value("result_row_cap", config.agent.result_row_cap);
    config.agent.allow_writes_final =
        a.value("allow_writes_final", config.agent.allow_writes_final);
  }
  if (config.agent.budget.force_sql_actions >= config.agent.budget.max_actions ||
      config.agent.budget.force_sql_tokens >= config.agent.budget.max_tokens)
    throw std::runtime_error("force thresholds must sit below the hard budgets");
  return config;
}

RunConfig load_config_file(const std::string& path) {
  return load_config_json(json::parse(read_text_file(path)));
}

json config_to_json(const RunConfig& config) {
  json b;
  switch (config.backend.kind) {
    case BackendSpec::Kind::kReplay: b["kind"] = "replay"; break;
    case BackendSpec::Kind::kHttp: b["kind"] = "http"; break;
    case BackendSpec::Kind::kCanned: b["kind"] = "canned"; break;
  }
  b["script"] = config.backend.replay_path;
  b["base_url"] = config.backend.base_url;
  b["model"] = config.backend.model;  // the key itself never lands in files
  json doc;
  doc["backend"] = b;
  doc["n_samples"] = config.n_samples;
  if (config.mode)
    doc["mode"] = *config.mode == CompareMode::kStrict ? "strict" : "relaxed";
  doc["out_dir"] = config.out_dir;
  doc["run_id"] = config.run_id;
  doc["task_parallelism"] = config.task_parallelism;
  doc["oracle_schema"] = config.oracle_schema;
  doc["link_reports_dir"] = config.link_reports_dir;
  doc["tips_path"] = config.tips_path;
  doc["rules_path"] = config.rules_path;
  doc["link"] = {{"plan_samples", config.link.plan_samples},
                 {"plan_temperature", config.link.plan_temperature},
                 {"aggregate_temperature", config.link.aggregate_temperature},
                 {"min_batch_tokens", config.link.min_batch_tokens},
                 {"max_batch_tokens", config.link.max_batch_tokens},
                 {"max_refine_rounds", config.link.max_refine_rounds},
                 {"profile_query_cap", config.link.profile_query_cap},
                 {"profile_parallelism", config.link.profile_parallelism}};
  doc["agent"] = {{"max_actions", config.agent.budget.max_actions},
                  {"max_tokens", config.agent.budget.max_tokens},
                  {"force_sql_actions", config.agent.budget.force_sql_actions},
                  {"force_sql_tokens", config.agent.budget.force_sql_tokens},
                  {"consolidate_threshold_tokens", config.agent.consolidate_threshold_tokens},
                  {"allow_writes_final", config.agent.allow_writes_final}};
  return doc;
}

CompareMode default_mode(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kBird: return CompareMode::kStrict;
    case DatasetKind::kSpider2: return CompareMode::kRelaxed;
    case DatasetKind::kNative: return CompareMode::kStrict;
  }
  return CompareMode::kStrict;
}

std::vector<TaskRecord> load_tasks_bird(const std::string& questions_path,
                                        const std::string& db_root) {
  json doc = json::parse(read_text_file(questions_path));
  std::vector<TaskRecord> tasks;
  int index = 0;
  for (const auto& item : doc) {
    TaskRecord task;
    task.question_id = item.contains("question_id")
                           ? (item.at("question_id").is_string()
                                  ? item.at("question_id").get<std::string>()
                                  : std::to_string(item.at("question_id").get<long>()))
                           : "q" + std::to_string(index);
    task.question = item.at("question").get<std::string>();
    task.evidence = item.value("evidence", "");
    std::string db_id = item.at("db_id").get<std::string>();
    task.database_path = (fs::path(db_root) / db_id / (db_id + ".sqlite")).string();
    task.golden_sql = item.value("SQL", item.value("sql", ""));
    if (item.contains("gold_columns"))
      for (const auto& gc : item.at("gold_columns"))
        task.gold_columns.push_back(
            ColumnRef::make(gc.at(0).get<std::string>(), gc.at(1).get<std::string>()));
    if (task.question.empty()) throw std::runtime_error("task with empty question");
    tasks.push_back(std::move(task));
    ++index;
  }
  return tasks;
}

std::vector<TaskRecord> load_tasks_spider2(const std::string& root) {
  std::vector<TaskRecord> tasks;
  std::vector<fs::path> folders;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) folders.push_back(entry.path());
  std::sort(folders.begin(), folders.end());
  for (const auto& folder : folders) {
    fs::path meta = folder / "task.json";
    if (!fs::exists(meta)) continue;
    json doc = json::parse(read_text_file(meta));
    TaskRecord task;
    task.question_id = doc.value("question_id", folder.filename().string());
    task.question = doc.at("question").get<std::string>();
    fs::path db = doc.at("database").get<std::string>();
    task.database_path = db.is_absolute() ? db.string() : (folder / db).string();
    if (fs::exists(folder / "gold.sql"))
      task.golden_sql = read_text_file(folder / "gold.sql");
    // Knowledge-doc naming varies across releases; glob markdown and note
    // multi-file cases rather than guessing a canonical name.
    std::vector<fs::path> docs;
    for (const auto& entry : fs::directory_iterator(folder))
      if (entry.path().extension() == ".md") docs.push_back(entry.path());
    std::sort(docs.begin(), docs.end());
    for (const auto& d : docs) {
      if (!task.evidence.empty()) task.evidence += "\n\n---\n\n";
      task.evidence += read_text_file(d);
      task.evidence_file += (task.evidence_file.empty() ? "" : ";") + d.filename().string();
    }
    if (docs.size() > 1)
      task.note = "multiple knowledge documents: " + task.evidence_file;
    if (doc.contains("gold_columns"))
      for (const auto& gc : doc.at("gold_columns"))
        task.gold_columns.push_back(
            ColumnRef::make(gc.at(0).get<std::string>(), gc.at(1).get<std::string>()));
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<TaskRecord> load_tasks_native(const json& list, const std::string& base_dir) {
  std::vector<TaskRecord> tasks;
  int index = 0;
  for (const auto& item : list) {
    TaskRecord task;
    task.question_id = item.value("question_id", "q" + std::to_string(index));
    task.question = item.at("question").get<std::string>();
    task.evidence = item.value("evidence", "");
    if (item.contains("evidence_file")) {
      fs::path p = item.at("evidence_file").get<std::string>();
      if (!p.is_absolute()) p = fs::path(base_dir) / p;
      task.evidence = read_text_file(p);
      task.evidence_file = p.string();
    }
    fs::path db = item.at("database").get<std::string>();
    task.database_path = db.is_absolute() ? db.string() : (fs::path(base_dir) / db).string();
    task.golden_sql = item.value("gold_sql", "");
    if (item.contains("gold_columns"))
      for (const auto& gc : item.at("gold_columns"))
        task.gold_columns.push_back(
            ColumnRef::make(gc.at(0).get<std::string>(), gc.at(1).get<std::string>()));
    // A missing database fails that one task at run time, not the batch.
    tasks.push_back(std::move(task));
    ++index;
  }
  return tasks;
}

std::vector<TaskRecord> load_tasks(const json& tasks_spec) {
  std::string dataset = tasks_spec.value("dataset", "native");
  if (dataset == "bird")
    return load_tasks_bird(tasks_spec.at("questions").get<std::string>(),
                           tasks_spec.at("db_root").get<std::string>());
  if (dataset == "spider2")
    return load_tasks_spider2(tasks_spec.at("root").get<std::string>());
  if (dataset == "native") {
    std::string base = tasks_spec.value("base_dir", ".");
    if (tasks_spec.contains("tasks_file")) {
      fs::path p = tasks_spec.at("tasks_file").get<std::string>();
      json doc = json::parse(read_text_file(p));
      return load_tasks_native(doc.is_array() ? doc : doc.at("tasks"),
                               p.parent_path().string());
    }
    return load_tasks_native(tasks_spec.at("tasks"), base);
  }
  throw std::runtime_error("unknown dataset kind: " + dataset);
}

Runner::Runner(RunConfig config) : config_(std::move(config)) {}

fs::path Runner::run_dir() const {
  std::string id = config_.run_id;
  if (id.empty()) {
    bool deterministic = config_.backend.kind != BackendSpec::Kind::kHttp;
    if (deterministic) {
      id = "run-replay";
    } else {
      auto now = std::chrono::system_clock::now().time_since_epoch();
      id = "run-" + std::to_string(
                        std::chrono::duration_cast<std::chrono::seconds>(now).count());
    }
  }
  return fs::path(config_.out_dir) / id;
}

CompareMode Runner::effective_mode(DatasetKind kind) const {
  return config_.mode ? *config_.mode : default_mode(kind);
}

std::shared_ptr<Backend> Runner::backend_for(const TaskRecord& task) const {
  switch (config_.backend.kind) {
    case BackendSpec::Kind::kReplay: {
      fs::path p = config_.backend.replay_path;
      if (fs::is_directory(p)) p = p / (task.question_id + ".json");
      return ReplayBackend::from_file(p.string());
    }
    case BackendSpec::Kind::kHttp:
      return std::make_shared<HttpBackend>(config_.backend.base_url,
                                           config_.backend.api_key,
                                           config_.backend.model);
    case BackendSpec::Kind::kCanned:
      return std::make_shared<CannedBackend>();
  }
  return std::make_shared<CannedBackend>();
}

SchemaSubset Runner::oracle_subset(const TaskRecord& task,
                                   const DatabaseSchema& schema) const {
  SchemaSubset subset(&schema);
  for (const auto& ref : task.gold_columns) subset.add(ref);
  if (subset.empty() && !task.golden_sql.empty()) {
    auto extraction = extract_gold_columns(task.golden_sql, schema);
    for (const auto& ref : extraction.refs) subset.add(ref);
  }
  return subset;
}

json Runner::link_one(const TaskRecord& task, fs::path task_dir) {
  Gateway gateway(backend_for(task));
  Database db = Database::open_read_only(task.database_path);
  DatabaseSchema schema = db.introspect_schema(fs::path(task.database_path).stem().string());
  SchemaLinker linker(gateway, schema, task.database_path, config_.link);
  std::string evidence = prefilter_evidence(gateway, task.question, task.evidence,
                                            task.evidence_file.empty() ? "knowledge.md"
                                                                       : task.evidence_file);
  LinkOutcome outcome = linker.link(task.question, evidence, task.question_id);
  write_text_file(task_dir / "link_report.json", outcome.report.dump(2) + "\n");
  gateway.write_trace((task_dir / "link_trace.jsonl").string());
  json entry = {{"question_id", task.question_id},
                {"columns", outcome.d_star.size()},
                {"pruned", outcome.d_pruned.size()},
                {"rounds", outcome.synthesis_rounds},
                {"tokens", gateway.ledger().total_tokens()}};
  if (!task.gold_columns.empty() || !task.golden_sql.empty()) {
    std::set<ColumnRef> gold(task.gold_columns.begin(), task.gold_columns.end());
    if (gold.empty()) {
      auto extraction = extract_gold_columns(task.golden_sql, schema);
      gold = extraction.refs;
    }
    if (!gold.empty()) {
      LinkingExample scored = score_linking(outcome.d_star, gold);
      entry["linking"] = {{"covered", scored.covered},
                          {"recall", scored.recall},
                          {"precision", scored.precision},
                          {"f1", scored.f1},
                          {"retained", scored.retained_count}};
    }
  }
  return entry;
}

json Runner::run_link(const std::vector<TaskRecord>& tasks) {
  fs::path dir = run_dir();
  fs::create_directories(dir);
  write_text_file(dir / "config.json", config_to_json(config_).dump(2) + "\n");

  std::vector<json> entries(tasks.size());
  std::vector<std::string> errors(tasks.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        entries[i] = link_one(tasks[i], dir / "tasks" / tasks[i].question_id);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        entries[i] = {{"question_id", tasks[i].question_id}, {"error", e.what()}};
      }
    }
  };
  size_t degree = std::min<size_t>(std::max(1, config_.task_parallelism), tasks.size());
  std::vector<std::future<void>> futures;
  for (size_t w = 0; w < degree; ++w)
    futures.push_back(std::async(std::launch::async, worker));
  for (auto& f : futures) f.get();

  std::vector<LinkingExample> scored;
  int failed = 0;
  for (size_t i = 0; i < tasks.size(); ++i) {
    if (!errors[i].empty()) ++failed;
    if (entries[i].contains("linking")) {
      LinkingExample e;
      e.covered = entries[i]["linking"]["covered"].get<bool>();
      e.recall = entries[i]["linking"]["recall"].get<double>();
      e.precision = entries[i]["linking"]["precision"].get<double>();
      e.f1 = entries[i]["linking"]["f1"].get<double>();
      e.retained_count = entries[i]["linking"]["retained"].get<long>();
      scored.push_back(e);
    }
  }
  json report = {{"command", "link"}, {"tasks", entries}, {"failed_tasks", failed}};
  if (!scored.empty()) {
    LinkingAggregate agg = aggregate_linking(scored);
    report["aggregate"] = {{"SRR", agg.srr},     {"NSR", agg.nsr}, {"NSP", agg.nsp},
                           {"NSF", agg.nsf},     {"C_bar", agg.c_bar},
                           {"scored_n", agg.n}};
  }
  write_text_file(dir / "link_aggregate.json", report.dump(2) + "\n");
  return report;
}

Runner::GenerateArtifacts Runner::generate_one(const TaskRecord& task, fs::path task_dir) {
  Gateway gateway(backend_for(task));
  Database db = Database::open_read_only(task.database_path);
  DatabaseSchema schema = db.introspect_schema(fs::path(task.database_path).stem().string());

  std::string evidence = prefilter_evidence(gateway, task.question, task.evidence,
                                            task.evidence_file.empty() ? "knowledge.md"
                                                                       : task.evidence_file);

  // D* comes from the oracle columns, an earlier link run, or a fresh
  // linking pass, in that order of preference.
  SchemaSubset d_star(&schema);
  std::vector<std::string> plan_steps;
  if (config_.oracle_schema) {
    d_star = oracle_subset(task, schema);
  } else if (!config_.link_reports_dir.empty()) {
    fs::path report_path =
        fs::path(config_.link_reports_dir) / task.question_id / "link_report.json";
    json report = json::parse(read_text_file(report_path));
    for (const auto& c : report.at("final_columns"))
      d_star.add(ColumnRef::make(c.at("table").get<std::string>(),
                                 c.at("column").get<std::string>()));
    for (const auto& s : report.value("plan", json::array()))
      plan_steps.push_back(s.get<std::string>());
  }
  SchemaLinker linker(gateway, schema, task.database_path, config_.link);
  if (d_star.empty()) {
    LinkOutcome outcome = linker.link(task.question, evidence, task.question_id);
    d_star = outcome.d_star;
    plan_steps = outcome.master_plan.steps;
  }
  if (plan_steps.empty()) {
    auto candidates = linker.generate_plans(task.question, evidence);
    plan_steps = linker.aggregate_plans(task.question, candidates).steps;
  }
  if (d_star.empty())
    for (const auto& ref : schema.all_refs()) d_star.add(ref);

  TipLibrary custom_library;
  RuleSet custom_rules;
  const TipLibrary* library = &TipLibrary::builtin();
  const RuleSet* rules = &RuleSet::builtin();
  if (!config_.tips_path.empty()) {
    custom_library = TipLibrary::from_file(config_.tips_path);
    library = &custom_library;
  }
  if (!config_.rules_path.empty()) {
    custom_rules = RuleSet::from_file(config_.rules_path);
    rules = &custom_rules;
  }
  RealizedPlan realized = realize_plan(gateway, task.question, evidence, d_star, plan_steps);
  std::vector<Tip> tips = retrieve_tips(*library, *rules, task.question, evidence,
                                        realized, d_star);
  std::string guidance = render_guidance(tips);

  // n concurrent episodes with independent read-only connections.
  int n = std::max(1, config_.n_samples);
  std::vector<EpisodeResult> episodes(n);
  auto scopes = gateway.make_scopes(n);
  {
    std::vector<std::future<void>> futures;
    for (int i = 0; i < n; ++i) {
      futures.push_back(std::async(std::launch::async, [&, i]() {
        SqlAgent agent(gateway, task.database_path, d_star, task.question, evidence,
                       guidance, config_.agent,
                       "sql_agent_step.ep" + std::to_string(i), &scopes[i]);
        episodes[i] = agent.run();
      }));
    }
    for (auto& f : futures) f.get();
  }

  GenerateArtifacts artifacts;
  for (int i = 0; i < n; ++i) {
    Candidate candidate;
    candidate.episode = episodes[i];
    if (episodes[i].final_result)
      candidate.canonical_key = canonicalize(*episodes[i].final_result);
    artifacts.bundle.candidates.push_back(std::move(candidate));
  }
  MajorityVoteSelector selector(&gateway);
  VoteOutcome voted = selector.select(artifacts.bundle, task.question,
                                      serialize_for_prompt(d_star, SerializeStyle::kCompact));
  artifacts.voted_index = voted.selected_index;
  artifacts.unselectable = voted.unselectable;

  // Artifacts: per-candidate SQL, the voted answer, action traces.
  std::string episodes_jsonl;
  json candidate_meta = json::array();
  for (int i = 0; i < n; ++i) {
    const auto& ep = episodes[i];
    write_text_file(task_dir / "candidates" / ("candidate_" + std::to_string(i + 1) + ".sql"),
                    ep.final_sql.value_or("") + "\n");
    candidate_meta.push_back({{"index", i},
                              {"confirmed", ep.confirmed},
                              {"failed", ep.failed},
                              {"rounds", ep.rounds},
                              {"query_count", ep.query_count},
                              {"actions", ep.actions},
                              {"tokens", ep.tokens}});
    for (const auto& record : ep.trace) {
      json line = record;
      line["episode"] = i;
      episodes_jsonl += line.dump() + "\n";
    }
  }
  const auto& final_episode = episodes[artifacts.voted_index];
  write_text_file(task_dir / "final.sql", final_episode.final_sql.value_or("") + "\n");
  write_text_file(task_dir / "episodes.jsonl", episodes_jsonl);
  gateway.write_trace((task_dir / "gen_trace.jsonl").string());

  artifacts.report = {{"question_id", task.question_id},
                      {"n", n},
                      {"voted_index", artifacts.voted_index},
                      {"unselectable", artifacts.unselectable},
                      {"tie_break_used", voted.tie_break_used},
                      {"final_sql", final_episode.final_sql.value_or("")},
                      {"plan", plan_steps},
                      {"tips", [&] {
                         json ids = json::array();
                         for (const auto& t : tips) ids.push_back(t.id);
                         return ids;
                       }()},
                      {"candidates", candidate_meta},
                      {"d_star_columns", d_star.size()},
                      {"token_usage", gateway.ledger().to_json()}};
  write_text_file(task_dir / "generate_report.json", artifacts.report.dump(2) + "\n");
  return artifacts;
}

json Runner::run_generate(const std::vector<TaskRecord>& tasks) {
  fs::path dir = run_dir();
  fs::create_directories(dir);
  write_text_file(dir / "config.json", config_to_json(config_).dump(2) + "\n");

  std::vector<json> entries(tasks.size());
  std::atomic<size_t> next{0};
  std::atomic<int> failed{0};
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        entries[i] = generate_one(tasks[i], dir / "tasks" / tasks[i].question_id).report;
      } catch (const std::exception& e) {
        failed.fetch_add(1);
        entries[i] = {{"question_id", tasks[i].question_id}, {"error", e.what()}};
      }
    }
  };
  size_t degree = std::min<size_t>(std::max(1, config_.task_parallelism), tasks.size());
  std::vector<std::future<void>> futures;
  for (size_t w = 0; w < degree; ++w)
    futures.push_back(std::async(std::launch::async, worker));
  for (auto& f : futures) f.get();

  json report = {{"command", "generate"}, {"tasks", entries}, {"failed_tasks", failed.load()}};
  write_text_file(dir / "generate_aggregate.json", report.dump(2) + "\n");
  return report;
}

json Runner::run_eval(const std::vector<TaskRecord>& tasks, const std::string& answers_dir) {
  fs::path dir = run_dir();
  fs::path answers = answers_dir.empty() ? (dir / "tasks") : fs::path(answers_dir);
  CompareMode mode = effective_mode(dataset_kind_);

  std::vector<CandidateBundle> bundles;
  std::vector<std::optional<ResultSet>> golds;
  std::vector<int> voted;
  std::vector<LinkingExample> linking_examples;
  json per_example = json::array();
  long total_tokens = 0;
  int io_failures = 0;

  for (const auto& task : tasks) {
    fs::path task_dir = answers / task.question_id;
    json entry = {{"question_id", task.question_id}};
    try {
      json gen = json::parse(read_text_file(task_dir / "generate_report.json"));
      Database db = Database::open_read_only(task.database_path);
      ExecOptions opts;
      opts.row_cap = 100000;

      // Linking metrics when a link report and gold columns are available.
      if (fs::exists(task_dir / "link_report.json")) {
        json link_report = json::parse(read_text_file(task_dir / "link_report.json"));
        std::set<ColumnRef> gold_cols(task.gold_columns.begin(), task.gold_columns.end());
        if (gold_cols.empty() && !task.golden_sql.empty()) {
          DatabaseSchema schema =
              db.introspect_schema(fs::path(task.database_path).stem().string());
          gold_cols = extract_gold_columns(task.golden_sql, schema).refs;
        }
        if (!gold_cols.empty()) {
          std::set<ColumnRef> pred;
          for (const auto& c : link_report.at("final_columns"))
            pred.insert(ColumnRef::make(c.at("table").get<std::string>(),
                                        c.at("column").get<std::string>()));
          LinkingExample scored = score_linking(pred, gold_cols);
          linking_examples.push_back(scored);
          entry["linking"] = {{"covered", scored.covered},
                              {"recall", scored.recall},
                              {"precision", scored.precision},
                              {"f1", scored.f1}};
        }
      }

      std::optional<ResultSet> gold;
      if (!task.golden_sql.empty()) {
        ExecOutcome outcome = db.execute(task.golden_sql, ExecMode::kReadOnly, opts);
        if (auto* rs = std::get_if<ResultSet>(&outcome)) gold = std::move(*rs);
        else
          entry["gold_error"] = std::get<ExecError>(outcome).message;
      } else {
        entry["gold_error"] = "no golden SQL for this task";
      }

      CandidateBundle bundle;
      int n = gen.value("n", 0);
      for (int i = 0; i < n; ++i) {
        Candidate c;
        fs::path sql_path =
            task_dir / "candidates" / ("candidate_" + std::to_string(i + 1) + ".sql");
        std::string sql = trim(read_text_file(sql_path));
        c.episode.final_sql = sql.empty() ? std::nullopt : std::make_optional(sql);
        c.episode.rounds = gen["candidates"][i].value("rounds", 0);
        c.episode.query_count = gen["candidates"][i].value("query_count", 0);
        c.episode.failed = gen["candidates"][i].value("failed", false);
        if (!sql.empty()) {
          ExecOutcome outcome = db.execute(sql, ExecMode::kReadOnly, opts);
          if (auto* rs = std::get_if<ResultSet>(&outcome)) {
            c.episode.final_result = std::move(*rs);
            c.canonical_key = canonicalize(*c.episode.final_result);
          }
        }
        bundle.candidates.push_back(std::move(c));
      }
      bundles.push_back(std::move(bundle));
      golds.push_back(std::move(gold));
      voted.push_back(gen.value("voted_index", 0));
      if (gen.contains("token_usage"))
        total_tokens += gen["token_usage"].value("total_tokens", 0L);
      entry["n"] = n;
    } catch (const std::exception& e) {
      ++io_failures;
      entry["error"] = e.what();
      bundles.push_back(CandidateBundle{});
      golds.push_back(std::nullopt);
      voted.push_back(0);
    }
    per_example.push_back(std::move(entry));
  }

  GenerationScore score = score_generation(bundles, golds, voted, mode);
  for (size_t i = 0; i < score.examples.size(); ++i) {
    per_example[i]["ex"] = score.examples[i].ex;
    per_example[i]["pass_at_k"] = score.examples[i].pass_at_k;
    per_example[i]["ex_at_k"] = score.examples[i].ex_at_k;
    per_example[i]["gold_failed"] = score.examples[i].gold_failed;
  }

  json aggregate = {{"EX", score.ex},
                    {"Pass_at_k", score.pass_at_k},
                    {"EX_at_k", score.ex_at_k},
                    {"R_bar", score.r_bar},
                    {"Q_bar", score.q_bar},
                    {"scored_n", score.scored_n},
                    {"tokens_per_query",
                     tasks.empty() ? 0.0 : double(total_tokens) / double(tasks.size())}};
  if (!linking_examples.empty()) {
    LinkingAggregate agg = aggregate_linking(linking_examples);
    aggregate["SRR"] = agg.srr;
    aggregate["NSR"] = agg.nsr;
    aggregate["NSP"] = agg.nsp;
    aggregate["NSF"] = agg.nsf;
    aggregate["C_bar"] = agg.c_bar;
  }
  const char* dataset_name = dataset_kind_ == DatasetKind::kBird      ? "bird"
                             : dataset_kind_ == DatasetKind::kSpider2 ? "spider2"
                                                                      : "native";
  json report = {{"command", "eval"},
                 {"dataset", dataset_name},
                 {"mode", mode == CompareMode::kStrict ? "strict" : "relaxed"},
                 {"nsf_aggregation", "macro-averaged per-example F1"},
                 {"per_example", per_example},
                 {"io_failures", io_failures},
                 {"aggregate", aggregate}};
  write_text_file(dir / "eval_report.json", report.dump(2) + "\n");
  write_text_file(dir / "eval_report.txt", render_eval_table(report));
  return report;
}

json Runner::run_pipeline(const std::vector<TaskRecord>& tasks) {
  json link_report = run_link(tasks);
  RunConfig gen_config = config_;
  gen_config.link_reports_dir = (run_dir() / "tasks").string();
  Runner gen_runner(gen_config);
  gen_runner.set_dataset_kind(dataset_kind_);
  json gen_report = gen_runner.run_generate(tasks);
  json eval_report = gen_runner.run_eval(tasks);
  json combined = {{"command", "run"},
                   {"link", link_report},
                   {"generate", gen_report},
                   {"eval", eval_report},
                   {"failed_tasks", link_report.value("failed_tasks", 0) +
                                        gen_report.value("failed_tasks", 0)}};
  write_text_file(run_dir() / "run_report.json", combined.dump(2) + "\n");
  return combined;
}

std::string render_eval_table(const json& eval_report) {
  std::ostringstream out;
  out << "metric            value\n";
  out << "----------------  ----------\n";
  const json& agg = eval_report.at("aggregate");
  auto row = [&](const std::string& name, const json& v) {
    char buf[64];
    if (v.is_number_float())
      std::snprintf(buf, sizeof(buf), "%.4f", v.get<double>());
    else
      std::snprintf(buf, sizeof(buf), "%s", v.dump().c_str());
    out << name;
    for (size_t i = name.size(); i < 18; ++i) out << ' ';
    out << buf << "\n";
  };
  for (const auto& [key, value] : agg.items()) row(key, value);
  out << "mode: " << eval_report.value("mode", "?") << "\n";
  return out.str();
}

}  // namespace apexsql
