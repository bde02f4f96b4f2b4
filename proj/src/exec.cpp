#include "apexsql/exec.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace apexsql {

Value Value::null() { return Value{}; }
Value Value::integer(int64_t v) { return Value{Kind::kInt, v, 0.0, {}}; }
Value Value::real(double v) { return Value{Kind::kReal, 0, v, {}}; }
Value Value::text(std::string v) { return Value{Kind::kText, 0, 0.0, std::move(v)}; }
Value Value::blob(std::string hex) { return Value{Kind::kBlob, 0, 0.0, std::move(hex)}; }

std::string Value::display() const {
  switch (kind) {
    case Kind::kNull: return "NULL";
    case Kind::kInt: return std::to_string(i);
    case Kind::kReal: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.12g", r);
      return buf;
    }
    case Kind::kText: return s;
    case Kind::kBlob: return "x'" + s + "'";
  }
  return "";
}

const char* exec_error_kind_name(ExecErrorKind k) {
  switch (k) {
    case ExecErrorKind::kSyntax: return "syntax";
    case ExecErrorKind::kMissingObject: return "missing_object";
    case ExecErrorKind::kTypeError: return "type_error";
    case ExecErrorKind::kTimeout: return "timeout";
    case ExecErrorKind::kWriteRejected: return "write_rejected";
    case ExecErrorKind::kOther: return "other";
  }
  return "other";
}

namespace {

class SqliteDialect : public Dialect {
 public:
  std::string name() const override { return "sqlite"; }
  std::string quote_identifier(std::string_view ident) const override {
    std::string out = "\"";
    for (char c : ident) {
      out += c;
      if (c == '"') out += '"';
    }
    out += '"';
    return out;
  }
  std::string limit_clause(long n) const override {
    return "LIMIT " + std::to_string(n);
  }
  std::string json_path(std::string_view column, std::string_view path) const override {
    return "json_extract(" + std::string(column) + ", '$." + std::string(path) + "')";
  }
};

// Statement classes rejected outright in query-only modes; anything else
// still has to pass sqlite3_stmt_readonly after preparing.
const std::set<std::string>& write_keywords() {
  static const std::set<std::string> kw = {
      "INSERT", "UPDATE", "DELETE",  "DROP",     "CREATE",  "ALTER",
      "ATTACH", "DETACH", "PRAGMA",  "VACUUM",   "REINDEX", "REPLACE",
      "BEGIN",  "COMMIT", "ROLLBACK", "SAVEPOINT", "RELEASE", "ANALYZE"};
  return kw;
}

ExecErrorKind classify_sqlite_error(int code, const std::string& message) {
  std::string lower = to_lower(message);
  if (lower.find("no such table") != std::string::npos ||
      lower.find("no such column") != std::string::npos ||
      lower.find("no such function") != std::string::npos)
    return ExecErrorKind::kMissingObject;
  if (code == SQLITE_MISMATCH || lower.find("datatype mismatch") != std::string::npos)
    return ExecErrorKind::kTypeError;
  if (code == SQLITE_ERROR) return ExecErrorKind::kSyntax;
  return ExecErrorKind::kOther;
}

struct TimeoutGuard {
  std::chrono::steady_clock::time_point deadline;
  bool fired = false;
};

int progress_callback(void* ctx) {
  auto* guard = static_cast<TimeoutGuard*>(ctx);
  if (std::chrono::steady_clock::now() >= guard->deadline) {
    guard->fired = true;
    return 1;  // interrupt
  }
  return 0;
}

std::string hex_encode(const void* data, int n) {
  static const char* digits = "0123456789abcdef";
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::string out;
  out.reserve(size_t(n) * 2);
  for (int i = 0; i < n; ++i) {
    out += digits[bytes[i] >> 4];
    out += digits[bytes[i] & 0xf];
  }
  return out;
}

}  // namespace

const Dialect& sqlite_dialect() {
  static SqliteDialect d;
  return d;
}

Database::Database(sqlite3* db, std::string path, bool read_only)
    : db_(db), path_(std::move(path)), read_only_(read_only) {}

Database::Database(Database&& o) noexcept
    : db_(o.db_), path_(std::move(o.path_)), read_only_(o.read_only_) {
  o.db_ = nullptr;
}

Database& Database::operator=(Database&& o) noexcept {
  if (this != &o) {
    if (db_) sqlite3_close_v2(db_);
    db_ = o.db_;
    path_ = std::move(o.path_);
    read_only_ = o.read_only_;
    o.db_ = nullptr;
  }
  return *this;
}

Database::~Database() {
  if (db_) sqlite3_close_v2(db_);
}

Database Database::open_read_only(const std::string& path) {
  sqlite3* db = nullptr;
  int rc = sqlite3_open_v2(path.c_str(), &db, SQLITE_OPEN_READONLY, nullptr);
  if (rc != SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "cannot open database";
    if (db) sqlite3_close_v2(db);
    throw std::runtime_error("open_read_only(" + path + "): " + msg);
  }
  return Database(db, path, true);
}

Database Database::open_read_write(const std::string& path) {
  sqlite3* db = nullptr;
  int rc = sqlite3_open_v2(path.c_str(), &db,
                           SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr);
  if (rc != SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "cannot open database";
    if (db) sqlite3_close_v2(db);
    throw std::runtime_error("open_read_write(" + path + "): " + msg);
  }
  return Database(db, path, false);
}

Database Database::open_memory() {
  sqlite3* db = nullptr;
  if (sqlite3_open(":memory:", &db) != SQLITE_OK)
    throw std::runtime_error("cannot open in-memory database");
  return Database(db, ":memory:", false);
}

ExecOutcome Database::execute(const std::string& sql, ExecMode mode,
                              const ExecOptions& options) const {
  if (!db_) return ExecError{ExecErrorKind::kOther, "database not open"};

  std::string keyword = leading_keyword(sql);
  if (keyword.empty())
    return ExecError{ExecErrorKind::kSyntax, "empty statement"};

  bool want_query_only = (mode == ExecMode::kReadOnly) ||
                         (mode == ExecMode::kFinal && !options.allow_writes);
  if (want_query_only && write_keywords().count(keyword)) {
    return ExecError{ExecErrorKind::kWriteRejected,
                     "statement class '" + keyword + "' rejected in " +
                         (mode == ExecMode::kReadOnly ? std::string("read-only")
                                                      : std::string("final")) +
                         " mode"};
  }

  sqlite3_stmt* stmt = nullptr;
  const char* tail = nullptr;
  int rc = sqlite3_prepare_v2(db_, sql.c_str(), -1, &stmt, &tail);
  if (rc != SQLITE_OK) {
    std::string msg = sqlite3_errmsg(db_);
    if (stmt) sqlite3_finalize(stmt);
    return ExecError{classify_sqlite_error(rc, msg), msg};
  }
  if (!stmt)
    return ExecError{ExecErrorKind::kSyntax, "no statement compiled"};
  if (tail && leading_keyword(tail).size() > 0) {
    sqlite3_finalize(stmt);
    return ExecError{ExecErrorKind::kWriteRejected,
                     "multiple statements are not allowed per execution"};
  }
  if (want_query_only && !sqlite3_stmt_readonly(stmt)) {
    sqlite3_finalize(stmt);
    return ExecError{ExecErrorKind::kWriteRejected,
                     "statement would write to the database"};
  }

  TimeoutGuard guard;
  guard.deadline = std::chrono::steady_clock::now() +
                   std::chrono::milliseconds(long(options.timeout_seconds * 1000));
  sqlite3_progress_handler(db_, 5000, progress_callback, &guard);

  ResultSet result;
  int ncols = sqlite3_column_count(stmt);
  for (int i = 0; i < ncols; ++i) {
    const char* name = sqlite3_column_name(stmt, i);
    result.columns.push_back(ResultColumn{name ? name : "", ""});
  }

  ExecOutcome outcome = result;  // replaced below
  for (;;) {
    rc = sqlite3_step(stmt);
    if (rc == SQLITE_ROW) {
      if (long(result.rows.size()) >= options.row_cap) {
        result.truncated = true;
        break;
      }
      std::vector<Value> row;
      row.reserve(ncols);
      for (int i = 0; i < ncols; ++i) {
        switch (sqlite3_column_type(stmt, i)) {
          case SQLITE_NULL: row.push_back(Value::null()); break;
          case SQLITE_INTEGER: row.push_back(Value::integer(sqlite3_column_int64(stmt, i))); break;
          case SQLITE_FLOAT: row.push_back(Value::real(sqlite3_column_double(stmt, i))); break;
          case SQLITE_TEXT: {
            const unsigned char* t = sqlite3_column_text(stmt, i);
            row.push_back(Value::text(t ? reinterpret_cast<const char*>(t) : ""));
            break;
          }
          case SQLITE_BLOB:
            row.push_back(Value::blob(hex_encode(sqlite3_column_blob(stmt, i),
                                                 sqlite3_column_bytes(stmt, i))));
            break;
        }
      }
      result.rows.push_back(std::move(row));
      continue;
    }
    if (rc == SQLITE_DONE) break;
    std::string msg = sqlite3_errmsg(db_);
    sqlite3_finalize(stmt);
    sqlite3_progress_handler(db_, 0, nullptr, nullptr);
    if (guard.fired || rc == SQLITE_INTERRUPT)
      return ExecError{ExecErrorKind::kTimeout,
                       "query exceeded " + std::to_string(options.timeout_seconds) + "s"};
    return ExecError{classify_sqlite_error(rc, msg), msg};
  }
  sqlite3_finalize(stmt);
  sqlite3_progress_handler(db_, 0, nullptr, nullptr);

  // Infer column types from the values seen.
  for (int i = 0; i < ncols; ++i) {
    bool any = false, all_int = true, all_num = true, any_text = false, any_blob = false;
    for (const auto& row : result.rows) {
      const Value& v = row[i];
      if (v.is_null()) continue;
      any = true;
      if (v.kind != Value::Kind::kInt) all_int = false;
      if (!v.is_numeric()) all_num = false;
      if (v.kind == Value::Kind::kText) any_text = true;
      if (v.kind == Value::Kind::kBlob) any_blob = true;
    }
    std::string type = "null";
    if (any) {
      if (all_int) type = "integer";
      else if (all_num) type = "real";
      else if (any_blob && !any_text && !all_num) type = "blob";
      else if (any_text && !any_blob) type = "text";
      else type = "mixed";
    }
    result.columns[i].inferred_type = type;
  }
  return result;
}

ExecOutcome Database::raw_query(const std::string& sql) const {
  if (!db_) return ExecError{ExecErrorKind::kOther, "database not open"};
  sqlite3_stmt* stmt = nullptr;
  int rc = sqlite3_prepare_v2(db_, sql.c_str(), -1, &stmt, nullptr);
  if (rc != SQLITE_OK) {
    std::string msg = sqlite3_errmsg(db_);
    if (stmt) sqlite3_finalize(stmt);
    return ExecError{classify_sqlite_error(rc, msg), msg};
  }
  ResultSet result;
  int ncols = sqlite3_column_count(stmt);
  for (int i = 0; i < ncols; ++i) {
    const char* name = sqlite3_column_name(stmt, i);
    result.columns.push_back(ResultColumn{name ? name : "", ""});
  }
  while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
    std::vector<Value> row;
    for (int i = 0; i < ncols; ++i) {
      switch (sqlite3_column_type(stmt, i)) {
        case SQLITE_NULL: row.push_back(Value::null()); break;
        case SQLITE_INTEGER: row.push_back(Value::integer(sqlite3_column_int64(stmt, i))); break;
        case SQLITE_FLOAT: row.push_back(Value::real(sqlite3_column_double(stmt, i))); break;
        case SQLITE_TEXT: {
          const unsigned char* t = sqlite3_column_text(stmt, i);
          row.push_back(Value::text(t ? reinterpret_cast<const char*>(t) : ""));
          break;
        }
        case SQLITE_BLOB:
          row.push_back(Value::blob(hex_encode(sqlite3_column_blob(stmt, i),
                                               sqlite3_column_bytes(stmt, i))));
          break;
      }
    }
    result.rows.push_back(std::move(row));
  }
  std::string msg = rc == SQLITE_DONE ? "" : sqlite3_errmsg(db_);
  sqlite3_finalize(stmt);
  if (rc != SQLITE_DONE) return ExecError{classify_sqlite_error(rc, msg), msg};
  return result;
}

DatabaseSchema Database::introspect_schema(const std::string& name,
                                           int sample_cap) const {
  if (!db_) throw std::runtime_error("introspect_schema: database not open");
  std::vector<Table> tables;

  auto query = [&](const std::string& sql) {
    ExecOutcome out = raw_query(sql);
    if (auto* err = std::get_if<ExecError>(&out))
      throw SchemaError(SchemaError::Kind::kMalformed,
                        "introspection failed: " + err->message);
    return std::get<ResultSet>(std::move(out));
  };

  ResultSet names = query(
      "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE "
      "'sqlite_%' ORDER BY rowid");
  const Dialect& dialect = sqlite_dialect();
  for (const auto& row : names.rows) {
    Table t;
    t.name = row[0].s;
    std::string quoted = dialect.quote_identifier(t.name);
    ResultSet info = query("PRAGMA table_info(" + quoted + ")");
    for (const auto& col : info.rows) {
      Column c;
      c.name = col[1].display();
      c.data_type = col[2].display();
      if (col[5].kind == Value::Kind::kInt && col[5].i > 0)
        t.primary_key.push_back(c.name);
      t.columns.push_back(std::move(c));
    }
    ResultSet fks = query("PRAGMA foreign_key_list(" + quoted + ")");
    for (const auto& fk : fks.rows)
      t.foreign_keys.push_back(ForeignKey{fk[3].display(), fk[2].display(),
                                          fk[4].is_null() ? "" : fk[4].display()});
    if (sample_cap > 0 && !t.columns.empty()) {
      ResultSet sample = query("SELECT * FROM " + quoted + " " +
                               dialect.limit_clause(sample_cap));
      for (size_t ci = 0; ci < t.columns.size() && ci < sample.columns.size(); ++ci)
        for (const auto& srow : sample.rows)
          t.columns[ci].sample_values.push_back(srow[ci].display());
    }
    tables.push_back(std::move(t));
  }
  return DatabaseSchema(name, std::move(tables));
}

namespace {

std::string normalize_cell(const Value& v, int float_precision) {
  switch (v.kind) {
    case Value::Kind::kNull: return "\x01<null>";
    case Value::Kind::kBlob: return "b:" + v.s;
    case Value::Kind::kText: return "t:" + trim(v.s);
    case Value::Kind::kInt:
    case Value::Kind::kReal: {
      double d = v.as_double();
      if (std::isnan(d)) return "n:nan";
      if (std::isinf(d)) return d > 0 ? "n:inf" : "n:-inf";
      double rounded = d;
      if (d != 0.0) {
        int magnitude = int(std::floor(std::log10(std::fabs(d))));
        double scale = std::pow(10.0, float_precision - 1 - magnitude);
        rounded = std::round(d * scale) / scale;
      }
      if (std::fabs(rounded) < 9.007199254740992e15 &&
          rounded == std::floor(rounded)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "n:%.0f", rounded);
        return buf;
      }
      char buf[64];
      std::snprintf(buf, sizeof(buf), "n:%.*g", float_precision, rounded);
      return buf;
    }
  }
  return "";
}

}  // namespace

Summarized summarize(const ResultSet& result) {
  if (result.rows.size() <= 30) return result;
  ResultSummary summary;
  summary.columns = result.columns;
  summary.row_count = long(result.rows.size());
  for (size_t i = 0; i < result.rows.size() && i < 10; ++i)
    summary.head_rows.push_back(result.rows[i]);
  for (size_t c = 0; c < result.columns.size(); ++c) {
    ColumnStats st;
    st.name = result.columns[c].name;
    st.inferred_type = result.columns[c].inferred_type;
    std::set<std::string> distinct;
    long nulls = 0;
    bool numeric = true, any = false;
    double num_min = 0, num_max = 0;
    std::string txt_min, txt_max;
    bool txt_any = false;
    for (const auto& row : result.rows) {
      const Value& v = row[c];
      if (v.is_null()) {
        ++nulls;
        continue;
      }
      distinct.insert(normalize_cell(v, 12));
      if (v.is_numeric()) {
        double d = v.as_double();
        if (!any) { num_min = num_max = d; }
        else { num_min = std::min(num_min, d); num_max = std::max(num_max, d); }
        any = true;
      } else {
        numeric = false;
        if (v.kind == Value::Kind::kText) {
          if (!txt_any) { txt_min = txt_max = v.s; txt_any = true; }
          else { txt_min = std::min(txt_min, v.s); txt_max = std::max(txt_max, v.s); }
        }
      }
    }
    st.distinct_count = long(distinct.size());
    st.null_ratio = result.rows.empty() ? 0.0 : double(nulls) / double(result.rows.size());
    if (numeric && any) {
      st.min_value = Value::real(num_min).display();
      st.max_value = Value::real(num_max).display();
      // Integral bounds render without a fractional part.
      if (num_min == std::floor(num_min)) st.min_value = std::to_string(int64_t(num_min));
      if (num_max == std::floor(num_max)) st.max_value = std::to_string(int64_t(num_max));
    } else if (txt_any) {
      st.min_value = txt_min;
      st.max_value = txt_max;
    }
    summary.stats.push_back(std::move(st));
  }
  return summary;
}

std::string canonicalize(const ResultSet& result, int float_precision) {
  if (result.rows.empty()) return "<empty-result>";
  std::vector<std::string> rows;
  rows.reserve(result.rows.size());
  for (const auto& row : result.rows) {
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (const auto& v : row) cells.push_back(normalize_cell(v, float_precision));
    std::sort(cells.begin(), cells.end());
    std::string joined;
    for (const auto& c : cells) {
      joined += c;
      joined += '\x1f';
    }
    rows.push_back(std::move(joined));
  }
  std::sort(rows.begin(), rows.end());
  std::string key;
  for (const auto& r : rows) {
    key += r;
    key += '\x1e';
  }
  return key;
}

namespace {

std::multiset<std::string> column_multiset(const ResultSet& r, size_t col,
                                           int float_precision) {
  std::multiset<std::string> out;
  for (const auto& row : r.rows) out.insert(normalize_cell(row[col], float_precision));
  return out;
}

}  // namespace

bool compare_results(const ResultSet& pred, const ResultSet& gold, CompareMode mode,
                     int float_precision) {
  if (mode == CompareMode::kStrict) {
    if (pred.columns.size() != gold.columns.size()) return false;
    return canonicalize(pred, float_precision) == canonicalize(gold, float_precision);
  }
  // Relaxed: row counts equal, and every gold column matches a distinct
  // pred column by exact value-multiset equality (greedy in column order).
  if (pred.rows.size() != gold.rows.size()) return false;
  if (pred.columns.size() < gold.columns.size()) return false;
  std::vector<std::multiset<std::string>> pred_cols;
  for (size_t c = 0; c < pred.columns.size(); ++c)
    pred_cols.push_back(column_multiset(pred, c, float_precision));
  std::vector<bool> used(pred.columns.size(), false);
  for (size_t g = 0; g < gold.columns.size(); ++g) {
    auto want = column_multiset(gold, g, float_precision);
    bool matched = false;
    for (size_t p = 0; p < pred_cols.size(); ++p) {
      if (used[p] || pred_cols[p] != want) continue;
      used[p] = true;
      matched = true;
      break;
    }
    if (!matched) return false;
  }
  return true;
}

std::string render_result(const ResultSet& result, size_t max_rows) {
  std::ostringstream out;
  out << "columns: ";
  for (size_t i = 0; i < result.columns.size(); ++i) {
    if (i) out << ", ";
    out << result.columns[i].name;
  }
  out << "\n";
  size_t shown = std::min(result.rows.size(), max_rows);
  for (size_t r = 0; r < shown; ++r) {
    out << "  ";
    for (size_t c = 0; c < result.rows[r].size(); ++c) {
      if (c) out << " | ";
      out << result.rows[r][c].display();
    }
    out << "\n";
  }
  out << "(" << result.rows.size() << (result.truncated ? "+ rows, truncated" : " rows")
      << ")";
  if (shown < result.rows.size() && !result.truncated)
    out << " showing first " << shown;
  return out.str();
}

std::string render_summarized(const Summarized& value) {
  if (const auto* rs = std::get_if<ResultSet>(&value)) return render_result(*rs);
  const auto& s = std::get<ResultSummary>(value);
  std::ostringstream out;
  out << "large result: " << s.row_count << " rows, showing top 10\n";
  ResultSet head;
  head.columns = s.columns;
  head.rows = s.head_rows;
  out << render_result(head, 10) << "\n";
  out << "column statistics:\n";
  for (const auto& st : s.stats) {
    out << "  " << st.name << ": type=" << st.inferred_type
        << " distinct=" << st.distinct_count;
    char ratio[32];
    std::snprintf(ratio, sizeof(ratio), "%.4f", st.null_ratio);
    out << " null_ratio=" << ratio;
    if (st.min_value) out << " min=" << *st.min_value;
    if (st.max_value) out << " max=" << *st.max_value;
    out << "\n";
  }
  return out.str();
}

std::string render_outcome(const ExecOutcome& outcome) {
  if (const auto* err = std::get_if<ExecError>(&outcome))
    return std::string("error (") + exec_error_kind_name(err->kind) + "): " + err->message;
  return render_summarized(summarize(std::get<ResultSet>(outcome)));
}

}  // namespace apexsql
