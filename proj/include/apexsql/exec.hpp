#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "apexsql/schema.hpp"

struct sqlite3;

namespace apexsql {

// A single cell. Blobs are carried as their hex encoding with a marker so
// result handling stays purely value-based.
struct Value {
  enum class Kind { kNull, kInt, kReal, kText, kBlob };
  Kind kind = Kind::kNull;
  int64_t i = 0;
  double r = 0.0;
  std::string s;

  static Value null();
  static Value integer(int64_t v);
  static Value real(double v);
  static Value text(std::string v);
  static Value blob(std::string hex);

  bool is_null() const { return kind == Kind::kNull; }
  bool is_numeric() const { return kind == Kind::kInt || kind == Kind::kReal; }
  double as_double() const { return kind == Kind::kInt ? double(i) : r; }
  // Display form used in observations and the repl table.
  std::string display() const;
};

struct ResultColumn {
  std::string name;
  std::string inferred_type;
};

struct ResultSet {
  std::vector<ResultColumn> columns;
  std::vector<std::vector<Value>> rows;
  bool truncated = false;

  size_t row_count() const { return rows.size(); }
};

enum class ExecErrorKind { kSyntax, kMissingObject, kTypeError, kTimeout, kWriteRejected, kOther };

struct ExecError {
  ExecErrorKind kind = ExecErrorKind::kOther;
  std::string message;
};

const char* exec_error_kind_name(ExecErrorKind k);

using ExecOutcome = std::variant<ResultSet, ExecError>;

struct ColumnStats {
  std::string name;
  std::string inferred_type;
  long distinct_count = 0;
  double null_ratio = 0.0;
  std::optional<std::string> min_value;
  std::optional<std::string> max_value;
};

struct ResultSummary {
  std::vector<ResultColumn> columns;
  std::vector<std::vector<Value>> head_rows;  // first 10
  long row_count = 0;
  std::vector<ColumnStats> stats;
};

using Summarized = std::variant<ResultSet, ResultSummary>;

enum class ExecMode { kReadOnly, kFinal };
enum class CompareMode { kStrict, kRelaxed };

// Dialect abstraction point: identifier quoting, LIMIT form, and JSON-path
// access differ between the embedded dialect and cloud warehouses. Only
// the embedded (SQLite) dialect ships.
class Dialect {
 public:
  virtual ~Dialect() = default;
  virtual std::string name() const = 0;
  virtual std::string quote_identifier(std::string_view ident) const = 0;
  virtual std::string limit_clause(long n) const = 0;
  virtual std::string json_path(std::string_view column, std::string_view path) const = 0;
};

const Dialect& sqlite_dialect();

struct ExecOptions {
  double timeout_seconds = 30.0;
  long row_cap = 10000;
  bool allow_writes = false;  // honored only in kFinal mode
};

// RAII handle over one embedded-database connection. Exploration opens
// read-only connections; parallel tasks each open their own.
class Database {
 public:
  static Database open_read_only(const std::string& path);
  static Database open_read_write(const std::string& path);
  static Database open_memory();

  Database() = default;
  Database(Database&&) noexcept;
  Database& operator=(Database&&) noexcept;
  ~Database();
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;

  bool is_open() const { return db_ != nullptr; }
  const std::string& path() const { return path_; }

  // Errors come back as values; nothing SQL-related throws through the
  // agent loop.
  ExecOutcome execute(const std::string& sql, ExecMode mode,
                      const ExecOptions& options = {}) const;

  // Schema introspection for live database files; fills sample values by
  // reading up to `sample_cap` rows per table.
  DatabaseSchema introspect_schema(const std::string& name, int sample_cap = 3) const;

 private:
  explicit Database(sqlite3* db, std::string path, bool read_only);
  // Introspection path without the statement-class filter (PRAGMA reads);
  // never reachable from agent-facing callers.
  ExecOutcome raw_query(const std::string& sql) const;
  sqlite3* db_ = nullptr;
  std::string path_;
  bool read_only_ = false;
};

// σ compression: results of 30 rows or fewer pass through unchanged;
// larger results are reduced to the top 10 rows plus per-column statistics.
Summarized summarize(const ResultSet& result);

// Order-independent canonical key: float normalization, per-row cell
// multisets, sorted rows. Identical logical results share a key.
std::string canonicalize(const ResultSet& result, int float_precision = 6);

bool compare_results(const ResultSet& pred, const ResultSet& gold, CompareMode mode,
                     int float_precision = 6);

// Plain-text rendering for observations and the repl.
std::string render_result(const ResultSet& result, size_t max_rows = 30);
std::string render_summarized(const Summarized& value);
std::string render_outcome(const ExecOutcome& outcome);

}  // namespace apexsql
