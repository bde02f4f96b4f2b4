#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "apexsql/util.hpp"

namespace apexsql {

class SchemaError : public std::runtime_error {
 public:
  enum class Kind { kMalformed, kDuplicateName, kUnresolvedRef };
  SchemaError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Column {
  std::string name;
  std::string data_type;
  std::string description;
  std::vector<std::string> sample_values;
};

struct ForeignKey {
  std::string column;
  std::string foreign_table;
  std::string foreign_column;
};

struct Table {
  std::string name;
  std::vector<Column> columns;
  std::vector<std::string> primary_key;
  std::vector<ForeignKey> foreign_keys;

  const Column* find_column(std::string_view name) const;
};

// Normalized, case-insensitive column identity used by pruning, linking
// reports, and metric matching. Equality and ordering use the normalized
// (lowercased, quote-stripped) form.
struct ColumnRef {
  std::string table;
  std::string column;

  static std::string normalize(std::string_view s);
  static ColumnRef make(std::string_view table, std::string_view column);

  std::string str() const { return table + "." + column; }
  bool operator==(const ColumnRef& o) const = default;
  auto operator<=>(const ColumnRef& o) const = default;
};

class DatabaseSchema {
 public:
  DatabaseSchema() = default;
  // Validates uniqueness invariants; throws SchemaError on violation.
  DatabaseSchema(std::string name, std::vector<Table> tables);

  const std::string& name() const { return name_; }
  const std::vector<Table>& tables() const { return tables_; }
  const Table* find_table(std::string_view name) const;
  bool has_column(const ColumnRef& ref) const;
  size_t total_columns() const;
  std::set<ColumnRef> all_refs() const;

 private:
  std::string name_;
  std::vector<Table> tables_;
  std::map<std::string, size_t> by_name_;  // normalized name -> index
};

struct SubsetAnnotation {
  std::string reason;
  std::string observations;
};

// A set of column refs over a parent schema. Refs that do not resolve are
// rejected at insertion so the subset always stays consistent.
class SchemaSubset {
 public:
  SchemaSubset() = default;
  explicit SchemaSubset(const DatabaseSchema* schema) : schema_(schema) {}

  bool add(const ColumnRef& ref);
  bool add(const ColumnRef& ref, SubsetAnnotation note);
  bool contains(const ColumnRef& ref) const;
  void annotate(const ColumnRef& ref, SubsetAnnotation note);
  const SubsetAnnotation* annotation(const ColumnRef& ref) const;

  const std::set<ColumnRef>& refs() const { return refs_; }
  size_t size() const { return refs_.size(); }
  bool empty() const { return refs_.empty(); }
  const DatabaseSchema* schema() const { return schema_; }

  // Table names with at least one surviving column, in schema order.
  std::vector<std::string> tables_in_schema_order() const;
  // Columns of `table` present in the subset, in schema column order.
  std::vector<const Column*> columns_of(std::string_view table) const;

 private:
  const DatabaseSchema* schema_ = nullptr;
  std::set<ColumnRef> refs_;
  std::map<ColumnRef, SubsetAnnotation> annotations_;
};

// One prompt entry after schema merging: a representative table plus the
// names of every table sharing its exact column signature.
struct MergedEntry {
  size_t table_index = 0;  // representative, index into schema.tables()
  std::vector<std::string> member_names;
};

struct SchemaBatch {
  std::vector<MergedEntry> entries;
  long token_estimate = 0;
};

enum class SerializeStyle { kFull, kCompact };

// Schema document loading (JSON) and live-database introspection live in
// schema.cpp / exec.cpp respectively.
DatabaseSchema load_schema_json_text(const std::string& json_text);
DatabaseSchema load_schema_file(const std::string& path);

std::string serialize_for_prompt(const DatabaseSchema& schema,
                                 SerializeStyle style = SerializeStyle::kFull);
std::string serialize_for_prompt(const SchemaSubset& subset,
                                 SerializeStyle style = SerializeStyle::kFull);
std::string serialize_table(const Table& table, SerializeStyle style,
                            const std::vector<std::string>& member_names = {});

std::vector<MergedEntry> merge_identical_tables(const DatabaseSchema& schema);

std::vector<SchemaBatch> partition_batches(
    const DatabaseSchema& schema, const std::vector<MergedEntry>& entries,
    long min_tokens = 8000, long max_tokens = 12000,
    const TokenEstimator& estimator = default_estimator());

}  // namespace apexsql
