#include "apexsql/schema.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace apexsql {

using nlohmann::json;

const Column* Table::find_column(std::string_view name) const {
  std::string norm = ColumnRef::normalize(name);
  for (const auto& c : columns)
    if (ColumnRef::normalize(c.name) == norm) return &c;
  return nullptr;
}

std::string ColumnRef::normalize(std::string_view s) {
  return to_lower(strip_quotes(s));
}

ColumnRef ColumnRef::make(std::string_view table, std::string_view column) {
  return ColumnRef{normalize(table), normalize(column)};
}

DatabaseSchema::DatabaseSchema(std::string name, std::vector<Table> tables)
    : name_(std::move(name)), tables_(std::move(tables)) {
  size_t columns = 0;
  for (size_t i = 0; i < tables_.size(); ++i) {
    const Table& t = tables_[i];
    std::string norm = ColumnRef::normalize(t.name);
    if (norm.empty())
      throw SchemaError(SchemaError::Kind::kMalformed, "table with empty name");
    if (!by_name_.emplace(norm, i).second)
      throw SchemaError(SchemaError::Kind::kDuplicateName,
                        "duplicate table name: " + t.name);
    std::set<std::string> seen;
    for (const auto& c : t.columns) {
      if (c.name.empty())
        throw SchemaError(SchemaError::Kind::kMalformed,
                          "empty column name in table " + t.name);
      if (!seen.insert(ColumnRef::normalize(c.name)).second)
        throw SchemaError(SchemaError::Kind::kDuplicateName,
                          "duplicate column " + c.name + " in table " + t.name);
      ++columns;
    }
    for (const auto& pk : t.primary_key)
      if (!t.find_column(pk))
        throw SchemaError(SchemaError::Kind::kMalformed,
                          "primary key column " + pk + " missing in " + t.name);
    for (const auto& fk : t.foreign_keys)
      if (!t.find_column(fk.column))
        throw SchemaError(SchemaError::Kind::kMalformed,
                          "foreign key column " + fk.column + " missing in " + t.name);
  }
  if (columns == 0)
    throw SchemaError(SchemaError::Kind::kMalformed,
                      "schema " + name_ + " has no columns");
}

const Table* DatabaseSchema::find_table(std::string_view name) const {
  auto it = by_name_.find(ColumnRef::normalize(name));
  return it == by_name_.end() ? nullptr : &tables_[it->second];
}

bool DatabaseSchema::has_column(const ColumnRef& ref) const {
  const Table* t = find_table(ref.table);
  return t && t->find_column(ref.column);
}

size_t DatabaseSchema::total_columns() const {
  size_t n = 0;
  for (const auto& t : tables_) n += t.columns.size();
  return n;
}

std::set<ColumnRef> DatabaseSchema::all_refs() const {
  std::set<ColumnRef> refs;
  for (const auto& t : tables_)
    for (const auto& c : t.columns) refs.insert(ColumnRef::make(t.name, c.name));
  return refs;
}

bool SchemaSubset::add(const ColumnRef& ref) {
  ColumnRef norm = ColumnRef::make(ref.table, ref.column);
  if (schema_ && !schema_->has_column(norm)) return false;
  refs_.insert(norm);
  return true;
}

bool SchemaSubset::add(const ColumnRef& ref, SubsetAnnotation note) {
  if (!add(ref)) return false;
  annotations_[ColumnRef::make(ref.table, ref.column)] = std::move(note);
  return true;
}

bool SchemaSubset::contains(const ColumnRef& ref) const {
  return refs_.count(ColumnRef::make(ref.table, ref.column)) > 0;
}

void SchemaSubset::annotate(const ColumnRef& ref, SubsetAnnotation note) {
  ColumnRef norm = ColumnRef::make(ref.table, ref.column);
  if (refs_.count(norm)) annotations_[norm] = std::move(note);
}

const SubsetAnnotation* SchemaSubset::annotation(const ColumnRef& ref) const {
  auto it = annotations_.find(ColumnRef::make(ref.table, ref.column));
  return it == annotations_.end() ? nullptr : &it->second;
}

std::vector<std::string> SchemaSubset::tables_in_schema_order() const {
  std::vector<std::string> out;
  if (!schema_) return out;
  for (const auto& t : schema_->tables()) {
    std::string norm = ColumnRef::normalize(t.name);
    for (const auto& r : refs_) {
      if (r.table == norm) {
        out.push_back(t.name);
        break;
      }
    }
  }
  return out;
}

std::vector<const Column*> SchemaSubset::columns_of(std::string_view table) const {
  std::vector<const Column*> out;
  if (!schema_) return out;
  const Table* t = schema_->find_table(table);
  if (!t) return out;
  std::string norm = ColumnRef::normalize(table);
  for (const auto& c : t->columns)
    if (refs_.count(ColumnRef{norm, ColumnRef::normalize(c.name)})) out.push_back(&c);
  return out;
}

namespace {

constexpr size_t kSampleValueCap = 3;

Column column_from_json(const json& j) {
  Column c;
  if (j.is_string()) {
    c.name = j.get<std::string>();
    return c;
  }
  if (!j.is_object() || !j.contains("name"))
    throw SchemaError(SchemaError::Kind::kMalformed, "column entry missing name");
  c.name = j.at("name").get<std::string>();
  if (j.contains("type")) c.data_type = j.at("type").get<std::string>();
  if (j.contains("description") && j.at("description").is_string())
    c.description = j.at("description").get<std::string>();
  if (j.contains("samples"))
    for (const auto& s : j.at("samples")) {
      if (c.sample_values.size() >= kSampleValueCap) break;
      c.sample_values.push_back(s.is_string() ? s.get<std::string>() : s.dump());
    }
  return c;
}

}  // namespace

DatabaseSchema load_schema_json_text(const std::string& json_text) {
  json doc = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("tables"))
    throw SchemaError(SchemaError::Kind::kMalformed,
                      "schema document is not a JSON object with tables");
  std::vector<Table> tables;
  for (const auto& tj : doc.at("tables")) {
    Table t;
    if (!tj.contains("name"))
      throw SchemaError(SchemaError::Kind::kMalformed, "table entry missing name");
    t.name = tj.at("name").get<std::string>();
    if (tj.contains("columns"))
      for (const auto& cj : tj.at("columns")) t.columns.push_back(column_from_json(cj));
    if (tj.contains("primary_key"))
      for (const auto& pk : tj.at("primary_key"))
        t.primary_key.push_back(pk.get<std::string>());
    if (tj.contains("foreign_keys")) {
      for (const auto& fk : tj.at("foreign_keys")) {
        ForeignKey f;
        if (fk.is_array() && fk.size() == 3) {
          f.column = fk[0].get<std::string>();
          f.foreign_table = fk[1].get<std::string>();
          f.foreign_column = fk[2].get<std::string>();
        } else if (fk.is_object()) {
          f.column = fk.at("column").get<std::string>();
          f.foreign_table = fk.at("foreign_table").get<std::string>();
          f.foreign_column = fk.at("foreign_column").get<std::string>();
        } else {
          throw SchemaError(SchemaError::Kind::kMalformed, "bad foreign key entry");
        }
        t.foreign_keys.push_back(std::move(f));
      }
    }
    tables.push_back(std::move(t));
  }
  std::string name = doc.contains("name") ? doc.at("name").get<std::string>() : "db";
  return DatabaseSchema(std::move(name), std::move(tables));
}

DatabaseSchema load_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw SchemaError(SchemaError::Kind::kMalformed, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_schema_json_text(ss.str());
}

std::string serialize_table(const Table& table, SerializeStyle style,
                            const std::vector<std::string>& member_names) {
  std::string out;
  out += "Table: " + table.name + "\n";
  if (member_names.size() > 1) {
    out += "Applies to tables (identical columns): ";
    for (size_t i = 0; i < member_names.size(); ++i) {
      if (i) out += ", ";
      out += member_names[i];
    }
    out += "\n";
  }
  if (!table.primary_key.empty()) {
    out += "Primary key: ";
    for (size_t i = 0; i < table.primary_key.size(); ++i) {
      if (i) out += ", ";
      out += table.primary_key[i];
    }
    out += "\n";
  }
  for (const auto& fk : table.foreign_keys)
    out += "Foreign key: " + fk.column + " -> " + fk.foreign_table + "." +
           fk.foreign_column + "\n";
  out += "Columns:\n";
  for (const auto& c : table.columns) {
    out += "  " + c.name;
    if (!c.data_type.empty()) out += " (" + c.data_type + ")";
    if (!c.description.empty()) out += ": " + c.description;
    if (style == SerializeStyle::kFull && !c.sample_values.empty()) {
      out += " | samples: ";
      size_t shown = std::min(c.sample_values.size(), kSampleValueCap);
      for (size_t i = 0; i < shown; ++i) {
        if (i) out += ", ";
        out += c.sample_values[i];
      }
    }
    out += "\n";
  }
  return out;
}

std::string serialize_for_prompt(const DatabaseSchema& schema, SerializeStyle style) {
  std::string out;
  for (const auto& t : schema.tables()) {
    if (!out.empty()) out += "\n";
    out += serialize_table(t, style);
  }
  return out;
}

std::string serialize_for_prompt(const SchemaSubset& subset, SerializeStyle style) {
  const DatabaseSchema* schema = subset.schema();
  if (!schema) return "";
  std::string out;
  for (const auto& name : subset.tables_in_schema_order()) {
    const Table* t = schema->find_table(name);
    Table restricted;
    restricted.name = t->name;
    for (const Column* c : subset.columns_of(name)) restricted.columns.push_back(*c);
    if (!out.empty()) out += "\n";
    out += serialize_table(restricted, style);
  }
  return out;
}

std::vector<MergedEntry> merge_identical_tables(const DatabaseSchema& schema) {
  // Grouping key: the multiset of (normalized column name, data type).
  auto signature = [](const Table& t) {
    std::vector<std::pair<std::string, std::string>> sig;
    for (const auto& c : t.columns)
      sig.emplace_back(ColumnRef::normalize(c.name), c.data_type);
    std::sort(sig.begin(), sig.end());
    return sig;
  };
  std::vector<MergedEntry> entries;
  std::map<std::vector<std::pair<std::string, std::string>>, size_t> groups;
  const auto& tables = schema.tables();
  for (size_t i = 0; i < tables.size(); ++i) {
    auto sig = signature(tables[i]);
    auto it = groups.find(sig);
    if (it == groups.end()) {
      groups.emplace(std::move(sig), entries.size());
      entries.push_back(MergedEntry{i, {tables[i].name}});
    } else {
      entries[it->second].member_names.push_back(tables[i].name);
    }
  }
  return entries;
}

std::vector<SchemaBatch> partition_batches(const DatabaseSchema& schema,
                                           const std::vector<MergedEntry>& entries,
                                           long min_tokens, long max_tokens,
                                           const TokenEstimator& estimator) {
  std::vector<SchemaBatch> batches;
  SchemaBatch cur;
  auto entry_cost = [&](const MergedEntry& e) {
    const Table& rep = schema.tables()[e.table_index];
    return estimator(serialize_table(rep, SerializeStyle::kFull, e.member_names));
  };
  for (const auto& e : entries) {
    long cost = entry_cost(e);
    if (cost > max_tokens && cur.entries.empty()) {
      // An entry alone over the budget still ships whole.
      batches.push_back(SchemaBatch{{e}, cost});
      continue;
    }
    if (!cur.entries.empty() && cur.token_estimate + cost > max_tokens) {
      batches.push_back(std::move(cur));
      cur = SchemaBatch{};
      if (cost > max_tokens) {
        batches.push_back(SchemaBatch{{e}, cost});
        continue;
      }
    }
    cur.entries.push_back(e);
    cur.token_estimate += cost;
  }
  if (!cur.entries.empty()) batches.push_back(std::move(cur));
  (void)min_tokens;  // lower bound is advisory; greedy fill targets max_tokens
  return batches;
}

}  // namespace apexsql
