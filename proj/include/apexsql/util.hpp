#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apexsql {

// Token estimation is pluggable; the default approximates one token per
// four bytes, which is stable enough to drive batching and budgets.
using TokenEstimator = std::function<long(std::string_view)>;

long default_token_estimate(std::string_view text);
TokenEstimator default_estimator();

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Strips matched surrounding quote pairs ("x", 'x', `x`, [x]) and
// whitespace until a fixed point is reached.
std::string strip_quotes(std::string_view s);

bool starts_with_ci(std::string_view text, std::string_view prefix);
bool contains_ci(std::string_view text, std::string_view needle);

// Splits a SQL script into statements on semicolons that sit outside
// string literals, quoted identifiers, and comments. Comments are kept
// with the statement they precede; blank fragments are dropped.
std::vector<std::string> split_sql_statements(std::string_view script);

// First keyword of a statement after leading comments and whitespace,
// upper-cased ("SELECT", "WITH", "DROP", ...). Empty if none.
std::string leading_keyword(std::string_view sql);

std::string json_escape(std::string_view s);

// Word-boundary containment: `word` must not be flanked by identifier
// characters on the case-insensitively matched side(s).
bool contains_word_ci(std::string_view text, std::string_view word,
                      bool open_suffix = false);

}  // namespace apexsql
