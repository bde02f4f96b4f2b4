#include "apexsql/util.hpp"

#include <algorithm>
#include <cctype>

namespace apexsql {

long default_token_estimate(std::string_view text) {
  return static_cast<long>((text.size() + 3) / 4);
}

TokenEstimator default_estimator() {
  return [](std::string_view s) { return default_token_estimate(s); };
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string strip_quotes(std::string_view s) {
  std::string cur = trim(s);
  for (;;) {
    if (cur.size() < 2) return cur;
    char a = cur.front(), b = cur.back();
    bool quoted = (a == '"' && b == '"') || (a == '\'' && b == '\'') ||
                  (a == '`' && b == '`') || (a == '[' && b == ']');
    if (!quoted) return cur;
    cur = trim(std::string_view(cur).substr(1, cur.size() - 2));
  }
}

bool starts_with_ci(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) return false;
  for (size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i])))
      return false;
  }
  return true;
}

bool contains_ci(std::string_view text, std::string_view needle) {
  if (needle.empty()) return true;
  if (text.size() < needle.size()) return false;
  for (size_t i = 0; i + needle.size() <= text.size(); ++i) {
    if (starts_with_ci(text.substr(i), needle)) return true;
  }
  return false;
}

namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

bool contains_word_ci(std::string_view text, std::string_view word,
                      bool open_suffix) {
  if (word.empty()) return true;
  for (size_t i = 0; i + word.size() <= text.size(); ++i) {
    if (!starts_with_ci(text.substr(i), word)) continue;
    bool left_ok = (i == 0) || !is_ident_char(text[i - 1]);
    size_t end = i + word.size();
    bool right_ok = open_suffix || end == text.size() || !is_ident_char(text[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

std::vector<std::string> split_sql_statements(std::string_view script) {
  std::vector<std::string> out;
  std::string cur;
  enum class State { kPlain, kSingle, kDouble, kBacktick, kBracket, kLine, kBlock };
  State st = State::kPlain;
  for (size_t i = 0; i < script.size(); ++i) {
    char c = script[i];
    char next = (i + 1 < script.size()) ? script[i + 1] : '\0';
    switch (st) {
      case State::kPlain:
        if (c == '\'') st = State::kSingle;
        else if (c == '"') st = State::kDouble;
        else if (c == '`') st = State::kBacktick;
        else if (c == '[') st = State::kBracket;
        else if (c == '-' && next == '-') st = State::kLine;
        else if (c == '/' && next == '*') st = State::kBlock;
        else if (c == ';') {
          std::string stmt = trim(cur);
          if (!stmt.empty()) out.push_back(std::move(stmt));
          cur.clear();
          continue;
        }
        break;
      case State::kSingle:
        if (c == '\'' && next == '\'') { cur += c; ++i; c = '\''; }
        else if (c == '\'') st = State::kPlain;
        break;
      case State::kDouble:
        if (c == '"') st = State::kPlain;
        break;
      case State::kBacktick:
        if (c == '`') st = State::kPlain;
        break;
      case State::kBracket:
        if (c == ']') st = State::kPlain;
        break;
      case State::kLine:
        if (c == '\n') st = State::kPlain;
        break;
      case State::kBlock:
        if (c == '*' && next == '/') { cur += c; ++i; cur += '/'; st = State::kPlain; continue; }
        break;
    }
    cur += c;
  }
  std::string tail = trim(cur);
  if (!tail.empty()) out.push_back(std::move(tail));
  // Comment-only fragments carry no statement.
  std::vector<std::string> kept;
  for (auto& s : out)
    if (!leading_keyword(s).empty()) kept.push_back(std::move(s));
  return kept;
}

std::string leading_keyword(std::string_view sql) {
  size_t i = 0;
  while (i < sql.size()) {
    if (std::isspace(static_cast<unsigned char>(sql[i]))) { ++i; continue; }
    if (sql[i] == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
      while (i < sql.size() && sql[i] != '\n') ++i;
      continue;
    }
    if (sql[i] == '/' && i + 1 < sql.size() && sql[i + 1] == '*') {
      size_t close = sql.find("*/", i + 2);
      if (close == std::string_view::npos) return "";
      i = close + 2;
      continue;
    }
    if (sql[i] == '(') { ++i; continue; }
    break;
  }
  size_t start = i;
  while (i < sql.size() && (std::isalpha(static_cast<unsigned char>(sql[i])) || sql[i] == '_'))
    ++i;
  if (i == start) return "";
  std::string kw(sql.substr(start, i - start));
  std::transform(kw.begin(), kw.end(), kw.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return kw;
}

std::string json_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 8);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

}  // namespace apexsql
