#include <akcurv/config.hpp>
#include <akcurv/expr.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace akcurv::config {

namespace {

std::string located(const std::string& source, Location where) {
  if (where.line == 0) return source;
  return source + ":" + std::to_string(where.line) + ":" + std::to_string(where.column);
}

}  // namespace

ConfigError::ConfigError(const std::string& source, Location where, const std::string& message)
    : std::runtime_error(located(source, where) + ": " + message), where_(where) {}

double evaluate_constant(const std::string& text) {
  // One dummy dimension; any variable is rejected below.
  expr::Expression e;
  try {
    e = expr::parse(text, 1);
  } catch (const expr::ParseError& err) {
    throw std::invalid_argument(err.what());
  }
  if (e.node_count() == 0) throw std::invalid_argument("empty number");
  std::vector<double> none{0.0, 0.0};
  struct Walk {
    static bool has_variable(const expr::Node& n) {
      if (n.op == expr::Op::Variable) return true;
      return (n.lhs && has_variable(*n.lhs)) || (n.rhs && has_variable(*n.rhs));
    }
  };
  if (Walk::has_variable(*e.root())) throw std::invalid_argument("a number may not contain variables");
  const double v = e.eval(none);
  if (!std::isfinite(v)) throw std::invalid_argument("number is not finite");
  return v;
}

// ------------------------------------------------------------ Section

const Value& Section::at(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(source_, where_, "[" + name_ + "] is missing key '" + key + "'");
  return it->second;
}

std::vector<std::string> Section::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

void Section::fail(const std::string& key, const std::string& message) const {
  auto it = entries_.find(key);
  const Location where = it == entries_.end() ? where_ : it->second.where;
  throw ConfigError(source_, where, "[" + name_ + "] " + key + ": " + message);
}

void Section::fail_item(const std::string& key, std::size_t i, const std::string& message) const {
  const Value& v = at(key);
  const Location where = i < v.item_locations.size() ? v.item_locations[i] : v.where;
  throw ConfigError(source_, where, "[" + name_ + "] " + key + ": " + message);
}

void Section::fail_key(const std::string& key, const std::string& message) const {
  throw ConfigError(source_, at(key).key, "[" + name_ + "] " + key + ": " + message);
}

const std::string& Section::single(const std::string& key) const {
  const Value& v = at(key);
  if (v.items.size() != 1 || v.bracketed) fail(key, "expected a single value");
  return v.items[0];
}

std::string Section::string(const std::string& key) const { return single(key); }
std::string Section::string(const std::string& key, const std::string& fallback) const {
  return has(key) ? string(key) : fallback;
}

double Section::number_item(const Value& v, std::size_t i, const std::string& key) const {
  try {
    return evaluate_constant(v.items[i]);
  } catch (const std::exception& e) {
    throw ConfigError(source_, v.item_locations[i], "[" + name_ + "] " + key + ": " + e.what());
  }
}

long Section::integer_item(const Value& v, std::size_t i, const std::string& key) const {
  const double x = number_item(v, i, key);
  if (x != std::floor(x) || std::abs(x) > 9e15) {
    throw ConfigError(source_, v.item_locations[i], "[" + name_ + "] " + key + ": expected an integer");
  }
  return static_cast<long>(x);
}

double Section::number(const std::string& key) const {
  single(key);
  return number_item(at(key), 0, key);
}
double Section::number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

long Section::integer(const std::string& key) const {
  single(key);
  return integer_item(at(key), 0, key);
}
long Section::integer(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

bool Section::boolean(const std::string& key) const {
  std::string s = single(key);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  fail(key, "expected a boolean (true/false)");
}
bool Section::boolean(const std::string& key, bool fallback) const { return has(key) ? boolean(key) : fallback; }

std::vector<std::string> Section::list(const std::string& key) const { return at(key).items; }

std::vector<double> Section::numbers(const std::string& key) const {
  const Value& v = at(key);
  std::vector<double> out;
  for (std::size_t i = 0; i < v.items.size(); ++i) out.push_back(number_item(v, i, key));
  return out;
}

std::vector<long> Section::integers(const std::string& key) const {
  const Value& v = at(key);
  std::vector<long> out;
  for (std::size_t i = 0; i < v.items.size(); ++i) out.push_back(integer_item(v, i, key));
  return out;
}

void Section::require_keys(const std::vector<std::string>& allowed) const {
  // Report the earliest unknown key in file order.
  const std::pair<const std::string, Value>* first = nullptr;
  for (const auto& entry : entries_) {
    if (std::find(allowed.begin(), allowed.end(), entry.first) != allowed.end()) continue;
    const Location at = entry.second.key;
    if (!first || at.line < first->second.key.line) first = &entry;
  }
  if (first) throw ConfigError(source_, first->second.key, "[" + name_ + "] unknown key '" + first->first + "'");
}

void Section::insert(const std::string& key, Value value, Location where) {
  if (has(key)) throw ConfigError(source_, where, "[" + name_ + "] duplicate key '" + key + "'");
  value.key = where;
  entries_.emplace(key, std::move(value));
}

// ------------------------------------------------------------ parsing

namespace {

bool is_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

class LineParser {
 public:
  LineParser(std::string_view line, int number, const std::string& source)
      : line_(line), number_(number), source_(source) {}

  [[noreturn]] void fail(std::size_t pos, const std::string& message) const {
    throw ConfigError(source_, {number_, static_cast<int>(pos) + 1}, message);
  }

  // Splits the value text starting at `pos` into items.
  Value value(std::size_t pos) {
    Value v;
    skip_ws(pos);
    v.where = {number_, static_cast<int>(pos) + 1};
    std::size_t end = line_.size();
    if (pos < end && line_[pos] == '[') {
      v.bracketed = true;
      ++pos;
    }
    bool closed = false;
    for (;;) {
      skip_ws(pos);
      if (v.bracketed && pos < end && line_[pos] == ']' && v.items.empty()) {
        ++pos;
        closed = true;
        break;
      }
      const std::size_t start = pos;
      std::string item;
      if (pos < end && line_[pos] == '"') {
        ++pos;
        bool done = false;
        while (pos < end) {
          const char c = line_[pos++];
          if (c == '\\' && pos < end) {
            const char n = line_[pos++];
            if (n != '"' && n != '\\') fail(pos - 1, "unknown escape in quoted string");
            item += n;
          } else if (c == '"') {
            done = true;
            break;
          } else {
            item += c;
          }
        }
        if (!done) fail(start, "unterminated quoted string");
        skip_ws(pos);
      } else {
        while (pos < end && line_[pos] != ',' && !(v.bracketed && line_[pos] == ']')) {
          if (line_[pos] == '"') fail(pos, "quote inside an unquoted value");
          item += line_[pos++];
        }
        item = trim(item);
        if (item.empty()) fail(start, "empty value");
      }
      v.items.push_back(item);
      v.item_locations.push_back({number_, static_cast<int>(start) + 1});
      if (pos < end && line_[pos] == ',') {
        ++pos;
        continue;
      }
      if (v.bracketed) {
        if (pos < end && line_[pos] == ']') {
          ++pos;
          closed = true;
        }
      }
      break;
    }
    if (v.bracketed && !closed) fail(pos, "missing ']'");
    skip_ws(pos);
    if (pos < end) fail(pos, "unexpected text after value");
    return v;
  }

  void skip_ws(std::size_t& pos) const {
    while (pos < line_.size() && (line_[pos] == ' ' || line_[pos] == '\t' || line_[pos] == '\r')) ++pos;
  }

 private:
  std::string_view line_;
  int number_;
  const std::string& source_;
};

// Drops a trailing comment that is not inside quotes.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '\\' && quoted) {
      ++i;
    } else if (c == '"') {
      quoted = !quoted;
    } else if (!quoted && (c == '#' || c == ';')) {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace

Document Document::parse(std::string_view text, const std::string& source) {
  Document doc;
  doc.source_ = source;
  std::size_t start = 0;
  int number = 0;
  Section* current = nullptr;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = strip_comment(text.substr(start, end - start));
    ++number;
    LineParser p(line, number, source);
    std::size_t pos = 0;
    p.skip_ws(pos);
    if (pos < line.size()) {
      if (line[pos] == '[') {
        const std::size_t close = line.find(']', pos);
        if (close == std::string_view::npos) p.fail(pos, "missing ']' in section header");
        const std::string name = trim(line.substr(pos + 1, close - pos - 1));
        if (name.empty() || !std::all_of(name.begin(), name.end(), is_key_char)) {
          p.fail(pos + 1, "invalid section name");
        }
        std::size_t after = close + 1;
        p.skip_ws(after);
        if (after < line.size()) p.fail(after, "unexpected text after section header");
        for (const Section& s : doc.sections_) {
          if (s.name() == name) p.fail(pos, "duplicate section [" + name + "]");
        }
        doc.sections_.emplace_back(name, source, Location{number, static_cast<int>(pos) + 1});
        current = &doc.sections_.back();
      } else {
        const std::size_t key_start = pos;
        while (pos < line.size() && is_key_char(line[pos])) ++pos;
        if (pos == key_start) p.fail(pos, "expected a key or a [section]");
        const std::string key(line.substr(key_start, pos - key_start));
        p.skip_ws(pos);
        if (pos >= line.size() || line[pos] != '=') p.fail(pos, "expected '=' after key '" + key + "'");
        if (!current) p.fail(key_start, "key '" + key + "' appears before any [section]");
        Value v = p.value(pos + 1);
        current->insert(key, std::move(v), Location{number, static_cast<int>(key_start) + 1});
      }
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return doc;
}

Document Document::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, {0, 0}, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

const Section* Document::find(const std::string& name) const {
  for (const Section& s : sections_) {
    if (s.name() == name) return &s;
  }
  return nullptr;
}

void Document::require_sections(const std::vector<std::string>& allowed) const {
  for (const Section& s : sections_) {
    if (std::find(allowed.begin(), allowed.end(), s.name()) == allowed.end()) {
      throw ConfigError(source_, s.where(), "unknown section [" + s.name() + "]");
    }
  }
}

}  // namespace akcurv::config
