#pragma once

// Sectioned key-value run configuration (grammar in docs/formats.md).
//
//   # comment            ; comment
//   [section]
//   key = value
//   key = item, item, "quoted, item"
//   key = [item, item]
//
// Values stay text until a typed accessor converts them; numbers accept
// constant arithmetic (e.g. 2*pi). Every error carries line and column.

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace akcurv::config {

struct Location {
  int line = 0;
  int column = 0;
};

// what() is "source:line:column: message", or "source: message" when the
// error has no location (line 0).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, Location where, const std::string& message);
  Location where() const { return where_; }

 private:
  Location where_;
};

struct Value {
  std::vector<std::string> items;
  std::vector<Location> item_locations;
  bool bracketed = false;
  Location where;  // first character of the value
  Location key;
};

class Section {
 public:
  Section(std::string name, std::string source, Location where)
      : name_(std::move(name)), source_(std::move(source)), where_(where) {}

  const std::string& name() const { return name_; }
  Location where() const { return where_; }
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const Value& at(const std::string& key) const;
  std::vector<std::string> keys() const;

  std::string string(const std::string& key) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  long integer(const std::string& key) const;
  long integer(const std::string& key, long fallback) const;
  bool boolean(const std::string& key) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::vector<std::string> list(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<long> integers(const std::string& key) const;

  // Throws on the first key outside `allowed`.
  void require_keys(const std::vector<std::string>& allowed) const;
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;
  // Same, located at item i of the value or at the key itself.
  [[noreturn]] void fail_item(const std::string& key, std::size_t i, const std::string& message) const;
  [[noreturn]] void fail_key(const std::string& key, const std::string& message) const;

  void insert(const std::string& key, Value value, Location where);

 private:
  double number_item(const Value& v, std::size_t i, const std::string& key) const;
  long integer_item(const Value& v, std::size_t i, const std::string& key) const;
  const std::string& single(const std::string& key) const;

  std::string name_;
  std::string source_;
  Location where_;
  std::map<std::string, Value> entries_;
};

class Document {
 public:
  static Document parse(std::string_view text, const std::string& source = "<config>");
  static Document load(const std::string& path);

  const std::string& source() const { return source_; }
  const Section* find(const std::string& name) const;
  const std::vector<Section>& sections() const { return sections_; }
  // Throws on the first section outside `allowed`.
  void require_sections(const std::vector<std::string>& allowed) const;

 private:
  std::string source_;
  std::vector<Section> sections_;
};

// Constant arithmetic (numbers, pi, + − * / ^, functions); throws
// std::invalid_argument with a byte offset.
double evaluate_constant(const std::string& text);

}  // namespace akcurv::config
