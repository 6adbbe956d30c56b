#pragma once

// Minimal INI reader: [section] headers, key = value lines, '#' or ';'
// comments. Keeps line numbers so callers can report precise errors.

#include "terrasim/contact.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace terrasim {

struct IniValue {
  std::string text;
  int line = 0;
};

struct IniSection {
  std::string name;
  int line = 0;
  std::map<std::string, IniValue> values;
};

class IniDocument {
 public:
  /// Throws ParseError on syntax errors and duplicate keys; the duplicate
  /// message quotes both line numbers.
  static IniDocument parse(std::istream& in, const std::string& source = "<input>");
  static IniDocument parse_text(const std::string& text, const std::string& source = "<input>");

  bool has(const std::string& section) const;
  const IniSection* section(const std::string& name) const;
  const std::vector<IniSection>& sections() const { return sections_; }
  const std::string& source() const { return source_; }
  bool empty() const { return sections_.empty(); }

 private:
  std::string source_;
  std::vector<IniSection> sections_;
};

}  // namespace terrasim
