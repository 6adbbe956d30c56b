#include "terrasim/ini.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <sstream>

namespace terrasim {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
  const auto pos = s.find_first_of("#;");
  return pos == std::string::npos ? s : s.substr(0, pos);
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

}  // namespace

IniDocument IniDocument::parse(std::istream& in, const std::string& source) {
  IniDocument doc;
  doc.source_ = source;
  std::string raw;
  int line = 0;
  IniSection* current = nullptr;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError(source + ": unterminated section header", line);
      const std::string name = trim(s.substr(1, s.size() - 2));
      if (!valid_name(name)) throw ParseError(source + ": bad section name '" + name + "'", line);
      auto it = std::find_if(doc.sections_.begin(), doc.sections_.end(),
                             [&](const IniSection& x) { return x.name == name; });
      if (it != doc.sections_.end()) {
        throw ParseError(source + ": section [" + name + "] repeated (first at line " +
                             std::to_string(it->line) + ")",
                         line);
      }
      doc.sections_.push_back(IniSection{name, line, {}});
      current = &doc.sections_.back();
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError(source + ": expected key = value", line);
    if (!current) throw ParseError(source + ": key outside of any section", line);
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (!valid_name(key)) throw ParseError(source + ": bad key '" + key + "'", line);
    auto [it, inserted] = current->values.emplace(key, IniValue{value, line});
    if (!inserted) {
      throw ParseError(source + ": duplicate key '" + key + "' in [" + current->name +
                           "] at lines " + std::to_string(it->second.line) + " and " +
                           std::to_string(line),
                       line);
    }
  }
  return doc;
}

IniDocument IniDocument::parse_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse(in, source);
}

bool IniDocument::has(const std::string& name) const { return section(name) != nullptr; }

const IniSection* IniDocument::section(const std::string& name) const {
  for (const IniSection& s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

}  // namespace terrasim
