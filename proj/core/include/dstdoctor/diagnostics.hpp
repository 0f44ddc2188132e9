#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dstdoctor {

enum class Severity { warning, error };

/// A non-fatal finding produced while loading or validating data.
/// Hard failures (unreadable files, syntax errors, broken invariants that
/// make a structure unusable) are thrown as ParseError / ValidationError
/// instead; diagnostics carry the issues the data is known to contain,
/// such as database values that do not match the ontology.
struct Diagnostic {
  Severity severity = Severity::warning;
  std::string where;    // e.g. "ontology.txt:12" or "dialog MUL0690.json turn 3"
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

using Diagnostics = std::vector<Diagnostic>;

std::string render(const Diagnostic& d);

inline void append(Diagnostics* sink, Diagnostic d) {
  if (sink != nullptr) sink->push_back(std::move(d));
}

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dstdoctor
