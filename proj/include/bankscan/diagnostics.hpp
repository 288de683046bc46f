#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bankscan {

// A non-fatal problem found while scanning (parse failure, unresolvable
// constant, suppressed hit, ...). Collected per app, never thrown.
struct Diagnostic {
    std::string file;
    int line = 0;
    std::string message;

    bool operator==(const Diagnostic&) const = default;
};

using DiagnosticList = std::vector<Diagnostic>;

// Required input is absent (no smali/ tree, no manifest, bad catalog path).
class MissingInputError : public std::runtime_error {
public:
    explicit MissingInputError(const std::string& what)
        : std::runtime_error(what) {}
};

// A single file violates the supported grammar. Carries file/line context.
class SyntaxError : public std::runtime_error {
public:
    SyntaxError(std::string file, int line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
          file_(std::move(file)),
          line_(line) {}

    const std::string& file() const { return file_; }
    int line() const { return line_; }

private:
    std::string file_;
    int line_;
};

// Malformed catalog / rules / config content.
class CatalogError : public std::runtime_error {
public:
    explicit CatalogError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace bankscan
