#pragma once

#include <stdexcept>
#include <string>

namespace evo {

enum class ErrorKind {
    Usage,       // caller violated a precondition
    Structural,  // malformed shapes (ragged token rows, dim mismatch)
    Data,        // inputs inconsistent with each other (missing positive, empty pool)
    Numeric,     // non-finite values
    Parse,       // unreadable text input (logs, controller answers)
    Format,      // well-formed text with the wrong content (HNQS variant blocks)
    Transport,   // endpoint I/O
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, ErrorKind kind, const std::string& what) {
    if (!ok) fail(kind, what);
}

}  // namespace evo
