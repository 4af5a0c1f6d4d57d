#pragma once

#include <stdexcept>
#include <string>

namespace sonoseg {

// Domain failure: invalid input, degenerate data, contract violation.
// Messages are short, stable phrases ("sample count mismatch",
// "no threshold exists") so callers and tests can match on them.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw Error(what);
}

}  // namespace sonoseg
