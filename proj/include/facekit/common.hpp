#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace facekit {

// Thrown for contract violations: bad shapes, invalid arguments, numerical
// failures (non-SPD, non-convergence). Carries a plain-text message.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline void format_into(std::ostringstream&) {}

template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& value, const Rest&... rest) {
    os << value;
    format_into(os, rest...);
}

}  // namespace detail

template <typename... Args>
std::string format_msg(const Args&... args) {
    std::ostringstream os;
    detail::format_into(os, args...);
    return os.str();
}

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
    throw Error(format_msg(args...));
}

template <typename... Args>
void check(bool cond, const Args&... args) {
    if (!cond) fail(args...);
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

}  // namespace facekit
