#pragma once
#include <stdexcept>
#include <string>

namespace commotions {

// Single exception type for the whole library. The code survives the trip
// through the C API, the message is what the caller gets to read.
class Error : public std::runtime_error {
public:
    enum class Code {
        invalid_argument,
        io,
        parse,
        domain,   // input violates a documented invariant
        numeric,
        internal,
    };

    Error(Code code, std::string msg) : std::runtime_error(std::move(msg)), code(code) {}

    Code code;
};

[[noreturn]] inline void fail(Error::Code code, const std::string& msg) {
    throw Error(code, msg);
}

}  // namespace commotions
