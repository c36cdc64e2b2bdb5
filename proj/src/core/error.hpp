#pragma once

#include <stdexcept>
#include <string>

namespace creastress {

// Coarse error classes; the C API maps these 1:1 onto status codes.
enum class Errc {
    invalid_argument,  // bad input value or degenerate pair
    parse,             // malformed file or reply
    io,                // filesystem failure
    transport,         // remote backend unreachable / retries exhausted
    credential,        // authentication rejected (never retried)
    protocol,          // response did not match the expected wire shape
    state,             // operation called against an incomplete/missing run
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace creastress
