#pragma once

#include <string>
#include <string_view>

namespace creastress::text {

// Classic Porter stemming algorithm (reference ANSI C semantics, including
// its two documented departures: bli->ble and logi->log). Input is expected
// to be a lowercase token from tokenize(); bytes outside a-z are treated as
// consonants, so digits and non-ASCII pass through the suffix rules inertly.
// Words of length <= 2 are returned unchanged.
std::string stem(std::string_view token);

}  // namespace creastress::text
