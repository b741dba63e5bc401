#pragma once
// Second, independent transcription of the index-sequence decoding
// pseudocode. Shares no code or types with the library's decoder.

#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Span = std::pair<std::vector<int>, std::string>;

// Y holds y_1..y_m with y_i in [1, n + |G|]; G holds the tag names G_1..G_|G|.
std::vector<Span> decode_algorithm1(const std::vector<int>& Y, int n, const std::vector<std::string>& G);

}  // namespace oracle
