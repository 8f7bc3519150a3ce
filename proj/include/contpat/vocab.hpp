#pragma once

#include "contpat/common.hpp"

namespace contpat {

// Reserved ids at the bottom of every base vocabulary.
inline constexpr TokenId kBos = 0;
inline constexpr TokenId kEos = 1;
inline constexpr TokenId kUnk = 2;
inline constexpr TokenId kPad = 3;
inline constexpr TokenId kReservedCount = 4;

}  // namespace contpat
