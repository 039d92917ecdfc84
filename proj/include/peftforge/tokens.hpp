#pragma once

#include <cstdint>

namespace peftforge::tok {

// Reserved token ids shared by the vocabulary, the model, and checkpoints.
inline constexpr int32_t pad = 0;
inline constexpr int32_t bos = 1;
inline constexpr int32_t eos = 2;
inline constexpr int32_t unk = 3;
inline constexpr int32_t subject = 4;    // <S>
inline constexpr int32_t predicate = 5;  // <P>
inline constexpr int32_t object = 6;     // <O>
inline constexpr int32_t value = 7;      // <V>
inline constexpr int32_t first_regular = 8;

}  // namespace peftforge::tok
