#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace uvmsim {

// Six-way access-pattern alphabet with stable integer encoding 0-5.
enum class PatternLabel : int {
    LinearStreaming = 0,
    Random = 1,
    MixedIrregular = 2,
    LinearReuse = 3,
    RandomReuse = 4,
    MixedReuse = 5,
};

inline constexpr int kPatternCount = 6;

inline constexpr std::array<std::string_view, kPatternCount> kPatternNames = {
    "linear_streaming", "random", "mixed_irregular",
    "linear_reuse",     "random_reuse", "mixed_reuse",
};

inline std::string_view to_string(PatternLabel label) {
    return kPatternNames[static_cast<int>(label)];
}

inline std::optional<PatternLabel> pattern_from_string(std::string_view name) {
    for (int i = 0; i < kPatternCount; ++i) {
        if (kPatternNames[i] == name) return static_cast<PatternLabel>(i);
    }
    return std::nullopt;
}

inline bool is_reuse_pattern(PatternLabel label) {
    return static_cast<int>(label) >= 3;
}

}  // namespace uvmsim
