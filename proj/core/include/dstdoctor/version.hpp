#pragma once

namespace dstdoctor {

inline constexpr const char* kVersion = "0.1.0";

/// Default RNG seed used by every seeded operation when the caller does not
/// supply one. Fixed so that out-of-the-box runs are reproducible.
inline constexpr unsigned long long kDefaultSeed = 1729;

}  // namespace dstdoctor
