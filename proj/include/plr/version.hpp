#pragma once

namespace plr {

inline constexpr const char* kLibraryVersion = "0.1.0";
/// Bumped whenever result / summary / trace field names change.
inline constexpr int kOutputSchemaVersion = 1;

}  // namespace plr
