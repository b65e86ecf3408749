// ============================================================================
// csv.hpp - Session CSV reading and writing.
//
// Format: header row with the schema channel names, one reading per row.
// One leading non-schema column (e.g. a timestamp) is tolerated and ignored.
// Values round-trip at full double precision.
// ============================================================================
#pragma once

#include <string>

#include "olfact/types.hpp"

namespace olfact {

// Parses one session file. Label, day and split are left for the manifest
// layer to fill in. Errors carry the offending line number.
SensorSession parse_session_csv(const std::string& path, const ChannelSchema& schema);

void write_session_csv(const std::string& path, const SensorSession& session);

}  // namespace olfact
