#pragma once

#include <string>

namespace segdiag::detail {

struct CommandResult {
    int exit_code = -1;
    bool timed_out = false;
};

/// Runs `command` via /bin/sh -c in its own process group; on timeout the
/// whole group receives SIGKILL. timeout_seconds <= 0 means no timeout.
CommandResult run_command(const std::string& command, double timeout_seconds);

}  // namespace segdiag::detail
