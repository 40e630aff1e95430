#pragma once

namespace rbflow::cli {

enum ExitCode { ok = 0, usage = 1, blow_up = 2, positivity_lost = 3, invariant_violation = 4 };

/// Entry point of the `rbflow` tool; returns the process exit code.
int main(int argc, char** argv);

}  // namespace rbflow::cli
