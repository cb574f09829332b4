#pragma once

namespace dass {

/// Selects between the OpenMP kernel and the plain serial loop it was
/// derived from. Both produce bit-identical results; the serial path is
/// the reference the parallel one is tested against.
enum class Execution { serial, parallel };

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace dass
