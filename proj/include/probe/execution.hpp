#pragma once

namespace probe {

// Data-parallel kernels take this switch; the serial path is the reference
// the OpenMP path is tested against.
enum class Execution { serial, parallel };

}  // namespace probe
