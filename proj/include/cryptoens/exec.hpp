#pragma once

namespace cryptoens {

/// Execution policy for data-parallel kernels. Serial is the reference path the
/// parallel path is tested against; both produce bit-identical results.
enum class Exec { Serial, Parallel };

}  // namespace cryptoens
