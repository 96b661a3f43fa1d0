#pragma once

namespace gicisad {

/// Keeps large temporary buffers on the heap instead of fresh mmap/munmap
/// pairs (glibc only; a no-op elsewhere). Safe to call more than once.
void tune_allocator() noexcept;

}  // namespace gicisad
