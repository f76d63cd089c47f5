#pragma once

namespace hf {

// Keeps freed heap blocks for reuse instead of returning them to the OS.
// Training allocates and frees multi-megabyte activations every step; with
// the default glibc thresholds each of them is a fresh mmap whose pages
// fault in again. No effect on other C libraries.
void retain_heap_memory();

} // namespace hf
