// Copyright 2026 The SparseHop Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SPARSEHOP_RUNTIME_H_
#define SPARSEHOP_RUNTIME_H_

namespace sparsehop {

// Keeps large activation buffers on the heap instead of fresh mmap pages.
// Training allocates and frees many multi-megabyte arrays per step; with
// glibc defaults each one is a new mapping and pays its page faults again.
// Call once at process start. No-op off glibc.
void configure_allocator();

}  // namespace sparsehop

#endif  // SPARSEHOP_RUNTIME_H_
