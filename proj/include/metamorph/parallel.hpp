#pragma once

#include <algorithm>
#include <exception>
#include <vector>

namespace metamorph {

/// Selects between the plain single-threaded loops (the reference kernels used
/// by the tests) and the OpenMP kernels.
enum class Execution { Serial, Parallel };

/// Number of row blocks used by the parallel kernels. It is fixed so that the
/// reduction order, and hence every floating-point result, is independent of
/// the thread count.
inline constexpr int kReductionBlocks = 16;

void set_thread_count(int threads);
int thread_count();

struct BlockRange {
    int begin;
    int end;
};

inline BlockRange block_range(int rows, int block) {
    const int base = rows / kReductionBlocks;
    const int extra = rows % kReductionBlocks;
    const int begin = block * base + std::min(block, extra);
    return {begin, begin + base + (block < extra ? 1 : 0)};
}

/// Runs body(block, row_begin, row_end) for every block, in parallel.
template <class Body>
void parallel_blocks(int rows, Body&& body) {
#pragma omp parallel for schedule(static)
    for (int b = 0; b < kReductionBlocks; ++b) {
        const BlockRange r = block_range(rows, b);
        body(b, r.begin, r.end);
    }
}

/// Runs body(row) for every row in parallel. Only for loops whose iterations
/// write disjoint outputs.
template <class Body>
void parallel_rows(int rows, Body&& body) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) body(r);
}

/// parallel_blocks for bodies that may throw: exceptions cannot leave an
/// OpenMP region, so they are caught per block and the one from the lowest
/// block is rethrown on the calling thread.
template <class Body>
void parallel_blocks_rethrow(int rows, Body&& body) {
    std::vector<std::exception_ptr> errors(kReductionBlocks);
    parallel_blocks(rows, [&](int b, int r0, int r1) {
        try {
            body(b, r0, r1);
        } catch (...) {
            errors[b] = std::current_exception();
        }
    });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

template <class Body>
void parallel_rows_rethrow(int rows, Body&& body) {
    parallel_blocks_rethrow(rows, [&](int, int r0, int r1) {
        for (int r = r0; r < r1; ++r) body(r);
    });
}

}  // namespace metamorph
