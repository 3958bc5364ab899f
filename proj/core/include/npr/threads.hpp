#pragma once

#include <functional>

namespace npr {

/// Worker count for chunked parallel work: NPR_THREADS if set (clamped to
/// [1, 64]), otherwise the hardware concurrency.
int worker_count();

/// Run job(0..n_chunks-1), distributing chunks over the workers.  Chunk
/// results must land in per-chunk buffers; reduce them in chunk order
/// afterwards and the outcome is identical for any worker count.
void parallel_chunks(int n_chunks, const std::function<void(int)>& job);

}  // namespace npr
