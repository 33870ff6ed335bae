#pragma once

namespace gridflex {

/// Hardware concurrency capped by GRIDFLEX_THREADS when set to a positive integer.
int max_workers();

}  // namespace gridflex
