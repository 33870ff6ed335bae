#include "gridflex/threads.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>

namespace gridflex {

int max_workers() {
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("GRIDFLEX_THREADS")) {
        try {
            const int cap = std::stoi(env);
            if (cap > 0) workers = std::min(workers, cap);
        } catch (const std::exception&) {
            // ignore malformed values
        }
    }
    return workers;
}

}  // namespace gridflex
