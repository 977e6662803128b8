#include "autoseries/par.hpp"

#include <atomic>

namespace autoseries::par {

namespace {
std::atomic<int> g_threads{0};
}

void set_threads(int n) { g_threads.store(n < 0 ? 0 : n); }

int threads() { return g_threads.load(); }

}  // namespace autoseries::par
