#include <rareis/parallel.hpp>

namespace rareis::parallel {

namespace {
std::atomic<unsigned> g_max_threads{1};
}

void set_max_threads(unsigned n) noexcept { g_max_threads.store(n == 0 ? 1 : n); }

unsigned max_threads() noexcept { return g_max_threads.load(); }

}  // namespace rareis::parallel
