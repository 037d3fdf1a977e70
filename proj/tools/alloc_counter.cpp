// Cumulative allocation counter feeding the bench harness. Linked into the
// CLI binary only; the library reports -1 when the counter is absent.

#include <atomic>
#include <cstdlib>
#include <new>

#include "emtdq/commands.hpp"

namespace {
std::atomic<long long> g_bytes{0};

struct Registrar {
    Registrar() { emtdq::alloc_counter = &g_bytes; }
} registrar;

void* alloc(std::size_t n) {
    g_bytes.fetch_add(static_cast<long long>(n), std::memory_order_relaxed);
    void* p = std::malloc(n ? n : 1);
    if (!p) throw std::bad_alloc();
    return p;
}
} // namespace

void* operator new(std::size_t n) { return alloc(n); }
void* operator new[](std::size_t n) { return alloc(n); }
void* operator new(std::size_t n, const std::nothrow_t&) noexcept {
    g_bytes.fetch_add(static_cast<long long>(n), std::memory_order_relaxed);
    return std::malloc(n ? n : 1);
}
void* operator new[](std::size_t n, const std::nothrow_t&) noexcept {
    g_bytes.fetch_add(static_cast<long long>(n), std::memory_order_relaxed);
    return std::malloc(n ? n : 1);
}
void operator delete(void* p) noexcept { std::free(p); }
void operator delete[](void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }
void operator delete[](void* p, std::size_t) noexcept { std::free(p); }
void operator delete(void* p, const std::nothrow_t&) noexcept { std::free(p); }
void operator delete[](void* p, const std::nothrow_t&) noexcept { std::free(p); }
