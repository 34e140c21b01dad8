#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dcscan {

// Precondition failure: caller passed something outside the contract.
inline void check_arg(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// Runtime failure: overflow, malformed file, exhausted tape, ...
inline void check_run(bool ok, const std::string& msg) {
    if (!ok) throw std::runtime_error(msg);
}

// splitmix64, used to derive independent RNG streams from (seed, tag, ...).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    return mix64(mix64(mix64(mix64(seed) ^ a) ^ b) ^ c);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    return Rng(derive_seed(seed, a, b, c));
}

// Portable draws (mt19937_64 output is standardized; std:: distributions are
// not). Library code uses these so seeds reproduce across toolchains.
inline double urand01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double urand_range(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * urand01(rng);
}

// Uniform integer in [lo, hi], inclusive.
inline std::int64_t urand_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    double u = urand01(rng) * static_cast<double>(hi - lo + 1);
    std::int64_t k = lo + static_cast<std::int64_t>(u);
    return k > hi ? hi : k;
}

inline bool urand_coin(Rng& rng) { return (rng() & 1ull) != 0; }

inline double nrand(Rng& rng) {
    // Box-Muller on portable uniforms
    double u1 = urand01(rng), u2 = urand01(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Worker cap: DCSCAN_THREADS env var, else hardware concurrency.
inline int max_threads() {
    static int n = [] {
        if (const char* e = std::getenv("DCSCAN_THREADS")) {
            int v = std::atoi(e);
            if (v >= 1) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return n;
}

// Runs fn(i) for i in [0, n). Splits into contiguous chunks, one per worker;
// fn must write only to locations owned by index i so results are
// deterministic regardless of the worker count. `work` estimates the total
// element operations: below the threshold the spawn overhead outweighs two
// cores and the loop runs inline.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk_fn,
                  std::size_t work = SIZE_MAX);

inline void parallel_for_each(std::size_t n, const std::function<void(std::size_t)>& fn,
                              std::size_t work = SIZE_MAX) {
    parallel_for(
        n,
        [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        },
        work);
}

}  // namespace dcscan
