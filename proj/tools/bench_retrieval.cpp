// Benchmark for the farthest-row scan: serial reference vs the OpenMP
// kernel on the same matrix, verifying both pick the same row.

#include <chrono>
#include <cstdio>
#include <vector>

#include <CLI11.hpp>

#include "rcg/retrieval_kernel.hpp"
#include "rcg/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

double uniform(std::uint64_t& state) {
    return static_cast<double>(rcg::splitmix64(state) >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

template <typename Fn>
double time_best_of(int repeats, Fn&& fn) {
    double best = 1e300;
    for (int i = 0; i < repeats; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Farthest-row scan benchmark: serial reference vs OpenMP"};
    std::size_t rows = 10000, dim = 1024;
    int repeats = 5, queries = 8;
    std::uint64_t seed = 42;
    app.add_option("--rows", rows, "Database rows");
    app.add_option("--dim", dim, "Embedding dimension");
    app.add_option("--repeats", repeats, "Timing repeats (best-of)");
    app.add_option("--queries", queries, "Distinct query vectors");
    app.add_option("--seed", seed, "RNG seed");
    CLI11_PARSE(app, argc, argv);

    std::uint64_t state = seed;
    std::vector<double> matrix(rows * dim);
    for (double& x : matrix) x = uniform(state);
    std::vector<std::vector<double>> query_set(queries, std::vector<double>(dim));
    for (auto& q : query_set)
        for (double& x : q) x = uniform(state);

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (built without OpenMP)\n");
#endif
    std::printf("matrix: %zu x %zu (%.1f MB)\n", rows, dim,
                static_cast<double>(rows * dim * sizeof(double)) / 1e6);

    double serial_ms = 0.0, parallel_ms = 0.0;
    for (int qi = 0; qi < queries; ++qi) {
        const auto& q = query_set[qi];
        rcg::kernel::FarthestHit serial_hit, parallel_hit;
        serial_ms += time_best_of(repeats, [&] {
            serial_hit = rcg::kernel::farthest_row_serial(matrix, rows, dim, q);
        });
        parallel_ms += time_best_of(repeats, [&] {
            parallel_hit = rcg::kernel::farthest_row(matrix, rows, dim, q);
        });
        if (serial_hit.row != parallel_hit.row ||
            serial_hit.distance_squared != parallel_hit.distance_squared) {
            std::printf("MISMATCH on query %d: serial row %zu vs parallel row %zu\n", qi,
                        serial_hit.row, parallel_hit.row);
            return 1;
        }
    }
    serial_ms /= queries;
    parallel_ms /= queries;

    std::printf("serial:   %8.3f ms/query\n", serial_ms);
    std::printf("parallel: %8.3f ms/query\n", parallel_ms);
    std::printf("speedup:  %8.2fx\n", serial_ms / parallel_ms);
    return 0;
}
