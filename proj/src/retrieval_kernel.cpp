#include "rcg/retrieval_kernel.hpp"

#include <cstdint>

namespace rcg::kernel {

namespace {

inline bool beats(double d2, std::size_t row, const FarthestHit& best) {
    if (d2 > best.distance_squared) return true;
    return d2 == best.distance_squared && row < best.row;
}

} // namespace

double squared_distance(const double* a, const double* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        double d = a[k] - b[k];
        acc += d * d;
    }
    return acc;
}

FarthestHit farthest_row_serial(std::span<const double> matrix, std::size_t rows,
                                std::size_t dim, std::span<const double> query,
                                std::span<const unsigned char> skip) {
    FarthestHit best;
    for (std::size_t i = 0; i < rows; ++i) {
        if (!skip.empty() && skip[i]) continue;
        double d2 = squared_distance(matrix.data() + i * dim, query.data(), dim);
        if (beats(d2, i, best)) best = {i, d2};
    }
    return best;
}

FarthestHit farthest_row(std::span<const double> matrix, std::size_t rows, std::size_t dim,
                         std::span<const double> query, std::span<const unsigned char> skip) {
#ifndef _OPENMP
    return farthest_row_serial(matrix, rows, dim, query, skip);
#else
    FarthestHit best;
    #pragma omp parallel
    {
        FarthestHit local;
        #pragma omp for nowait schedule(static)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(rows); ++i) {
            auto row = static_cast<std::size_t>(i);
            if (!skip.empty() && skip[row]) continue;
            double d2 = squared_distance(matrix.data() + row * dim, query.data(), dim);
            if (beats(d2, row, local)) local = {row, d2};
        }
        #pragma omp critical
        {
            if (local.found() && beats(local.distance_squared, local.row, best))
                best = local;
        }
    }
    return best;
#endif
}

} // namespace rcg::kernel
