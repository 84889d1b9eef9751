#pragma once

#include <cstddef>
#include <span>

namespace rcg::kernel {

// Result of a farthest-row scan over a row-major matrix. A negative
// distance_squared means nothing was scanned (empty or fully masked input).
struct FarthestHit {
    std::size_t row = 0;
    double distance_squared = -1.0;
    bool found() const { return distance_squared >= 0.0; }
};

// Shared inner loop. Plain sequential accumulation so the serial and
// parallel scans produce bit-identical per-row distances.
double squared_distance(const double* a, const double* b, std::size_t dim);

// Serial reference scan. Exhaustive and exact; ties resolve to the smallest
// row index. `skip` (when nonempty) masks rows out of the scan.
FarthestHit farthest_row_serial(std::span<const double> matrix, std::size_t rows,
                                std::size_t dim, std::span<const double> query,
                                std::span<const unsigned char> skip = {});

// OpenMP scan over the same data. Returns exactly the serial result: per-row
// distances are computed with the same summation order and the merge uses the
// same (distance, row) comparison.
FarthestHit farthest_row(std::span<const double> matrix, std::size_t rows,
                         std::size_t dim, std::span<const double> query,
                         std::span<const unsigned char> skip = {});

} // namespace rcg::kernel
