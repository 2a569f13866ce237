#ifndef PSLIB_PATHS_HPP
#define PSLIB_PATHS_HPP

#include <cstddef>

#include "pslib/types.hpp"

namespace pslib {

/// Weighted coefficient paths beta_{1:J}. Row s of `values` stores path s as
/// J consecutive coefficient vectors of length `dim`.
struct PathSet {
    std::size_t intervals = 0;
    std::size_t dim = 0;
    RowMatrix values;
    Vector weights;  // normalized

    std::size_t size() const { return static_cast<std::size_t>(values.rows()); }

    Eigen::Map<const RowMatrix> path(std::size_t s) const {
        return {values.row(static_cast<Eigen::Index>(s)).data(), static_cast<Eigen::Index>(intervals),
                static_cast<Eigen::Index>(dim)};
    }

    static PathSet single(const RowMatrix& path) {
        PathSet p;
        p.intervals = static_cast<std::size_t>(path.rows());
        p.dim = static_cast<std::size_t>(path.cols());
        p.values = Eigen::Map<const RowMatrix>(path.data(), 1, path.size());
        p.weights = Vector::Ones(1);
        return p;
    }
};

}  // namespace pslib

#endif
