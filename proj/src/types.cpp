#include "mannfix/types.hpp"

#include <algorithm>
#include <cmath>

namespace mannfix {

double sup_distance(const ValueVector& x, const ValueVector& y) {
    require_dimension("sup_distance", x.size(), y.size());
    double best = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] == y[i]) continue; // also covers inf == inf
        best = std::max(best, std::abs(x[i] - y[i]));
    }
    return best;
}

double error_vs_reference(const ValueVector& x, const ValueVector& reference) {
    require_dimension("error_vs_reference", reference.size(), x.size());
    double best = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isinf(reference[i])) continue;
        best = std::max(best, std::abs(x[i] - reference[i]));
    }
    return best;
}

double sup_norm(const ValueVector& x) {
    double best = 0.0;
    for (double v : x) best = std::max(best, std::abs(v));
    return best;
}

bool ZeroBox::contains(const ValueVector& x, double slack) const {
    if (x.size() != bound.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] >= 0.0)) return false;
        if (x[i] > bound[i] + slack) return false;
    }
    return true;
}

} // namespace mannfix
