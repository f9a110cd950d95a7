#include "bsde/interp.hpp"

#include <algorithm>
#include <cmath>

#include "bsde/errors.hpp"

namespace bsde {

MonotoneCubic::MonotoneCubic(std::span<const double> x, std::span<const double> y)
    : x_(x.begin(), x.end()), y_(y.begin(), y.end()) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
        throw ConfigurationError("interpolation needs >= 2 matching nodes");
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!(x_[i] < x_[i + 1]))
            throw ConfigurationError("interpolation abscissae must be strictly increasing");

    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i)
        d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);

    slope_.assign(n, 0.0);
    slope_[0] = d[0];
    slope_[n - 1] = d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i)
        slope_[i] = 0.5 * (d[i - 1] + d[i]);

    // Fritsch-Carlson limiter.
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (d[i] == 0.0) {
            slope_[i] = 0.0;
            slope_[i + 1] = 0.0;
            continue;
        }
        if (i > 0 && d[i - 1] * d[i] < 0.0)
            slope_[i] = 0.0;
        const double alpha = slope_[i] / d[i];
        const double beta = slope_[i + 1] / d[i];
        if (alpha < 0.0)
            slope_[i] = 0.0;
        if (beta < 0.0)
            slope_[i + 1] = 0.0;
        const double s = alpha * alpha + beta * beta;
        if (s > 9.0) {
            const double tau = 3.0 / std::sqrt(s);
            slope_[i] = tau * alpha * d[i];
            slope_[i + 1] = tau * beta * d[i];
        }
    }
}

double MonotoneCubic::operator()(double v) const {
    if (v <= x_.front())
        return y_.front();
    if (v >= x_.back())
        return y_.back();
    const auto it = std::upper_bound(x_.begin(), x_.end(), v);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double t = (v - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    const double h10 = t3 - 2.0 * t2 + t;
    const double h01 = -2.0 * t3 + 3.0 * t2;
    const double h11 = t3 - t2;
    return h00 * y_[i] + h10 * h * slope_[i] + h01 * y_[i + 1] + h11 * h * slope_[i + 1];
}

} // namespace bsde
