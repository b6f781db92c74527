#pragma once
// Independent reference for depth-1 least-squares boosting on one feature.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace facedose::testing {

// Plain stage-wise stump boosting on one feature: thresholds at midpoints of
// sorted distinct values, the split with the smallest two-sided SSE wins if
// it beats the unsplit SSE.
struct StumpOracle
{
    double base = 0.0;
    std::vector<std::array<double, 3>> stumps; // threshold, left value, right value
    double rate = 0.1;

    double predict(double x) const
    {
        double y = base;
        for (const auto& s : stumps) y += rate * (x <= s[0] ? s[1] : s[2]);
        return y;
    }
};

inline StumpOracle fit_stumps(const std::vector<double>& x, const std::vector<double>& y, int stages, double rate,
                       int min_leaf)
{
    StumpOracle o;
    o.rate = rate;
    const std::size_t n = x.size();
    for (double v : y) o.base += v;
    o.base /= static_cast<double>(n);
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    for (int s = 0; s < stages; ++s) {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - o.predict(x[i]);
        double mean = 0.0;
        for (double v : r) mean += v;
        mean /= static_cast<double>(n);
        double best_sse = 0.0;
        for (double v : r) best_sse += (v - mean) * (v - mean);
        std::array<double, 3> best{INFINITY, mean, mean};
        for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
            const double t = 0.5 * (sorted[k] + sorted[k + 1]);
            double ls = 0, rs = 0;
            int ln = 0, rn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (x[i] <= t) {
                    ls += r[i];
                    ++ln;
                } else {
                    rs += r[i];
                    ++rn;
                }
            }
            if (ln < min_leaf || rn < min_leaf) continue;
            const double lm = ls / ln, rm = rs / rn;
            double sse = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = r[i] - (x[i] <= t ? lm : rm);
                sse += d * d;
            }
            if (sse < best_sse - 1e-12 * std::max(1.0, best_sse)) {
                best_sse = sse;
                best = {t, lm, rm};
            }
        }
        o.stumps.push_back(best);
    }
    return o;
}

} // namespace facedose::testing
