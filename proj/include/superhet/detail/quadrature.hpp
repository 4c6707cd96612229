#ifndef SUPERHET_DETAIL_QUADRATURE_HPP
#define SUPERHET_DETAIL_QUADRATURE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace superhet::detail {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    int evaluations = 0;
};

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
inline constexpr std::array<double, 8> kronrod15_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod15_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss7_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
QuadResult gauss_kronrod15(F&& f, double a, double b)
{
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * kronrod15_weights[7];
    double gauss = fc * gauss7_weights[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kronrod15_nodes[j];
        const double pair = f(center - dx) + f(center + dx);
        kronrod += kronrod15_weights[j] * pair;
        if (j % 2 == 1) {
            gauss += gauss7_weights[j / 2] * pair;
        }
    }
    return QuadResult{kronrod * half, std::abs((kronrod - gauss) * half), 15};
}

/// Globally adaptive G7K15: repeatedly bisects the interval with the largest
/// error estimate until the summed estimate drops below
/// max(abs_tol, rel_tol * |I|) or the interval budget is spent.
template <class F>
QuadResult integrate_adaptive(F&& f, double a, double b, double abs_tol, double rel_tol,
                              int max_intervals = 2000)
{
    struct Piece {
        double a, b;
        QuadResult r;
        bool operator<(const Piece& other) const { return r.error < other.r.error; }
    };
    std::priority_queue<Piece> heap;
    QuadResult first = gauss_kronrod15(f, a, b);
    heap.push(Piece{a, b, first});
    double total = first.value;
    double error = first.error;
    int evaluations = first.evaluations;
    int intervals = 1;
    while (error > std::max(abs_tol, rel_tol * std::abs(total)) && intervals < max_intervals) {
        const Piece worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) {
            heap.push(worst);
            break;
        }
        const QuadResult left = gauss_kronrod15(f, worst.a, mid);
        const QuadResult right = gauss_kronrod15(f, mid, worst.b);
        total += left.value + right.value - worst.r.value;
        error += left.error + right.error - worst.r.error;
        evaluations += left.evaluations + right.evaluations;
        heap.push(Piece{worst.a, mid, left});
        heap.push(Piece{mid, worst.b, right});
        ++intervals;
    }
    // Recompute the sums from the pieces to shed accumulated rounding.
    total = 0.0;
    error = 0.0;
    while (!heap.empty()) {
        total += heap.top().r.value;
        error += heap.top().r.error;
        heap.pop();
    }
    return QuadResult{total, error, evaluations};
}

/// Wynn's epsilon algorithm over a growing sequence of partial sums.
class WynnEpsilon {
public:
    void push(double partial_sum) { m_sums.push_back(partial_sum); }

    std::size_t size() const noexcept { return m_sums.size(); }

    /// Highest even-column entry of the epsilon table built from all sums so
    /// far, with the difference to the previous one as a crude error estimate.
    struct Estimate {
        double value;
        double error;
    };

    Estimate estimate() const
    {
        const std::size_t n = m_sums.size();
        if (n < 3) {
            const double v = n ? m_sums.back() : 0.0;
            const double e = n > 1 ? std::abs(m_sums[n - 1] - m_sums[n - 2])
                                   : std::numeric_limits<double>::infinity();
            return Estimate{v, e};
        }
        // prev = column k-1, cur = column k; column -1 is zero.
        std::vector<double> prev(n + 1, 0.0);
        std::vector<double> cur(m_sums.begin(), m_sums.end());
        double best = cur.back();
        double last_even = cur.back();
        double err = std::abs(cur[n - 1] - cur[n - 2]);
        for (std::size_t k = 1; k < n; ++k) {
            std::vector<double> next(n - k);
            bool degenerate = false;
            for (std::size_t i = 0; i + k < n; ++i) {
                const double diff = cur[i + 1] - cur[i];
                if (diff == 0.0) {
                    degenerate = true;
                    break;
                }
                next[i] = prev[i + 1] + 1.0 / diff;
            }
            if (degenerate) {
                break;
            }
            prev = std::move(cur);
            cur = std::move(next);
            if (k % 2 == 0) {
                const double candidate = cur.back();
                if (!std::isfinite(candidate)) {
                    break;
                }
                err = std::abs(candidate - last_even);
                if (cur.size() >= 2) {
                    err = std::max(err, std::abs(cur[cur.size() - 1] - cur[cur.size() - 2]));
                }
                last_even = candidate;
                best = candidate;
            }
        }
        return Estimate{best, err};
    }

private:
    std::vector<double> m_sums;
};

} // namespace superhet::detail

#endif
