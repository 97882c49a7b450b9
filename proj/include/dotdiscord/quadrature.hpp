#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued
// integrands, plus a nested two-dimensional driver built on top of it.
//
// The error estimate of a panel is the raw |K15 - G7| difference per
// component, which is a deliberately pessimistic bound for smooth
// integrands. Integrands may return either a plain value array or a
// Sample carrying its own error (used when the integrand is itself an
// inner quadrature); sample errors are integrated with the Kronrod weights
// and added to the panel error.
//
// Both rules are open (no node on the panel end points), so integrands
// never need to be evaluated at the boundary of the domain.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <type_traits>
#include <vector>

namespace dotdiscord::quad {

template <std::size_t N>
using Values = std::array<double, N>;

template <std::size_t N>
struct Sample {
  Values<N> value{};
  Values<N> error{};
};

template <std::size_t N>
struct Result {
  Values<N> value{};
  Values<N> error{};
  std::size_t panels = 0;
  std::size_t evaluations = 0;
  bool converged = false;

  double max_error() const { return *std::max_element(error.begin(), error.end()); }
};

struct Options {
  double abs_tolerance = 1e-8;
  std::size_t initial_panels = 1;
  std::size_t max_panels = 20000;
};

namespace detail {

// Kronrod abscissae on [-1, 1]; odd indices are the Gauss nodes.
inline constexpr std::array<double, 8> kronrod_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for kronrod_nodes[1], [3], [5], [7].
inline constexpr std::array<double, 4> gauss_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <std::size_t N, class F>
Sample<N> call(F& f, double x) {
  using R = std::invoke_result_t<F&, double>;
  if constexpr (std::is_same_v<R, Sample<N>>) {
    return f(x);
  } else {
    static_assert(std::is_same_v<R, Values<N>>,
                  "integrand must return quad::Values<N> or quad::Sample<N>");
    return Sample<N>{f(x), {}};
  }
}

template <std::size_t N>
struct Panel {
  double lo = 0.0;
  double hi = 0.0;
  Values<N> value{};
  Values<N> error{};

  double worst() const { return *std::max_element(error.begin(), error.end()); }
};

template <std::size_t N, class F>
Panel<N> gauss_kronrod(F& f, double lo, double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);

  Values<N> kronrod{};
  Values<N> gauss{};
  Values<N> carried{};

  auto accumulate = [&](const Sample<N>& s, double wk, double wg) {
    for (std::size_t c = 0; c < N; ++c) {
      kronrod[c] += wk * s.value[c];
      gauss[c] += wg * s.value[c];
      carried[c] += wk * s.error[c];
    }
  };

  accumulate(call<N>(f, center), kronrod_weights[7], gauss_weights[3]);
  for (std::size_t i = 0; i < 7; ++i) {
    const double dx = half * kronrod_nodes[i];
    const double wg = (i % 2 == 1) ? gauss_weights[i / 2] : 0.0;
    accumulate(call<N>(f, center - dx), kronrod_weights[i], wg);
    accumulate(call<N>(f, center + dx), kronrod_weights[i], wg);
  }

  Panel<N> p{lo, hi, {}, {}};
  for (std::size_t c = 0; c < N; ++c) {
    p.value[c] = kronrod[c] * half;
    p.error[c] = std::abs((kronrod[c] - gauss[c]) * half) + carried[c] * std::abs(half);
  }
  return p;
}

}  // namespace detail

inline constexpr std::size_t evaluations_per_panel = 15;

// Integrates f over [lo, hi]. The interval is first cut into
// opts.initial_panels equal panels; the panel with the largest error is then
// bisected until every component's summed error is below opts.abs_tolerance
// or the panel budget is exhausted (converged = false in that case).
template <std::size_t N, class F>
Result<N> integrate(F&& f, double lo, double hi, const Options& opts) {
  using detail::Panel;
  Result<N> out;
  if (!(hi > lo)) {
    out.converged = true;
    return out;
  }

  const std::size_t initial = std::max<std::size_t>(1, opts.initial_panels);
  std::vector<Panel<N>> panels;
  panels.reserve(initial * 2);

  auto worse = [&panels](std::size_t a, std::size_t b) {
    const double ea = panels[a].worst();
    const double eb = panels[b].worst();
    if (ea != eb) return ea < eb;
    return a > b;  // earlier panel first on ties
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(worse)> queue(worse);

  Values<N> total_error{};
  const double width = (hi - lo) / static_cast<double>(initial);
  for (std::size_t i = 0; i < initial; ++i) {
    const double a = lo + width * static_cast<double>(i);
    const double b = (i + 1 == initial) ? hi : lo + width * static_cast<double>(i + 1);
    panels.push_back(detail::gauss_kronrod<N>(f, a, b));
    for (std::size_t c = 0; c < N; ++c) total_error[c] += panels.back().error[c];
    queue.push(panels.size() - 1);
  }

  auto within_tolerance = [&] {
    return std::all_of(total_error.begin(), total_error.end(),
                       [&](double e) { return e <= opts.abs_tolerance; });
  };

  while (!within_tolerance() && panels.size() < opts.max_panels) {
    const std::size_t worst = queue.top();
    queue.pop();
    const Panel<N> parent = panels[worst];
    const double mid = 0.5 * (parent.lo + parent.hi);
    if (!(mid > parent.lo && mid < parent.hi)) break;  // cannot bisect further

    Panel<N> left = detail::gauss_kronrod<N>(f, parent.lo, mid);
    Panel<N> right = detail::gauss_kronrod<N>(f, mid, parent.hi);
    for (std::size_t c = 0; c < N; ++c) {
      total_error[c] += left.error[c] + right.error[c] - parent.error[c];
    }
    panels[worst] = left;
    panels.push_back(right);
    queue.push(worst);
    queue.push(panels.size() - 1);
  }

  // Final sums in left-to-right order so the result does not depend on the
  // refinement history of the running totals.
  std::sort(panels.begin(), panels.end(),
            [](const Panel<N>& a, const Panel<N>& b) { return a.lo < b.lo; });
  for (const auto& p : panels) {
    for (std::size_t c = 0; c < N; ++c) {
      out.value[c] += p.value[c];
      out.error[c] += p.error[c];
    }
  }
  out.panels = panels.size();
  out.evaluations = panels.size() * evaluations_per_panel;
  out.converged = std::all_of(out.error.begin(), out.error.end(),
                              [&](double e) { return e <= opts.abs_tolerance; });
  return out;
}

struct Options2D {
  double abs_tolerance = 1e-8;
  std::size_t outer_initial_panels = 1;
  std::size_t inner_initial_panels = 1;
  std::size_t max_panels = 20000;
  // Fraction of the tolerance granted to the integrated inner errors.
  double inner_share = 0.5;
};

// Nested integral of f(inner, outer) over [inner_lo, inner_hi] x
// [outer_lo, outer_hi]. The inner tolerance is scaled by the outer length
// so the integrated inner error stays below inner_share * abs_tolerance.
template <std::size_t N, class F>
Result<N> integrate_2d(F&& f, double inner_lo, double inner_hi, double outer_lo,
                       double outer_hi, const Options2D& opts) {
  const double outer_len = outer_hi - outer_lo;
  Options inner_opts;
  inner_opts.abs_tolerance =
      opts.abs_tolerance * opts.inner_share / std::max(outer_len, 1e-300);
  inner_opts.initial_panels = opts.inner_initial_panels;
  inner_opts.max_panels = opts.max_panels;

  std::size_t inner_evaluations = 0;
  auto outer = [&](double y) -> Sample<N> {
    auto r = integrate<N>([&](double x) { return f(x, y); }, inner_lo, inner_hi, inner_opts);
    inner_evaluations += r.evaluations;
    return Sample<N>{r.value, r.error};
  };

  Options outer_opts;
  outer_opts.abs_tolerance = opts.abs_tolerance;
  outer_opts.initial_panels = opts.outer_initial_panels;
  outer_opts.max_panels = opts.max_panels;

  Result<N> r = integrate<N>(outer, outer_lo, outer_hi, outer_opts);
  r.evaluations = inner_evaluations;
  return r;
}

}  // namespace dotdiscord::quad
