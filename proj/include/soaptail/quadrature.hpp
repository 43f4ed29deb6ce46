#pragma once

#include <functional>
#include <span>

namespace soaptail {

struct QuadOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_intervals = 4000;
};

/// Globally adaptive Gauss-Kronrod (G15/K31 rule) integration of f over [a, b].
/// b may be +infinity; the improper range is mapped to [0, 1) by t = a + u/(1-u).
/// Stops when the summed error estimate drops below max(abs_tol, rel_tol*|I|).
double integrate(const std::function<double(double)>& f, double a, double b,
                 const QuadOptions& opts = {});

/// Same, but first splits [a, b] at every breakpoint strictly inside it.
/// Use for integrands with known kinks or jumps (atoms, support edges).
double integrate(const std::function<double(double)>& f, double a, double b,
                 std::span<const double> breakpoints, const QuadOptions& opts = {});

}  // namespace soaptail
