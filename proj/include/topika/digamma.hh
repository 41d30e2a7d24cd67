// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

namespace topika {

// psi(x) = d/dx log Gamma(x) for x > 0; NaN otherwise. Upward recurrence to
// x >= 10, then the asymptotic series. Absolute error a few ulps.
double digamma(double x);

// exp(psi(x)), which behaves like x - 0.5 for x > 1.
double exp_digamma(double x);

}  // namespace topika
