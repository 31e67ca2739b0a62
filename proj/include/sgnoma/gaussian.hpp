#pragma once

namespace sgnoma {

// Inverse of the standard normal CDF. Acklam's rational approximation
// refined with one Halley step against std::erfc; relative error is below
// 1e-10 over (0, 1).
double inverse_normal_cdf(double p);

// Inverse of the Gaussian Q-function, Q(x) = P(Z > x).
// Domain (0, 1); throws std::domain_error outside.
double inverse_q(double p);

}  // namespace sgnoma
