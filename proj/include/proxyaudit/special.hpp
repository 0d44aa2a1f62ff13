#pragma once

namespace proxyaudit::special {

/// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
/// Lentz continued fraction for Q otherwise. Absolute accuracy 1e-10 or better.
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Regularized incomplete beta I_x(a, b) via the modified Lentz continued
/// fraction, using the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) where it converges faster.
double beta_inc(double a, double b, double x);

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
double chi_square_sf(double x, double df);
/// Two-sided p-value of Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);
/// Upper tail of Snedecor's F(d1, d2).
double f_sf(double f, double d1, double d2);

}  // namespace proxyaudit::special
