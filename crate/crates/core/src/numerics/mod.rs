//! Special functions, a Kolmogorov–Smirnov test and 2-D quadrature.

mod ks;
mod quad;
mod special;

pub use ks::{kolmogorov_sf, ks_test, KsNull, KsOutcome, KsSided};
pub use quad::{integrate_2d, QuadratureAxis, QuadratureGrid};
pub use special::{chisq_cdf, gamma_p_q, ln_gamma, normal_cdf, normal_pdf, normal_quantile};
