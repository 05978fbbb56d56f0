//! Two-dimensional product quadrature on Gauss–Legendre axes.

use crate::error::{Error, Result};

/// One quadrature axis: strictly increasing nodes with positive weights.
#[derive(Debug, Clone)]
pub struct QuadratureAxis {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureAxis {
    /// Gauss–Legendre rule with `n` nodes on the interval `[a, b]`.
    pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("quadrature axis needs at least one node"));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::domain(format!(
                "invalid quadrature interval [{a}, {b}]"
            )));
        }
        let (mut nodes, mut weights) = legendre_rule(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
            *x = mid + half * *x;
            *w *= half;
        }
        Ok(QuadratureAxis { nodes, weights })
    }

    /// Axis from explicit nodes and weights; validates the type invariants.
    pub fn custom(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::domain("axis nodes/weights must be nonempty and equal length"));
        }
        if weights.iter().any(|w| *w <= 0.0 || w.is_nan()) {
            return Err(Error::domain("axis weights must be positive"));
        }
        if nodes.windows(2).any(|p| p[0] >= p[1] || p[0].is_nan() || p[1].is_nan()) {
            return Err(Error::domain("axis nodes must be strictly increasing"));
        }
        Ok(QuadratureAxis { nodes, weights })
    }
}

/// Product rule over two axes.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub x: QuadratureAxis,
    pub y: QuadratureAxis,
}

impl QuadratureGrid {
    pub fn gauss_legendre(nx: usize, xr: (f64, f64), ny: usize, yr: (f64, f64)) -> Result<Self> {
        Ok(QuadratureGrid {
            x: QuadratureAxis::gauss_legendre(nx, xr.0, xr.1)?,
            y: QuadratureAxis::gauss_legendre(ny, yr.0, yr.1)?,
        })
    }
}

/// ∬ f(x, y) dx dy by the product rule on `grid`.
///
/// Errors if the integrand is non-finite at any node.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(f: F, grid: &QuadratureGrid) -> Result<f64> {
    let mut total = 0.0;
    for (&x, &wx) in grid.x.nodes.iter().zip(&grid.x.weights) {
        let mut inner = 0.0;
        for (&y, &wy) in grid.y.nodes.iter().zip(&grid.y.weights) {
            let v = f(x, y);
            if !v.is_finite() {
                return Err(Error::numeric(format!(
                    "integrand non-finite at node ({x}, {y}): {v}"
                )));
            }
            inner += wy * v;
        }
        total += wx * inner;
    }
    Ok(total)
}

/// Nodes/weights of the n-point Gauss–Legendre rule on [−1, 1], by Newton
/// iteration on the Legendre polynomial with the usual cosine initial guess.
fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Roots come out in decreasing order; mirror into both halves.
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        // Center the odd node exactly.
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_square_area() {
        let grid = QuadratureGrid::gauss_legendre(8, (0.0, 1.0), 8, (0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(integrate_2d(|_, _| 1.0, &grid).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn separable_gaussian_times_polynomial() {
        // ∫_{-1}^{3} e^{−x²/2}(1+x²) dx · ∫_0^2 y⁴ dy
        // mpmath: 3.57125202394003231 × 32/5 = 22.8560129532162068
        let grid = QuadratureGrid::gauss_legendre(64, (-1.0, 3.0), 64, (0.0, 2.0)).unwrap();
        let v = integrate_2d(|x, y| (-x * x / 2.0).exp() * (1.0 + x * x) * y.powi(4), &grid)
            .unwrap();
        assert_abs_diff_eq!(v, 22.856_012_953_216_207, epsilon = 1e-10);
    }

    #[test]
    fn polynomial_exactness() {
        // n-point GL is exact for degree 2n−1.
        let grid = QuadratureGrid::gauss_legendre(5, (0.0, 1.0), 5, (0.0, 1.0)).unwrap();
        let v = integrate_2d(|x, y| x.powi(9) * y.powi(7), &grid).unwrap();
        assert_abs_diff_eq!(v, 0.1 * 0.125, epsilon = 1e-14);
    }

    #[test]
    fn doubling_refinement_converges() {
        let f = |x: f64, y: f64| (-(x * x + 3.0 * y * y) / 2.0).exp() * (1.0 + x + y * y);
        let coarse = integrate_2d(
            f,
            &QuadratureGrid::gauss_legendre(32, (-6.0, 6.0), 32, (-6.0, 6.0)).unwrap(),
        )
        .unwrap();
        let fine = integrate_2d(
            f,
            &QuadratureGrid::gauss_legendre(64, (-6.0, 6.0), 64, (-6.0, 6.0)).unwrap(),
        )
        .unwrap();
        assert!(((coarse - fine) / fine).abs() < 1e-6);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let grid = QuadratureGrid::gauss_legendre(4, (0.0, 1.0), 4, (0.0, 1.0)).unwrap();
        assert!(integrate_2d(|x, _| 1.0 / (x - x), &grid).is_err());
    }

    #[test]
    fn custom_axis_invariants() {
        assert!(QuadratureAxis::custom(vec![0.0, 1.0], vec![0.5, -0.5]).is_err());
        assert!(QuadratureAxis::custom(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(QuadratureAxis::custom(vec![0.0, 1.0], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn nodes_increasing_weights_positive() {
        for n in [1, 2, 3, 7, 64, 65] {
            let axis = QuadratureAxis::gauss_legendre(n, -1.0, 1.0).unwrap();
            assert!(axis.weights.iter().all(|w| *w > 0.0));
            assert!(axis.nodes.windows(2).all(|p| p[0] < p[1]));
            let total: f64 = axis.weights.iter().sum();
            assert_abs_diff_eq!(total, 2.0, epsilon = 1e-12);
        }
    }
}
