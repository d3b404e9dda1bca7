//! Gauss-Legendre rules and composite variants used throughout the kernel
//! and norm computations.

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
///
/// Nodes are computed by Newton iteration on the Legendre polynomial from
/// Chebyshev initial guesses; deterministic for a given `n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev guess for the i-th root (descending).
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `n`-point Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    )
}

/// Composite Gauss-Legendre rule: `panels` equal panels on [a, b] with
/// `per_panel` nodes each.
pub fn composite_gauss_legendre(per_panel: usize, panels: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(per_panel * panels);
    let mut weights = Vec::with_capacity(per_panel * panels);
    let step = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * step;
        let (xs, ws) = gauss_legendre_on(per_panel, lo, lo + step);
        nodes.extend(xs);
        weights.extend(ws);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        // GL-n is exact for degree 2n-1.
        let (xs, ws) = gauss_legendre(5);
        let val: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(8)).sum();
        assert_relative_eq!(val, 2.0 / 9.0, max_relative = 1e-13);
    }

    #[test]
    fn mapped_rule_integrates_exp() {
        let (xs, ws) = gauss_legendre_on(24, 0.0, 1.0);
        let val: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.exp()).sum();
        assert_relative_eq!(val, std::f64::consts::E - 1.0, max_relative = 1e-14);
    }

    #[test]
    fn composite_matches_single_panel_on_smooth_integrand() {
        let (xs, ws) = composite_gauss_legendre(16, 8, 0.0, 10.0);
        let val: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (-x).exp()).sum();
        assert_relative_eq!(val, 1.0 - (-10.0f64).exp(), max_relative = 1e-12);
    }
}
