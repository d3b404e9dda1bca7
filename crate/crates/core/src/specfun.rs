//! Rescaled Laguerre functions, the rescaled Hermite operator on radial
//! profiles, and the squared norms tying them to the Plancherel formula.

use crate::error::{Error, Result};
use crate::quadrature::composite_gauss_legendre;

/// Parameters of the rescaled Laguerre function
/// phi_k^{(lambda, m)}(z) = lambda^m L_k^{m-1}(lambda |z|^2 / 2) exp(-lambda |z|^2 / 4)
/// on R^{2m}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaguerreParams {
    pub k: usize,
    pub lambda: f64,
    pub m: usize,
}

impl LaguerreParams {
    pub fn new(k: usize, lambda: f64, m: usize) -> Result<Self> {
        if !(lambda > 0.0) || m == 0 {
            return Err(Error::InvalidParameter(
                "laguerre parameters need lambda > 0 and m >= 1".into(),
            ));
        }
        Ok(LaguerreParams { k, lambda, m })
    }
}

/// Generalized Laguerre polynomial L_k^alpha(t) by the three-term recurrence,
/// with renormalization so intermediate magnitudes cannot overflow. Returns
/// (mantissa, exp2) with value = mantissa * 2^exp2.
fn laguerre_scaled(k: usize, alpha: f64, t: f64) -> (f64, i64) {
    if k == 0 {
        return (1.0, 0);
    }
    let mut prev = 1.0f64; // L_0
    let mut cur = 1.0 + alpha - t; // L_1
    let mut exp2: i64 = 0;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - t) * cur - (jf + alpha) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
        let mag = cur.abs().max(prev.abs());
        if mag > 1e200 {
            cur *= 2f64.powi(-512);
            prev *= 2f64.powi(-512);
            exp2 += 512;
        } else if mag != 0.0 && mag < 1e-200 {
            cur *= 2f64.powi(512);
            prev *= 2f64.powi(512);
            exp2 -= 512;
        }
    }
    (cur, exp2)
}

/// Generalized Laguerre polynomial L_k^alpha(t).
pub fn laguerre_polynomial(k: usize, alpha: f64, t: f64) -> f64 {
    let (mant, exp2) = laguerre_scaled(k, alpha, t);
    mant * 2f64.powi(exp2 as i32)
}

/// phi_k^{(lambda, m)} evaluated at squared radius rho2 = |z|^2.
///
/// Large k t is handled in log magnitude: the result is assembled as
/// sign * exp(log|L| + m log lambda - lambda rho2 / 4), which stays finite
/// because |L_k^alpha(t)| e^{-t/2} <= binom(k + alpha, k) for t >= 0.
pub fn laguerre_phi(params: LaguerreParams, rho2: f64) -> Result<f64> {
    if rho2 < 0.0 {
        return Err(Error::InvalidParameter("rho2 must be nonnegative".into()));
    }
    let LaguerreParams { k, lambda, m } = params;
    let alpha = m as f64 - 1.0;
    let t = 0.5 * lambda * rho2;
    let (mant, exp2) = laguerre_scaled(k, alpha, t);
    if mant == 0.0 {
        return Ok(0.0);
    }
    let log_mag =
        mant.abs().ln() + exp2 as f64 * std::f64::consts::LN_2 + m as f64 * lambda.ln() - 0.5 * t;
    if log_mag > 700.0 {
        return Err(Error::Precondition(format!(
            "laguerre_phi overflow: log magnitude {log_mag:.1}"
        )));
    }
    Ok(mant.signum() * log_mag.exp())
}

/// phi_k^{(lambda, m)}(rho2) for all k = 0..=kmax in one recurrence pass.
///
/// The shared prefactor lambda^m e^{-t/2} is applied in log space; the raw
/// polynomial recurrence falls back to the scaled per-k path if it leaves
/// the f64 range.
pub fn laguerre_phi_sequence(kmax: usize, lambda: f64, m: usize, rho2: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || m == 0 || rho2 < 0.0 {
        return Err(Error::InvalidParameter(
            "laguerre sequence needs lambda > 0, m >= 1, rho2 >= 0".into(),
        ));
    }
    let alpha = m as f64 - 1.0;
    let t = 0.5 * lambda * rho2;
    let log_pref = m as f64 * lambda.ln() - 0.5 * t;
    let pref = if log_pref < -700.0 { 0.0 } else { log_pref.exp() };
    let mut out = Vec::with_capacity(kmax + 1);
    let mut prev = 1.0f64;
    out.push(prev * pref);
    if kmax == 0 {
        return Ok(out);
    }
    let mut cur = 1.0 + alpha - t;
    out.push(cur * pref);
    for j in 1..kmax {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - t) * cur - (jf + alpha) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
        if !cur.is_finite() {
            // Restart in scaled arithmetic for the remaining degrees.
            for k in (j + 1)..=kmax {
                out.push(laguerre_phi(LaguerreParams { k, lambda, m }, rho2)?);
            }
            return Ok(out);
        }
        out.push(cur * pref);
    }
    Ok(out)
}

/// Result of applying the rescaled Hermite operator on a radial grid.
#[derive(Debug, Clone)]
pub struct HermiteApplied {
    pub values: Vec<f64>,
    /// Set when lambda h^2 > 0.1, i.e. the grid under-resolves the potential.
    pub coarse_grid: bool,
}

/// Applies H = -Delta + (lambda^2/4) |z|^2 on R^{2m} to a radial profile
/// sampled at rho_i = i * step, using second-order central differences.
///
/// The radial Laplacian of f(|z|) = g(rho) is g'' + (2m-1)/rho g'; at the
/// origin the even extension gives Delta f(0) = 2m g''(0).
pub fn hermite_apply(lambda: f64, m: usize, step: f64, samples: &[f64]) -> Result<HermiteApplied> {
    if !(lambda > 0.0) || m == 0 || !(step > 0.0) {
        return Err(Error::InvalidParameter(
            "hermite_apply needs lambda > 0, m >= 1, step > 0".into(),
        ));
    }
    if samples.len() < 3 {
        return Err(Error::InvalidParameter(
            "need at least three radial samples".into(),
        ));
    }
    let n = samples.len();
    let dim = 2.0 * m as f64;
    let h2 = step * step;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let rho = i as f64 * step;
        let g = samples[i];
        let gp = if i + 1 < n { samples[i + 1] } else { 0.0 };
        let gm = if i > 0 { samples[i - 1] } else { samples[1] };
        let second = (gp - 2.0 * g + gm) / h2;
        let laplacian = if i == 0 {
            dim * second
        } else {
            second + (dim - 1.0) / rho * (gp - gm) / (2.0 * step)
        };
        out[i] = -laplacian + 0.25 * lambda * lambda * rho * rho * g;
    }
    Ok(HermiteApplied {
        values: out,
        coarse_grid: lambda * h2 > 0.1,
    })
}

/// Truncation radius used by the norm quadrature: |z|^2 = (4/lambda)(2k+m+40).
pub fn norm_truncation_rho2(params: LaguerreParams) -> f64 {
    (4.0 / params.lambda) * (2.0 * params.k as f64 + params.m as f64 + 40.0)
}

fn surface_area_s2m_minus_1(m: usize) -> f64 {
    // |S^{2m-1}| = 2 pi^m / (m-1)!
    let mut fact = 1.0;
    for i in 1..m {
        fact *= i as f64;
    }
    2.0 * std::f64::consts::PI.powi(m as i32) / fact
}

/// Radial quadrature of int_{R^{2m}} phi_k phi_{k'} dz for shared (lambda, m).
///
/// After t = lambda |z|^2 / 2 the integral is
/// |S^{2m-1}| 2^{m-1} lambda^m int L_k L_{k'} t^{m-1} e^{-t} dt; the
/// substitution t = s^2 equispaces the Laguerre oscillations before the
/// composite Gauss-Legendre pass.
pub fn laguerre_inner_product(a: LaguerreParams, b: LaguerreParams, nodes: usize) -> Result<f64> {
    if a.lambda != b.lambda || a.m != b.m {
        return Err(Error::InvalidParameter(
            "inner product needs matching lambda and m".into(),
        ));
    }
    let m = a.m;
    let alpha = m as f64 - 1.0;
    let kmax = a.k.max(b.k);
    let t_max = 2.0 * (2.0 * kmax as f64 + m as f64 + 40.0);
    let s_max = t_max.sqrt();
    let per_panel = 16usize;
    let panels = (nodes / per_panel).max(8);
    let (ss, ws) = composite_gauss_legendre(per_panel, panels, 0.0, s_max);
    let mut integral = 0.0;
    for (s, w) in ss.iter().zip(&ws) {
        let t = s * s;
        let la = laguerre_polynomial(a.k, alpha, t);
        let lb = laguerre_polynomial(b.k, alpha, t);
        integral += w * 2.0 * s * la * lb * t.powf(alpha) * (-t).exp();
    }
    Ok(surface_area_s2m_minus_1(m) * 2f64.powi(m as i32 - 1) * a.lambda.powi(m as i32) * integral)
}

/// Squared L^2 norm of phi_k^{(lambda, m)} over R^{2m} by quadrature with
/// `nodes` total Gauss-Legendre points (default 256).
pub fn laguerre_norm_sq(params: LaguerreParams, nodes: usize) -> Result<f64> {
    laguerre_inner_product(params, params, nodes)
}

pub const DEFAULT_NORM_NODES: usize = 256;

/// Binomial coefficient as f64.
pub fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut out = 1.0;
    for i in 0..k {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn phi_at_k0_is_gaussian() {
        let p = LaguerreParams::new(0, 1.7, 2).unwrap();
        let v = laguerre_phi(p, 0.9).unwrap();
        assert_relative_eq!(v, 1.7f64.powi(2) * (-1.7f64 * 0.9 / 4.0).exp(), max_relative = 1e-14);
    }

    #[test]
    fn phi_value_at_origin_is_lambda_pow_m_times_binom() {
        // L_k^{m-1}(0) = binom(k+m-1, k).
        let p = LaguerreParams::new(1, 1.0, 1).unwrap();
        assert_relative_eq!(laguerre_phi(p, 0.0).unwrap(), 1.0);
        let p = LaguerreParams::new(5, 2.0, 3).unwrap();
        assert_relative_eq!(
            laguerre_phi(p, 0.0).unwrap(),
            8.0 * binomial(7, 5),
            max_relative = 1e-13
        );
    }

    #[test]
    fn recurrence_matches_expanded_polynomial() {
        // Degree-7 type-2 Laguerre at t = 1.3, coefficients
        // (-1)^j binom(k + alpha, k - j) / j! accumulated by Horner in f64
        // (they are exactly representable small rationals times binomials).
        let k = 7usize;
        let alpha = 2.0;
        let t: f64 = 1.3;
        let mut coeffs = Vec::new();
        for j in 0..=k {
            let c = (-1.0f64).powi(j as i32) * binomial(k + 2, k - j)
                / (1..=j).map(|i| i as f64).product::<f64>().max(1.0);
            coeffs.push(c);
        }
        let mut horner = 0.0;
        for c in coeffs.iter().rev() {
            horner = horner * t + c;
        }
        assert_relative_eq!(laguerre_polynomial(k, alpha, t), horner, max_relative = 1e-13);

        let p = LaguerreParams::new(7, 2.0, 3).unwrap();
        let expect = 2f64.powi(3) * horner * (-2.0f64 * 1.3 / 4.0).exp();
        // rho2 such that t = lambda rho2 / 2 = 1.3.
        assert_relative_eq!(laguerre_phi(p, 1.3).unwrap(), expect, max_relative = 1e-13);
    }

    #[test]
    fn sequence_matches_pointwise_evaluation() {
        let seq = laguerre_phi_sequence(40, 0.8, 2, 3.7).unwrap();
        for (k, v) in seq.iter().enumerate() {
            let p = LaguerreParams::new(k, 0.8, 2).unwrap();
            let direct = laguerre_phi(p, 3.7).unwrap();
            assert!(
                (v - direct).abs() <= 1e-12 * direct.abs().max(1.0),
                "k = {k}: {v} vs {direct}"
            );
        }
    }

    #[test]
    fn hermite_eigenrelation_h1_ground_state() {
        // H phi_0 = m lambda phi_0.
        let lambda = 1.3;
        let m = 1usize;
        let h = 0.005;
        let n = ((12.0 / h) as usize) + 1;
        let p = LaguerreParams::new(0, lambda, m).unwrap();
        let samples: Vec<f64> = (0..n)
            .map(|i| laguerre_phi(p, (i as f64 * h).powi(2)).unwrap())
            .collect();
        let applied = hermite_apply(lambda, m, h, &samples).unwrap();
        assert!(!applied.coarse_grid);
        // Compare away from the outer boundary.
        let keep = n - 200;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..keep {
            let rho = i as f64 * h;
            let w = rho.powi(1); // 2m-1 = 1
            num += w * (applied.values[i] - m as f64 * lambda * samples[i]).powi(2);
            den += w * samples[i].powi(2);
        }
        assert!((num / den).sqrt() < 1e-4, "residual {}", (num / den).sqrt());
    }

    #[test]
    fn hermite_eigenrelation_k3() {
        // H phi_3^{(1,1)} = 7 phi_3.
        let h = 0.01;
        let n = ((14.0 / h) as usize) + 1;
        let p = LaguerreParams::new(3, 1.0, 1).unwrap();
        let samples: Vec<f64> = (0..n)
            .map(|i| laguerre_phi(p, (i as f64 * h).powi(2)).unwrap())
            .collect();
        let applied = hermite_apply(1.0, 1, h, &samples).unwrap();
        let keep = n - 200;
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..keep {
            let rho = i as f64 * h;
            num += rho * (applied.values[i] - 7.0 * samples[i]).powi(2);
            den += rho * samples[i].powi(2);
        }
        assert!((num / den).sqrt() < 1e-3, "residual {}", (num / den).sqrt());
    }

    #[test]
    fn hermite_of_zero_is_zero() {
        let applied = hermite_apply(2.0, 1, 0.1, &[0.0; 32]).unwrap();
        assert!(applied.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn norm_sq_k0_m1_is_two_pi() {
        let p = LaguerreParams::new(0, 1.0, 1).unwrap();
        let v = laguerre_norm_sq(p, DEFAULT_NORM_NODES).unwrap();
        assert_relative_eq!(v, 2.0 * std::f64::consts::PI, max_relative = 1e-10);
    }

    #[test]
    fn norm_sq_matches_closed_form() {
        // |phi|^2 = (2 pi)^m lambda^m binom(k+m-1, k).
        for (k, lambda, m) in [(0, 1.0, 1), (3, 0.7, 1), (5, 2.3, 2), (12, 1.1, 3)] {
            let p = LaguerreParams::new(k, lambda, m).unwrap();
            let v = laguerre_norm_sq(p, 512).unwrap();
            let expect = (2.0 * std::f64::consts::PI * lambda).powi(m as i32)
                * binomial(k + m - 1, k);
            assert_relative_eq!(v, expect, max_relative = 1e-8);
        }
    }

    #[test]
    fn norm_sq_lambda_scaling() {
        let a = LaguerreParams::new(4, 1.0, 2).unwrap();
        let b = LaguerreParams::new(4, 2.0, 2).unwrap();
        let ratio =
            laguerre_norm_sq(b, 512).unwrap() / laguerre_norm_sq(a, 512).unwrap();
        assert_relative_eq!(ratio, 4.0, max_relative = 1e-9); // 2^m
    }

    #[test]
    fn orthogonality_via_quadrature() {
        let m = 2usize;
        for (k1, k2) in [(0, 1), (2, 5), (7, 11)] {
            let a = LaguerreParams::new(k1, 1.4, m).unwrap();
            let b = LaguerreParams::new(k2, 1.4, m).unwrap();
            let ip = laguerre_inner_product(a, b, 512).unwrap();
            let na = laguerre_norm_sq(a, 512).unwrap();
            let nb = laguerre_norm_sq(b, 512).unwrap();
            assert!(ip.abs() / (na * nb).sqrt() < 1e-8, "k = ({k1},{k2})");
        }
    }
}
