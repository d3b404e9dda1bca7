//! Spectral multiplier profiles, the dyadic scale partition, and the
//! band-limited dyadic pieces of a compactly supported multiplier.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Smoothness {
    SmoothCompact,
    Piecewise,
}

/// A compactly supported spectral profile with evaluation and support bounds.
#[derive(Clone)]
pub struct Multiplier {
    label: String,
    support: (f64, f64),
    smoothness: Smoothness,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Multiplier")
            .field("label", &self.label)
            .field("support", &self.support)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl Multiplier {
    pub fn from_fn(
        label: impl Into<String>,
        support: (f64, f64),
        smoothness: Smoothness,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Multiplier {
            label: label.into(),
            support,
            smoothness,
            eval: Arc::new(f),
        }
    }

    /// Piecewise-linear profile through uniformly spaced samples on
    /// [min, max]; zero outside.
    pub fn from_samples(label: impl Into<String>, min: f64, max: f64, samples: Vec<f64>) -> Self {
        assert!(samples.len() >= 2 && max > min);
        let step = (max - min) / (samples.len() - 1) as f64;
        let data = Arc::new(samples);
        let d = data.clone();
        Multiplier {
            label: label.into(),
            support: (min, max),
            smoothness: Smoothness::Piecewise,
            eval: Arc::new(move |lambda| {
                let t = (lambda - min) / step;
                if t < 0.0 || t > (d.len() - 1) as f64 {
                    return 0.0;
                }
                let i = (t.floor() as usize).min(d.len() - 2);
                let frac = t - i as f64;
                d[i] * (1.0 - frac) + d[i + 1] * frac
            }),
        }
    }

    pub fn zero() -> Self {
        Multiplier::from_fn("zero", (0.0, 0.0), Smoothness::SmoothCompact, |_| 0.0)
    }

    /// The canonical smooth bump on [1/2, 2], normalized to 1 at the center.
    pub fn canonical_bump() -> Self {
        Multiplier::from_fn(
            "bump[1/2,2]",
            (0.5, 2.0),
            Smoothness::SmoothCompact,
            |lambda| {
                let t = (2.0 * lambda - 2.5) / 1.5;
                if t.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - t * t)).exp()
                }
            },
        )
    }

    /// Even extension F(|lambda|) of the canonical bump, supported in
    /// [-2, -1/2] u [1/2, 2].
    pub fn canonical_even_bump() -> Self {
        let bump = Multiplier::canonical_bump();
        Multiplier::from_fn(
            "even-bump[1/2,2]",
            (-2.0, 2.0),
            Smoothness::SmoothCompact,
            move |lambda| bump.eval(lambda.abs()),
        )
    }

    /// Even admissible profile with deliberately uneven transition widths
    /// (1/8 rising, 1/4 falling), which keeps every low dyadic band of the
    /// transform strong. The symmetric bump has a transform zero inside the
    /// first band that starves its dyadic piece.
    pub fn band_rich_even_profile() -> Self {
        Multiplier::from_fn(
            "plateau[1/2,2]",
            (-2.0, 2.0),
            Smoothness::SmoothCompact,
            |lambda| {
                let t = lambda.abs();
                ScalePartition::smooth_step((t - 0.5) * 8.0)
                    * ScalePartition::smooth_step((2.0 - t) * 4.0)
            },
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn support(&self) -> (f64, f64) {
        self.support
    }
    pub fn max_support(&self) -> f64 {
        self.support.1
    }
    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    /// Evaluates the profile; vanishes outside the support interval.
    pub fn eval(&self, lambda: f64) -> f64 {
        if lambda < self.support.0 || lambda > self.support.1 {
            0.0
        } else {
            (self.eval)(lambda)
        }
    }

    /// a F + b G with the support hull.
    pub fn linear_combination(a: f64, f: &Multiplier, b: f64, g: &Multiplier) -> Multiplier {
        let (f, g) = (f.clone(), g.clone());
        let support = (f.support.0.min(g.support.0), f.support.1.max(g.support.1));
        Multiplier::from_fn(
            format!("{}*{} + {}*{}", a, f.label, b, g.label),
            support,
            Smoothness::Piecewise,
            move |l| a * f.eval(l) + b * g.eval(l),
        )
    }

    /// Pointwise product F G on the intersected support.
    pub fn product(f: &Multiplier, g: &Multiplier) -> Multiplier {
        let (f, g) = (f.clone(), g.clone());
        let support = (f.support.0.max(g.support.0), f.support.1.min(g.support.1));
        Multiplier::from_fn(
            format!("{}*{}", f.label, g.label),
            (support.0, support.1.max(support.0)),
            Smoothness::Piecewise,
            move |l| f.eval(l) * g.eval(l),
        )
    }

    /// lambda -> F(sqrt(lambda)) on [0, hi^2]; turns a profile in sqrt(L)
    /// units into a multiplier in L units.
    pub fn compose_sqrt(&self) -> Multiplier {
        let f = self.clone();
        let hi = f.support.1.max(0.0);
        Multiplier::from_fn(
            format!("{}(sqrt)", f.label),
            (0.0, hi * hi),
            f.smoothness,
            move |l| if l < 0.0 { 0.0 } else { f.eval(l.sqrt()) },
        )
    }

    /// Riemann L^2 norm over the support with `n` samples.
    pub fn l2_norm(&self, n: usize) -> f64 {
        let (lo, hi) = self.support;
        if hi <= lo {
            return 0.0;
        }
        let step = (hi - lo) / n as f64;
        let sum: f64 = (0..n)
            .map(|i| self.eval(lo + (i as f64 + 0.5) * step).powi(2))
            .sum();
        (sum * step).sqrt()
    }

    pub fn sup_norm(&self, n: usize) -> f64 {
        let (lo, hi) = self.support;
        if hi <= lo {
            return 0.0;
        }
        let step = (hi - lo) / n as f64;
        (0..=n)
            .map(|i| self.eval(lo + i as f64 * step).abs())
            .fold(0.0, f64::max)
    }
}

/// The canonical dyadic partition: chi(t) = Phi(t) - Phi(2t) with a smooth
/// cumulative profile Phi equal to 1 on (-inf, 1] and 0 on [2, inf), so that
/// sum over l of chi(2^l t) telescopes to 1 for every t > 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScalePartition;

impl ScalePartition {
    /// C^infty step: 0 for s <= 0, 1 for s >= 1.
    pub fn smooth_step(s: f64) -> f64 {
        fn half(s: f64) -> f64 {
            if s <= 0.0 {
                0.0
            } else {
                (-1.0 / s).exp()
            }
        }
        let a = half(s);
        let b = half(1.0 - s);
        a / (a + b)
    }

    /// Cumulative profile: 1 on t <= 1, 0 on t >= 2.
    pub fn cumulative(t: f64) -> f64 {
        Self::smooth_step(2.0 - t)
    }

    /// chi(t) = Phi(t) - Phi(2t), supported in [1/2, 2].
    pub fn chi(&self, t: f64) -> f64 {
        Self::cumulative(t) - Self::cumulative(2.0 * t)
    }

    /// chi(2^ell t).
    pub fn chi_at_scale(&self, ell: i32, t: f64) -> f64 {
        self.chi(2f64.powi(ell) * t)
    }

    /// psi = sum_{|j| <= 2} chi(2^j t): 1 on [1/4, 4], supported in [1/8, 8].
    pub fn psi(&self, t: f64) -> f64 {
        Self::cumulative(0.25 * t) - Self::cumulative(8.0 * t)
    }

    /// Fourier-side band symbol chi_iota(tau) = chi(2^-iota |tau|).
    pub fn fourier_band(&self, iota: i32, tau: f64) -> f64 {
        self.chi(2f64.powi(-iota) * tau.abs())
    }
}

/// Sampling configuration for the discrete-Fourier band split.
#[derive(Debug, Clone, Copy)]
pub struct BandSplitConfig {
    /// Half-width of the symmetric sampling window.
    pub half_width: f64,
    /// Number of samples (power of two recommended).
    pub samples: usize,
}

impl Default for BandSplitConfig {
    fn default() -> Self {
        BandSplitConfig {
            half_width: 8.0,
            samples: 8192,
        }
    }
}

/// Raw discrete-Fourier band splitter: samples F on a symmetric grid,
/// multiplies the transform by the chi_iota bands (plus the complement
/// 1 - sum chi_iota as the first entry), and inverse-transforms. Imposes no
/// support precondition; returns pieces indexed [-1, 0, .., iota_max] whose
/// sum reproduces F at the grid nodes.
pub fn band_split(f: &Multiplier, iota_max: i32, config: BandSplitConfig) -> Result<Vec<Multiplier>> {
    if iota_max < 0 {
        return Err(Error::InvalidParameter("iota_max must be >= 0".into()));
    }
    let n = config.samples;
    let s = config.half_width;
    let step = 2.0 * s / n as f64;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut spectrum: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(f.eval(-s + i as f64 * step), 0.0))
        .collect();
    fft.process(&mut spectrum);

    let chi = ScalePartition;
    let freq = |q: usize| -> f64 {
        let q = q as i64;
        let half = (n / 2) as i64;
        let wrapped = if q > half { q - n as i64 } else { q };
        std::f64::consts::PI * wrapped as f64 / s
    };

    let mut pieces = Vec::with_capacity(iota_max as usize + 2);
    for band in -1..=iota_max {
        let mut masked: Vec<Complex64> = (0..n)
            .map(|q| {
                let tau = freq(q);
                let weight = if band < 0 {
                    1.0 - (0..=iota_max).map(|i| chi.fourier_band(i, tau)).sum::<f64>()
                } else {
                    chi.fourier_band(band, tau)
                };
                spectrum[q] * weight
            })
            .collect();
        ifft.process(&mut masked);
        let samples: Vec<f64> = masked.iter().map(|v| v.re / n as f64).collect();
        let mut piece = Multiplier::from_samples(
            format!("{}^({})", f.label(), band),
            -s,
            s - step,
            samples,
        );
        piece.smoothness = Smoothness::SmoothCompact;
        pieces.push(piece);
    }
    Ok(pieces)
}

/// Band-limited dyadic pieces of an even multiplier supported in
/// [-2, -1/2] u [1/2, 2]. Checks the support and evenness preconditions,
/// then delegates to `band_split`.
pub fn dyadic_multiplier_pieces(
    f: &Multiplier,
    iota_max: i32,
    config: BandSplitConfig,
) -> Result<Vec<Multiplier>> {
    let n = config.samples;
    let s = config.half_width;
    let step = 2.0 * s / n as f64;
    let sup = (0..n)
        .map(|i| f.eval(-s + i as f64 * step).abs())
        .fold(0.0, f64::max);

    // The inner spectral gap is not policed: the low-pass complement absorbs
    // whatever lives there.
    let mut worst_outside = 0.0f64;
    let mut worst_odd = 0.0f64;
    for i in 0..n {
        let lambda = -s + i as f64 * step;
        let v = f.eval(lambda);
        if lambda.abs() > 2.0 + 1e-9 {
            worst_outside = worst_outside.max(v.abs());
        }
        worst_odd = worst_odd.max((v - f.eval(-lambda)).abs());
    }
    if worst_outside > 1e-10 * sup.max(1e-300) || worst_odd > 1e-10 * sup.max(1e-300) {
        return Err(Error::Precondition(format!(
            "dyadic pieces need an even multiplier supported in |lambda| <= 2 \
             (outside mass {worst_outside:.3e}, odd part {worst_odd:.3e})"
        )));
    }
    band_split(f, iota_max, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smooth_step_limits() {
        assert_eq!(ScalePartition::smooth_step(-0.5), 0.0);
        assert_eq!(ScalePartition::smooth_step(1.5), 1.0);
        let v = ScalePartition::smooth_step(0.5);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn chi_support_and_telescoping() {
        let chi = ScalePartition;
        assert_eq!(chi.chi(0.49), 0.0);
        assert_eq!(chi.chi(2.01), 0.0);
        assert!(chi.chi(1.0) > 0.0);
        for &t in &[1e-3, 0.02, 0.7, 1.0, 13.0, 999.9] {
            let total: f64 = (-13..=13).map(|l| chi.chi_at_scale(l, t)).sum();
            assert!((total - 1.0).abs() <= 1e-12, "t = {t}: {total}");
        }
    }

    #[test]
    fn psi_is_one_on_core() {
        let chi = ScalePartition;
        for &t in &[0.25, 1.0, 4.0] {
            assert_relative_eq!(chi.psi(t), 1.0);
        }
        assert_eq!(chi.psi(0.1), 0.0);
        assert_eq!(chi.psi(9.0), 0.0);
        // psi really is the five-band sum.
        for &t in &[0.3, 0.9, 2.2, 6.0] {
            let sum: f64 = (-2..=2).map(|j| chi.chi(2f64.powi(j) * t)).sum();
            assert_relative_eq!(chi.psi(t), sum, epsilon = 1e-13);
        }
    }

    #[test]
    fn bump_shape() {
        let f = Multiplier::canonical_bump();
        assert_eq!(f.eval(0.4), 0.0);
        assert_eq!(f.eval(2.2), 0.0);
        assert_relative_eq!(f.eval(1.25), 1.0);
        let even = Multiplier::canonical_even_bump();
        assert_relative_eq!(even.eval(-1.25), 1.0);
        assert_eq!(even.eval(0.0), 0.0);
    }

    #[test]
    fn pieces_sum_to_multiplier() {
        let f = Multiplier::canonical_even_bump();
        let config = BandSplitConfig::default();
        let pieces = dyadic_multiplier_pieces(&f, 5, config).unwrap();
        assert_eq!(pieces.len(), 7);
        let n = config.samples;
        let step = 2.0 * config.half_width / n as f64;
        let mut worst = 0.0f64;
        for i in 0..n {
            let lambda = -config.half_width + i as f64 * step;
            let total: f64 = pieces.iter().map(|p| p.eval(lambda)).sum();
            worst = worst.max((total - f.eval(lambda)).abs());
        }
        assert!(worst <= 1e-10, "reconstruction error {worst}");
    }

    #[test]
    fn zero_multiplier_has_zero_pieces() {
        let pieces = dyadic_multiplier_pieces(
            &Multiplier::from_fn("null", (-2.0, 2.0), Smoothness::SmoothCompact, |_| 0.0),
            3,
            BandSplitConfig::default(),
        )
        .unwrap();
        for p in pieces {
            assert_eq!(p.sup_norm(512), 0.0);
        }
    }

    #[test]
    fn band_limited_input_has_vanishing_high_pieces() {
        // F = inverse transform of a compact bump in |tau| <= 1, synthesized
        // from on-grid frequencies so the band limitation is exact. Direct
        // band-pass is the oracle: chi_iota vanishes on |tau| <= 1 for
        // iota >= 2, so those pieces must be negligible.
        let config = BandSplitConfig {
            half_width: 16.0,
            samples: 4096,
        };
        let s = config.half_width;
        let dtau = std::f64::consts::PI / s;
        let qmax = (1.0 / dtau).floor() as i32;
        let f = Multiplier::from_fn(
            "lowband",
            (-s, s),
            Smoothness::SmoothCompact,
            move |lambda| {
                let mut acc = 0.0;
                for q in -qmax..=qmax {
                    let tau = q as f64 * dtau;
                    if tau.abs() >= 1.0 {
                        continue;
                    }
                    let b = (1.0 - 1.0 / (1.0 - tau * tau)).exp();
                    acc += b * (tau * lambda).cos() * dtau;
                }
                acc
            },
        );
        let pieces = band_split(&f, 4, config).unwrap();
        let sup = f.sup_norm(2048);
        assert!(sup > 0.1);
        for (idx, p) in pieces.iter().enumerate() {
            let band = idx as i32 - 1;
            if band >= 2 {
                assert!(
                    p.sup_norm(2048) <= 1e-8 * sup,
                    "band {band}: {} vs {sup}",
                    p.sup_norm(2048)
                );
            }
        }
    }

    #[test]
    fn rejects_support_violation() {
        let f = Multiplier::from_fn("wide", (-4.0, 4.0), Smoothness::SmoothCompact, |l| {
            (-l * l).exp()
        });
        assert!(dyadic_multiplier_pieces(&f, 2, BandSplitConfig::default()).is_err());
    }

    #[test]
    fn compose_sqrt_support() {
        let f = Multiplier::canonical_even_bump();
        let g = f.compose_sqrt();
        assert_eq!(g.support(), (0.0, 4.0));
        assert_relative_eq!(g.eval(1.5625), 1.0); // sqrt = 1.25
        assert_eq!(g.eval(0.1), 0.0);
    }
}
