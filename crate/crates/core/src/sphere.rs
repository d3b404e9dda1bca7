//! Deterministic point sets and quadrature on unit spheres in the dual of
//! the second layer.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::quadrature::gauss_legendre_on;

/// Default seed for seeded sphere sampling in dimensions above 3.
pub const SPHERE_SEED: u64 = 0x5717A7;

/// Deterministic sample of `count` unit vectors in `R^{d2}`.
///
/// d2 = 1 alternates the two points of S^0; d2 = 2 uses uniform angles;
/// d2 = 3 uses a Fibonacci lattice; higher dimensions fall back to seeded
/// uniform sampling with the fixed default seed.
pub fn sphere_samples(d2: usize, count: usize) -> Vec<DVector<f64>> {
    assert!(d2 >= 1);
    match d2 {
        1 => (0..count)
            .map(|i| DVector::from_element(1, if i % 2 == 0 { 1.0 } else { -1.0 }))
            .collect(),
        2 => (0..count)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                DVector::from_vec(vec![theta.cos(), theta.sin()])
            })
            .collect(),
        3 => fibonacci_lattice(count),
        _ => seeded_sphere_samples(d2, count, SPHERE_SEED),
    }
}

/// Fibonacci lattice of `count` points on S^2.
pub fn fibonacci_lattice(count: usize) -> Vec<DVector<f64>> {
    let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = 2.0 * std::f64::consts::PI * i as f64 / golden;
            DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

/// Seeded uniform sphere sample (Gaussian normalization).
pub fn seeded_sphere_samples(d2: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            loop {
                let v = DVector::from_fn(d2, |_, _| {
                    // Box-Muller keeps us off the rand_distr dependency.
                    let u1: f64 = rng.gen_range(1e-12..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                });
                let n = v.norm();
                if n > 1e-8 {
                    return v / n;
                }
            }
        })
        .collect()
}

/// Structured probe directions: coordinate axes and two-coordinate diagonals.
///
/// Degenerate kernel jumps sit on coordinate subvarieties for the groups of
/// interest, so assumption checks probe these in addition to lattice samples.
pub fn structured_probes(d2: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    for k in 0..d2 {
        for sign in [1.0, -1.0] {
            let mut v = DVector::zeros(d2);
            v[k] = sign;
            out.push(v);
        }
    }
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d2 {
        for j in (i + 1)..d2 {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0)] {
                let mut v = DVector::zeros(d2);
                v[i] = si * inv;
                v[j] = sj * inv;
                out.push(v);
            }
        }
    }
    out
}

/// Angle between two unit vectors, clamped for roundoff.
pub fn angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

/// Orthonormal vectors completing `center` to a basis of R^3.
fn frame3(center: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let pick = if center[0].abs() < 0.9 {
        DVector::from_vec(vec![1.0, 0.0, 0.0])
    } else {
        DVector::from_vec(vec![0.0, 1.0, 0.0])
    };
    let mut a = &pick - center * center.dot(&pick);
    a /= a.norm();
    let b = DVector::from_vec(vec![
        center[1] * a[2] - center[2] * a[1],
        center[2] * a[0] - center[0] * a[2],
        center[0] * a[1] - center[1] * a[0],
    ]);
    (a, b)
}

/// Quadrature nodes and weights for integration over the spherical cap
/// { omega : angle(omega, center) <= radius } with respect to surface measure.
///
/// `budget` is the approximate total node count. A radius >= pi yields a rule
/// for the whole sphere. For d2 = 1 the "sphere" is the two-point set S^0 and
/// the weights are unit point masses.
pub fn cap_quadrature(
    d2: usize,
    center: &DVector<f64>,
    radius: f64,
    budget: usize,
) -> (Vec<DVector<f64>>, Vec<f64>) {
    match d2 {
        1 => {
            let mut nodes = Vec::new();
            let mut weights = Vec::new();
            for s in [1.0, -1.0] {
                let v = DVector::from_element(1, s);
                if radius >= std::f64::consts::PI || angle(&v, center) <= radius {
                    nodes.push(v);
                    weights.push(1.0);
                }
            }
            (nodes, weights)
        }
        2 => {
            let theta0 = center[1].atan2(center[0]);
            if radius >= std::f64::consts::PI {
                let n = budget.max(4);
                let w = 2.0 * std::f64::consts::PI / n as f64;
                let (nodes, weights) = (0..n)
                    .map(|i| {
                        let t = theta0 + 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                        (DVector::from_vec(vec![t.cos(), t.sin()]), w)
                    })
                    .unzip();
                (nodes, weights)
            } else {
                let (ts, ws) = gauss_legendre_on(budget.max(4), theta0 - radius, theta0 + radius);
                let nodes = ts
                    .iter()
                    .map(|t| DVector::from_vec(vec![t.cos(), t.sin()]))
                    .collect();
                (nodes, ws)
            }
        }
        3 => {
            let (ea, eb) = frame3(center);
            let alpha_max = radius.min(std::f64::consts::PI);
            // Product rule: Gauss-Legendre in cos(alpha), uniform in azimuth.
            let n_az = ((budget as f64).sqrt() * 1.4).ceil() as usize;
            let n_t = (budget / n_az.max(1)).max(4);
            let (ts, tws) = gauss_legendre_on(n_t, alpha_max.cos(), 1.0);
            let wb = 2.0 * std::f64::consts::PI / n_az as f64;
            let mut nodes = Vec::with_capacity(n_t * n_az);
            let mut weights = Vec::with_capacity(n_t * n_az);
            for (t, tw) in ts.iter().zip(&tws) {
                let s = (1.0 - t * t).max(0.0).sqrt();
                for ib in 0..n_az {
                    let beta = 2.0 * std::f64::consts::PI * ib as f64 / n_az as f64;
                    let omega = center * *t + &ea * (s * beta.cos()) + &eb * (s * beta.sin());
                    nodes.push(omega);
                    weights.push(tw * wb);
                }
            }
            (nodes, weights)
        }
        _ => panic!("cap quadrature implemented for d2 <= 3"),
    }
}
