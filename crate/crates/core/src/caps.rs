//! Cap decomposition of the unit sphere in the dual of the center: a smooth
//! partition of unity subordinate to caps of angular size delta, extended
//! homogeneously of degree zero.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::multiplier::ScalePartition;
use crate::sphere::{angle, fibonacci_lattice, sphere_samples};

/// Smooth cap profile: 1 on [0, 1], 0 on [2, infinity).
pub fn cap_profile(t: f64) -> f64 {
    ScalePartition::cumulative(t.max(0.0))
}

/// A partition of unity by caps of angular radius `delta` on S^{d2-1}.
#[derive(Debug, Clone)]
pub struct CapPartition {
    d2: usize,
    delta: f64,
    centers: Vec<DVector<f64>>,
    trivial: bool,
}

impl CapPartition {
    pub fn d2(&self) -> usize {
        self.d2
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn len(&self) -> usize {
        self.centers.len()
    }
    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
    pub fn centers(&self) -> &[DVector<f64>] {
        &self.centers
    }
    pub fn center(&self, j: usize) -> &DVector<f64> {
        &self.centers[j]
    }
    /// Single cap with zeta identically 1.
    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    /// Angular radius of supp zeta_j around its center.
    pub fn support_radius(&self) -> f64 {
        if self.trivial {
            std::f64::consts::PI
        } else {
            (2.0 * self.delta).min(std::f64::consts::PI)
        }
    }

    fn beta(&self, j: usize, omega: &DVector<f64>) -> f64 {
        cap_profile(angle(omega, &self.centers[j]) / self.delta)
    }

    /// zeta_j at any nonzero mu (degree-0 homogeneous).
    pub fn zeta(&self, j: usize, mu: &DVector<f64>) -> f64 {
        if self.trivial {
            return 1.0;
        }
        let n = mu.norm();
        assert!(n > 0.0, "zeta is undefined at mu = 0");
        let omega = mu / n;
        let total: f64 = (0..self.centers.len()).map(|i| self.beta(i, &omega)).sum();
        self.beta(j, &omega) / total
    }

    /// Sum of the raw bumps at a unit vector; >= 1 by the covering property.
    pub fn bump_sum(&self, omega: &DVector<f64>) -> f64 {
        if self.trivial {
            return 1.0;
        }
        (0..self.centers.len()).map(|i| self.beta(i, omega)).sum()
    }
}

fn covering_radius(centers: &[DVector<f64>], probes: &[DVector<f64>]) -> f64 {
    probes
        .iter()
        .map(|p| {
            centers
                .iter()
                .map(|c| angle(p, c))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Builds the cap partition for the given center dimension and cap radius.
///
/// delta >= pi yields the trivial single-cap partition. The deterministic
/// center sets are uniform angles (d2 = 2) and a Fibonacci lattice (d2 = 3)
/// sized so the covering radius stays below delta, verified against a dense
/// probe set and refined if necessary.
pub fn cap_partition(d2: usize, delta: f64) -> Result<CapPartition> {
    if !(delta > 0.0) || delta > std::f64::consts::PI + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "cap radius must lie in (0, pi], got {delta}"
        )));
    }
    if delta >= std::f64::consts::PI {
        let mut e1 = DVector::zeros(d2);
        e1[0] = 1.0;
        return Ok(CapPartition {
            d2,
            delta,
            centers: vec![e1],
            trivial: true,
        });
    }
    let centers = match d2 {
        1 => vec![
            DVector::from_element(1, 1.0),
            DVector::from_element(1, -1.0),
        ],
        2 => {
            let n = ((2.0 * std::f64::consts::PI / delta).floor() as usize).max(2);
            (0..n)
                .map(|i| {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    DVector::from_vec(vec![t.cos(), t.sin()])
                })
                .collect()
        }
        3 => {
            let initial = ((7.5 / (delta * delta)).ceil() as usize).max(4);
            let probes = sphere_samples(3, 4000);
            let mut n = initial;
            loop {
                let centers = fibonacci_lattice(n);
                if covering_radius(&centers, &probes) <= delta {
                    break centers;
                }
                n = (n as f64 * 1.3).ceil() as usize;
                if n > 10 * initial {
                    return Err(Error::CoveringFailure {
                        delta,
                        limit: 10 * initial,
                    });
                }
            }
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "cap partitions are implemented for d2 <= 3, got {d2}"
            )))
        }
    };
    Ok(CapPartition {
        d2,
        delta,
        centers,
        trivial: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_caps_on_the_circle() {
        let caps = cap_partition(2, std::f64::consts::FRAC_PI_4).unwrap();
        assert_eq!(caps.len(), 8);
        // Partition of unity on a dense angle sweep.
        for i in 0..10_000 {
            let t = 2.0 * std::f64::consts::PI * i as f64 / 10_000.0;
            let mu = DVector::from_vec(vec![t.cos(), t.sin()]);
            let total: f64 = (0..caps.len()).map(|j| caps.zeta(j, &mu)).sum();
            assert!((total - 1.0).abs() < 1e-12, "angle {t}: {total}");
        }
    }

    #[test]
    fn partition_on_s2() {
        let caps = cap_partition(3, 0.5).unwrap();
        for mu in sphere_samples(3, 2000) {
            let total: f64 = (0..caps.len()).map(|j| caps.zeta(j, &mu)).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(caps.bump_sum(&mu) >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn zeta_is_homogeneous_and_localized() {
        let caps = cap_partition(3, 0.4).unwrap();
        let mu = DVector::from_vec(vec![0.3, -0.8, 0.52]);
        for j in [0usize, caps.len() / 2] {
            assert_eq!(caps.zeta(j, &mu), caps.zeta(j, &(&mu * 2.0)));
        }
        // zeta_j vanishes beyond angle 2 delta.
        let far: Vec<usize> = (0..caps.len())
            .filter(|j| angle(&(mu.normalize()), caps.center(*j)) >= 2.0 * caps.delta())
            .collect();
        assert!(!far.is_empty());
        for j in far {
            assert_eq!(caps.zeta(j, &mu), 0.0);
        }
    }

    #[test]
    fn cap_count_scales_like_inverse_delta_squared() {
        let counts: Vec<usize> = [0.4, 0.2, 0.1]
            .iter()
            .map(|d| cap_partition(3, *d).unwrap().len())
            .collect();
        for w in counts.windows(2) {
            let ratio = w[1] as f64 / w[0] as f64;
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn trivial_cap() {
        let caps = cap_partition(2, std::f64::consts::PI).unwrap();
        assert!(caps.is_trivial());
        assert_eq!(caps.len(), 1);
        let mu = DVector::from_vec(vec![-1.0, 0.2]);
        assert_eq!(caps.zeta(0, &mu), 1.0);
    }

    #[test]
    fn s0_partition() {
        let caps = cap_partition(1, 1.0).unwrap();
        assert_eq!(caps.len(), 2);
        let plus = DVector::from_element(1, 3.0);
        let total: f64 = (0..2).map(|j| caps.zeta(j, &plus)).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_delta() {
        assert!(cap_partition(2, 0.0).is_err());
        assert!(cap_partition(2, 4.0).is_err());
        assert!(cap_partition(5, 0.3).is_err());
    }
}
