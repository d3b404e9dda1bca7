//! Complex-valued functions sampled on axis-aligned uniform grids over
//! g1 x g2, and the Riemann-sum group convolution.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;

use crate::error::{Error, Result};
use crate::group::{GroupPoint, TwoStepGroup};

/// One uniform axis: `count` nodes from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn symmetric(extent: f64, count: usize) -> Self {
        Axis { min: -extent, max: extent, count }
    }

    pub fn spacing(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            self.max - self.min
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.min + self.spacing() * i as f64
    }
}

/// Samples of a function G -> C on a rectangular grid, row-major with the
/// last axis fastest. Axes are ordered x_1..x_d1, u_1..u_d2.
#[derive(Debug, Clone)]
pub struct GridFunction {
    d1: usize,
    d2: usize,
    axes: Vec<Axis>,
    values: Vec<Complex64>,
    cell_measure: f64,
}

impl GridFunction {
    pub fn zeros(group: &TwoStepGroup, axes: Vec<Axis>) -> Result<Self> {
        if axes.len() != group.dim() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} axes, got {}",
                group.dim(),
                axes.len()
            )));
        }
        let len: usize = axes.iter().map(|a| a.count).product();
        let cell_measure: f64 = axes.iter().map(|a| a.spacing()).product();
        if !(cell_measure > 0.0) {
            return Err(Error::InvalidParameter(
                "grid cell measure must be positive".into(),
            ));
        }
        Ok(GridFunction {
            d1: group.d1(),
            d2: group.d2(),
            axes,
            values: vec![Complex64::new(0.0, 0.0); len],
            cell_measure,
        })
    }

    /// Symmetric box grid: every x axis spans [-x_extent, x_extent] with
    /// x_count nodes, every u axis [-u_extent, u_extent] with u_count nodes.
    pub fn symmetric_box(
        group: &TwoStepGroup,
        x_extent: f64,
        x_count: usize,
        u_extent: f64,
        u_count: usize,
    ) -> Result<Self> {
        let mut axes = Vec::with_capacity(group.dim());
        for _ in 0..group.d1() {
            axes.push(Axis::symmetric(x_extent, x_count));
        }
        for _ in 0..group.d2() {
            axes.push(Axis::symmetric(u_extent, u_count));
        }
        Self::zeros(group, axes)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }
    pub fn d1(&self) -> usize {
        self.d1
    }
    pub fn d2(&self) -> usize {
        self.d2
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.axes == other.axes
    }

    /// Multi-index for a flat index (row-major, last axis fastest).
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.axes.len()];
        for a in (0..self.axes.len()).rev() {
            idx[a] = flat % self.axes[a].count;
            flat /= self.axes[a].count;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0usize;
        for (a, axis) in self.axes.iter().enumerate() {
            flat = flat * axis.count + idx[a];
        }
        flat
    }

    /// Coordinates of a node as a group point.
    pub fn point(&self, idx: &[usize]) -> GroupPoint {
        let x = DVector::from_fn(self.d1, |i, _| self.axes[i].node(idx[i]));
        let u = DVector::from_fn(self.d2, |i, _| self.axes[self.d1 + i].node(idx[self.d1 + i]));
        GroupPoint::new(x, u)
    }

    /// Fills the grid from a function of the node point. Parallel over nodes,
    /// deterministic output.
    pub fn fill(&mut self, f: impl Fn(&GroupPoint) -> Complex64 + Sync) {
        let axes = self.axes.clone();
        let d1 = self.d1;
        let d2 = self.d2;
        let counts: Vec<usize> = axes.iter().map(|a| a.count).collect();
        self.values
            .par_iter_mut()
            .enumerate()
            .for_each(|(flat, v)| {
                let mut rem = flat;
                let mut idx = vec![0usize; counts.len()];
                for a in (0..counts.len()).rev() {
                    idx[a] = rem % counts[a];
                    rem /= counts[a];
                }
                let x = DVector::from_fn(d1, |i, _| axes[i].node(idx[i]));
                let u = DVector::from_fn(d2, |i, _| axes[d1 + i].node(idx[d1 + i]));
                *v = f(&GroupPoint::new(x, u));
            });
    }

    /// Multilinear interpolation at an arbitrary point; zero outside the box.
    pub fn interpolate(&self, p: &GroupPoint) -> Complex64 {
        debug_assert_eq!(p.x.len(), self.d1);
        debug_assert_eq!(p.u.len(), self.d2);
        let dim = self.axes.len();
        let mut base = vec![0usize; dim];
        let mut frac = vec![0.0f64; dim];
        for a in 0..dim {
            let coord = if a < self.d1 { p.x[a] } else { p.u[a - self.d1] };
            let axis = &self.axes[a];
            let t = (coord - axis.min) / axis.spacing();
            if t < -1e-12 || t > (axis.count - 1) as f64 + 1e-12 {
                return Complex64::new(0.0, 0.0);
            }
            let t = t.clamp(0.0, (axis.count - 1) as f64);
            // For a single-node axis fall back to nearest.
            if axis.count == 1 {
                base[a] = 0;
                frac[a] = 0.0;
            } else {
                let i = (t.floor() as usize).min(axis.count - 2);
                base[a] = i;
                frac[a] = t - i as f64;
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let corners = 1usize << dim;
        let mut idx = vec![0usize; dim];
        for corner in 0..corners {
            let mut w = 1.0;
            for a in 0..dim {
                let hi = (corner >> a) & 1 == 1;
                if hi {
                    if self.axes[a].count == 1 {
                        w = 0.0;
                        break;
                    }
                    w *= frac[a];
                    idx[a] = base[a] + 1;
                } else {
                    w *= 1.0 - frac[a];
                    idx[a] = base[a];
                }
            }
            if w != 0.0 {
                acc += self.values[self.flat_index(&idx)] * w;
            }
        }
        acc
    }

    /// Riemann-sum L^p norm on the grid (p finite).
    pub fn lp_norm(&self, p: f64) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm().powf(p)).sum();
        (sum * self.cell_measure).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (sum * self.cell_measure).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Fraction of the squared L^2 mass carried by nodes on the outermost
    /// shell of the box (one node deep on every axis).
    pub fn boundary_mass_fraction(&self) -> f64 {
        let mut boundary = 0.0;
        let mut total = 0.0;
        for (flat, v) in self.values.iter().enumerate() {
            let m = v.norm_sqr();
            total += m;
            let idx = self.multi_index(flat);
            if idx
                .iter()
                .zip(&self.axes)
                .any(|(i, a)| *i == 0 || *i + 1 == a.count)
            {
                boundary += m;
            }
        }
        if total > 0.0 {
            boundary / total
        } else {
            0.0
        }
    }

    /// CSV export: header x1,..,xd1,u1,..,ud2,re,im; one row per node in
    /// row-major order; 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.d1).map(|i| format!("x{i}")).collect();
        header.extend((1..=self.d2).map(|i| format!("u{i}")));
        header.push("re".into());
        header.push("im".into());
        writeln!(w, "{}", header.join(","))?;
        for (flat, v) in self.values.iter().enumerate() {
            let idx = self.multi_index(flat);
            let mut row: Vec<String> = idx
                .iter()
                .zip(&self.axes)
                .map(|(i, a)| format!("{:.16e}", a.node(*i)))
                .collect();
            row.push(format!("{:.16e}", v.re));
            row.push(format!("{:.16e}", v.im));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Riemann-sum group convolution
/// f*h(x,u) = sum f(x',u') h((x',u')^{-1}(x,u)) cellMeasure,
/// evaluated at the nodes of the shared grid. Off-grid evaluations of `h`
/// use multilinear interpolation and vanish outside the box.
///
/// Parallel over output nodes; the inner accumulation runs over input nodes
/// in row-major order, so results are bit-identical for any thread count.
pub fn convolve(g: &TwoStepGroup, f: &GridFunction, h: &GridFunction) -> Result<GridFunction> {
    if !f.same_grid(h) {
        return Err(Error::GridMismatch("convolve needs a shared grid".into()));
    }
    let mut out = f.clone();
    let cell = f.cell_measure();
    let inputs: Vec<(GroupPoint, Complex64)> = f
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm_sqr() > 0.0)
        .map(|(flat, v)| (f.point(&f.multi_index(flat)), *v))
        .collect();
    let axes_len = f.len();
    let results: Vec<Complex64> = (0..axes_len)
        .into_par_iter()
        .map(|flat| {
            let p = f.point(&f.multi_index(flat));
            let mut acc = Complex64::new(0.0, 0.0);
            for (q, fv) in &inputs {
                let shifted = g.left_quotient(q, &p).expect("dimension checked");
                acc += fv * h.interpolate(&shifted);
            }
            acc * cell
        })
        .collect();
    out.values_mut().copy_from_slice(&results);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{builtin_group, BuiltinFamily};
    use approx::assert_relative_eq;

    fn h1() -> TwoStepGroup {
        builtin_group(BuiltinFamily::Heisenberg(1)).unwrap()
    }

    #[test]
    fn axis_nodes_and_measure() {
        let g = h1();
        let f = GridFunction::symmetric_box(&g, 1.0, 5, 2.0, 5).unwrap();
        assert_relative_eq!(f.axes()[0].spacing(), 0.5);
        assert_relative_eq!(f.axes()[2].spacing(), 1.0);
        assert_relative_eq!(f.cell_measure(), 0.25);
        assert_eq!(f.len(), 125);
    }

    #[test]
    fn interpolation_exact_at_nodes_zero_outside() {
        let g = h1();
        let mut f = GridFunction::symmetric_box(&g, 1.0, 5, 1.0, 5).unwrap();
        f.fill(|p| Complex64::new(p.x[0] + 2.0 * p.x[1] - p.u[0], 0.0));
        let p = GroupPoint::from_slices(&[0.5, -0.5], &[1.0]);
        assert_relative_eq!(f.interpolate(&p).re, 0.5 - 1.0 - 1.0, epsilon = 1e-14);
        let outside = GroupPoint::from_slices(&[1.5, 0.0], &[0.0]);
        assert_eq!(f.interpolate(&outside), Complex64::new(0.0, 0.0));
        // Multilinear interpolation reproduces multilinear functions off-node.
        let q = GroupPoint::from_slices(&[0.31, -0.77], &[0.45]);
        assert_relative_eq!(
            f.interpolate(&q).re,
            0.31 - 1.54 - 0.45,
            epsilon = 1e-13
        );
    }

    #[test]
    fn delta_is_convolution_identity() {
        let g = h1();
        let mut delta = GridFunction::symmetric_box(&g, 2.0, 9, 2.0, 9).unwrap();
        let mut h = delta.clone();
        let center_idx = vec![4usize, 4, 4];
        let flat = delta.flat_index(&center_idx);
        let mass = 1.0 / delta.cell_measure();
        delta.values_mut()[flat] = Complex64::new(mass, 0.0);
        h.fill(|p| Complex64::new((-p.x.norm_squared() - p.u.norm_squared()).exp(), 0.3 * p.x[0]));
        let conv = convolve(&g, &delta, &h).unwrap();
        for (a, b) in conv.values().iter().zip(h.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn young_inequality_on_random_grids() {
        let g = h1();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut f = GridFunction::symmetric_box(&g, 1.5, 7, 1.5, 7).unwrap();
        let mut h = f.clone();
        for v in f.values_mut() {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        for v in h.values_mut() {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let conv = convolve(&g, &f, &h).unwrap();
        let lhs = conv.linf_norm();
        let rhs = f.lp_norm(1.0) * h.linf_norm();
        assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} vs {rhs}");
    }

    #[test]
    fn convolve_matches_brute_force_double_loop() {
        let g = h1();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut f = GridFunction::symmetric_box(&g, 1.0, 5, 1.0, 5).unwrap();
        let mut h = f.clone();
        for v in f.values_mut() {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        for v in h.values_mut() {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let conv = convolve(&g, &f, &h).unwrap();

        // Brute-force oracle: same sum in the same input order.
        let cell = f.cell_measure();
        for flat in 0..f.len() {
            let p = f.point(&f.multi_index(flat));
            let mut acc = Complex64::new(0.0, 0.0);
            for qflat in 0..f.len() {
                let fv = f.values()[qflat];
                if fv.norm_sqr() == 0.0 {
                    continue;
                }
                let q = f.point(&f.multi_index(qflat));
                let shifted = g.left_quotient(&q, &p).unwrap();
                acc += fv * h.interpolate(&shifted);
            }
            acc *= cell;
            assert_eq!(acc, conv.values()[flat], "bitwise mismatch at node {flat}");
        }
    }

    #[test]
    fn csv_header_and_digits() {
        let g = h1();
        let mut f = GridFunction::symmetric_box(&g, 1.0, 2, 1.0, 2).unwrap();
        f.values_mut()[0] = Complex64::new(std::f64::consts::PI, -1.0);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x1,x2,u1,re,im");
        assert!(lines.next().unwrap().starts_with("-1.0000000000000000e0,-1.0000000000000000e0,-1.0000000000000000e0,3.1415926535897931e0"));
    }
}
