//! Numerical evaluation of convolution kernels of localized spectral
//! multipliers: polar quadrature in the central frequency, a tabulated
//! radial integral over the kernel directions, and the exactly truncated
//! Laguerre sum. Kernels are produced row by row (one row per first-layer
//! node) so large grids can be reduced without materializing them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps::CapPartition;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::group::TwoStepGroup;
use crate::multiplier::{Multiplier, ScalePartition};
use crate::quadrature::{composite_gauss_legendre, gauss_legendre_on};
use crate::spectral::{block_spectral_decompose, spectral_decompose, SpectralDecomposition};
use crate::sphere::cap_quadrature;

/// Node counts for the kernel quadrature.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct QuadratureSpec {
    /// Radial nodes in |mu|.
    pub radial: usize,
    /// Sphere nodes per cap.
    pub sphere: usize,
    /// Nodes per kernel (xi) dimension.
    pub xi: usize,
    /// Default output-grid nodes per axis (used by the CLI).
    pub grid: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            radial: 32,
            sphere: 64,
            xi: 24,
            grid: 33,
        }
    }
}

/// eta_k^mu = sum_n (2 k_n + r_n) b_n^mu.
pub fn eigvp(kvec: &[usize], decomp: &SpectralDecomposition) -> Result<f64> {
    if kvec.len() != decomp.b.len() {
        return Err(Error::DimensionMismatch(format!(
            "k has length {}, decomposition has {} blocks",
            kvec.len(),
            decomp.b.len()
        )));
    }
    Ok(kvec
        .iter()
        .zip(decomp.b.iter().zip(&decomp.ranks))
        .map(|(k, (b, rank))| (2.0 * *k as f64 + (*rank as f64) / 2.0) * b)
        .sum())
}

/// All k in N^N with sum (2 k_n + r_n) b_n <= budget, in lexicographic order.
pub fn admissible_k_lists(b: &[f64], half_ranks: &[usize], budget: f64) -> Vec<Vec<usize>> {
    let base: f64 = b
        .iter()
        .zip(half_ranks)
        .map(|(bn, rn)| *rn as f64 * bn)
        .sum();
    let mut out = Vec::new();
    if base > budget {
        return out;
    }
    let mut current = vec![0usize; b.len()];
    fn recurse(
        b: &[f64],
        n: usize,
        remaining: f64,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if n == b.len() {
            out.push(current.clone());
            return;
        }
        let mut k = 0usize;
        loop {
            let cost = 2.0 * k as f64 * b[n];
            if cost > remaining {
                break;
            }
            current[n] = k;
            recurse(b, n + 1, remaining - cost, current, out);
            k += 1;
        }
        current[n] = 0;
    }
    recurse(b, 0, budget - base, &mut current, &mut out);
    out
}

fn spectral_for_kernel(
    g: &TwoStepGroup,
    mu: &DVector<f64>,
    tol: f64,
) -> Result<SpectralDecomposition> {
    if g.blocks().is_some() {
        block_spectral_decompose(g, mu, tol)
    } else {
        spectral_decompose(g, mu, tol)
    }
}

fn direction_samples(g: &TwoStepGroup, count: usize) -> Vec<DVector<f64>> {
    let mut dirs = crate::sphere::sphere_samples(g.d2(), count);
    dirs.extend(crate::sphere::structured_probes(g.d2()));
    dirs
}

/// Smallest ell0 with F(L) chi(2^l U) = 0 for every l < -ell0, for any F
/// supported in [0, max_a]: the k = 0 eigenvalue floor min_omega sum r_n
/// b_n^omega forces |mu| <= max_a / floor.
pub fn min_scale_ell0(g: &TwoStepGroup, max_a: f64, cluster_tol: f64) -> Result<i32> {
    if !(max_a > 0.0) {
        return Err(Error::InvalidParameter(
            "support bound must be positive".into(),
        ));
    }
    let mut floor_eta = f64::INFINITY;
    for omega in direction_samples(g, 256) {
        let d = spectral_for_kernel(g, &omega, cluster_tol)?;
        let eta0: f64 = d
            .b
            .iter()
            .zip(d.half_ranks())
            .map(|(b, r)| r as f64 * b)
            .sum();
        floor_eta = floor_eta.min(eta0);
    }
    let t = (2.0 * max_a / floor_eta).log2();
    Ok((t + 1e-9).floor() as i32)
}

/// One polar quadrature node of the central-frequency integral, restricted
/// to the cap and the radial window.
pub(crate) struct MuNode {
    pub omega: DVector<f64>,
    pub rho: f64,
    /// Bare geometric weight: surface x radial weight times rho^{d2-1}.
    pub geo_weight: f64,
    pub zeta: f64,
    pub profile: f64,
}

impl MuNode {
    /// Full integrand weight zeta chi rho^{d2-1} d mu.
    pub fn weight(&self) -> f64 {
        self.geo_weight * self.zeta * self.profile
    }
}

pub(crate) fn mu_nodes(
    caps: &CapPartition,
    j: usize,
    radial_interval: (f64, f64),
    radial_profile: &dyn Fn(f64) -> f64,
    quad: &QuadratureSpec,
) -> Vec<MuNode> {
    let (omegas, womegas) = cap_quadrature(
        caps.d2(),
        caps.center(j),
        caps.support_radius(),
        quad.sphere,
    );
    let (rhos, wrhos) = gauss_legendre_on(quad.radial, radial_interval.0, radial_interval.1);
    let d2 = caps.d2();
    let mut nodes = Vec::with_capacity(omegas.len() * rhos.len());
    for (omega, wo) in omegas.iter().zip(&womegas) {
        let zeta = caps.zeta(j, omega);
        if zeta == 0.0 {
            continue;
        }
        for (rho, wr) in rhos.iter().zip(&wrhos) {
            let profile = radial_profile(*rho);
            if profile == 0.0 {
                continue;
            }
            nodes.push(MuNode {
                omega: omega.clone(),
                rho: *rho,
                geo_weight: wo * wr * rho.powi(d2 as i32 - 1),
                zeta,
                profile,
            });
        }
    }
    nodes
}

struct DirectionData {
    decomp: SpectralDecomposition,
    kernel_basis: DMatrix<f64>,
}

fn aligned_kernel_basis(p0: &DMatrix<f64>, r0: usize, prev: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    if r0 == 0 {
        return DMatrix::zeros(p0.nrows(), 0);
    }
    let eig = p0.clone().symmetric_eigen();
    let mut cols = Vec::new();
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > 0.5 {
            cols.push(eig.eigenvectors.column(i).into_owned());
        }
    }
    let mut basis = DMatrix::from_columns(&cols);
    basis = basis.qr().q();
    if let Some(prev) = prev {
        // Orthogonal Procrustes alignment to the previous node's frame.
        let m = basis.transpose() * prev;
        if let Some(svd) = m.try_svd(true, true, 1e-12, 1000) {
            let q = svd.u.unwrap() * svd.v_t.unwrap();
            basis *= q;
        }
    }
    basis
}

/// The integral over the kernel directions,
/// I(eta, y) = int_{R^{r0}} F(|xi|^2 + eta) e^{i <xi, y>} d xi,
/// which is real and depends on y only through |y|.
enum XiIntegral {
    /// r0 = 0: point evaluation F(eta).
    Point,
    /// r0 = 1: bilinear table over (eta, |y|).
    Table {
        eta_step: f64,
        y_step: f64,
        n_eta: usize,
        n_y: usize,
        values: Vec<f64>,
    },
    /// r0 >= 2: product Gauss-Legendre nodes (coords, weight).
    Product(Vec<(Vec<f64>, f64)>),
}

impl XiIntegral {
    fn build(f: &Multiplier, r0: usize, max_a: f64, y_max: f64, xi_nodes: usize) -> Self {
        match r0 {
            0 => XiIntegral::Point,
            1 => {
                let s_max = max_a.sqrt();
                // Resolve cos(s y) at the largest |y| on the grid.
                let n_s = ((1.5 * s_max * y_max / std::f64::consts::PI).ceil() as usize)
                    .max(xi_nodes.max(64));
                let panels = n_s.div_ceil(16);
                let (ss, ws) = composite_gauss_legendre(16, panels, 0.0, s_max);
                let n_eta = 512usize;
                let eta_step = max_a / (n_eta - 1) as f64;
                let wavelength = 2.0 * std::f64::consts::PI / s_max.max(1e-9);
                let y_step = (wavelength / 100.0).min(0.05);
                let n_y = (y_max / y_step).ceil() as usize + 2;
                let values: Vec<f64> = (0..n_eta)
                    .into_par_iter()
                    .flat_map_iter(|ie| {
                        let eta = ie as f64 * eta_step;
                        let coeff: Vec<f64> = ss
                            .iter()
                            .zip(&ws)
                            .map(|(s, w)| 2.0 * w * f.eval(s * s + eta))
                            .collect();
                        (0..n_y)
                            .map(|iy| {
                                let y = iy as f64 * y_step;
                                ss.iter()
                                    .zip(&coeff)
                                    .map(|(s, c)| c * (s * y).cos())
                                    .sum::<f64>()
                            })
                            .collect::<Vec<f64>>()
                    })
                    .collect();
                XiIntegral::Table {
                    eta_step,
                    y_step,
                    n_eta,
                    n_y,
                    values,
                }
            }
            _ => {
                let s_max = max_a.sqrt();
                let (xi_1d, wxi_1d) = gauss_legendre_on(xi_nodes, -s_max, s_max);
                let mut nodes: Vec<(Vec<f64>, f64)> = vec![(vec![], 1.0)];
                for _ in 0..r0 {
                    let mut next = Vec::with_capacity(nodes.len() * xi_1d.len());
                    for (coords, w) in &nodes {
                        for (s, ws) in xi_1d.iter().zip(&wxi_1d) {
                            let mut c = coords.clone();
                            c.push(*s);
                            next.push((c, w * ws));
                        }
                    }
                    nodes = next;
                }
                XiIntegral::Product(nodes)
            }
        }
    }

    /// I(eta, y) for y the coordinate vector of P0 x in the kernel basis.
    fn eval(&self, f: &Multiplier, eta: f64, y: &[f64]) -> f64 {
        match self {
            XiIntegral::Point => f.eval(eta),
            XiIntegral::Table {
                eta_step,
                y_step,
                n_eta,
                n_y,
                values,
            } => {
                let te = (eta / eta_step).clamp(0.0, (*n_eta - 1) as f64);
                let ty = (y[0].abs() / y_step).clamp(0.0, (*n_y - 1) as f64);
                let ie = (te.floor() as usize).min(n_eta - 2);
                let iy = (ty.floor() as usize).min(n_y - 2);
                let fe = te - ie as f64;
                let fy = ty - iy as f64;
                let v00 = values[ie * n_y + iy];
                let v01 = values[ie * n_y + iy + 1];
                let v10 = values[(ie + 1) * n_y + iy];
                let v11 = values[(ie + 1) * n_y + iy + 1];
                v00 * (1.0 - fe) * (1.0 - fy)
                    + v01 * (1.0 - fe) * fy
                    + v10 * fe * (1.0 - fy)
                    + v11 * fe * fy
            }
            XiIntegral::Product(nodes) => {
                let mut acc = 0.0;
                for (coords, w) in nodes {
                    let fv = f.eval(coords.iter().map(|s| s * s).sum::<f64>() + eta);
                    if fv == 0.0 {
                        continue;
                    }
                    let arg: f64 = coords.iter().zip(y).map(|(s, ya)| s * ya).sum();
                    acc += w * fv * arg.cos();
                }
                acc
            }
        }
    }
}

/// Per-node u-phase data: either an explicit table or, on a single uniform
/// u axis, the running-rotation pair (value at the window start, step).
enum PhaseData {
    Table(Vec<Vec<Complex64>>),
    Recurrence(Vec<(Complex64, Complex64)>),
}

/// Prepared kernel evaluation: all frequency-side data is fixed at
/// construction; `row` then fills the u-row of the kernel at one x node.
pub struct KernelEvaluator<'a> {
    f: &'a Multiplier,
    nodes: Vec<MuNode>,
    dir_of_node: Vec<usize>,
    directions: Vec<DirectionData>,
    k_lists: Vec<Vec<Vec<usize>>>,
    kmax_per_block: Vec<Vec<usize>>,
    half_ranks: Vec<usize>,
    r0: usize,
    prefactor: f64,
    xi: XiIntegral,
    phases: PhaseData,
    xs: Vec<DVector<f64>>,
    us: Vec<DVector<f64>>,
    /// Half-open index range of u nodes actually evaluated; the rest of a
    /// row is zero.
    u_window: (usize, usize),
    k_max: usize,
}

impl<'a> KernelEvaluator<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        g: &'a TwoStepGroup,
        f: &'a Multiplier,
        radial_profile: &(dyn Fn(f64) -> f64 + Sync),
        radial_interval: (f64, f64),
        caps: &CapPartition,
        j: usize,
        grid_template: &GridFunction,
        quad: &QuadratureSpec,
        cluster_tol: f64,
    ) -> Result<Self> {
        Self::windowed(
            g,
            f,
            radial_profile,
            radial_interval,
            caps,
            j,
            grid_template,
            quad,
            cluster_tol,
            None,
        )
    }

    /// Like `new`, but for a single u axis the evaluation can be clipped to
    /// the nodes with |u| <= u_clip; values outside are treated as zero.
    /// Kernels localized to a dyadic band decay rapidly beyond a few decay
    /// lengths 2^ell, so clipping bounds the resolution cost of wide bands.
    #[allow(clippy::too_many_arguments)]
    pub fn windowed(
        g: &'a TwoStepGroup,
        f: &'a Multiplier,
        radial_profile: &(dyn Fn(f64) -> f64 + Sync),
        radial_interval: (f64, f64),
        caps: &CapPartition,
        j: usize,
        grid_template: &GridFunction,
        quad: &QuadratureSpec,
        cluster_tol: f64,
        u_clip: Option<f64>,
    ) -> Result<Self> {
        if caps.d2() != g.d2() {
            return Err(Error::DimensionMismatch(
                "cap partition dimension differs from the group center".into(),
            ));
        }
        if j >= caps.len() {
            return Err(Error::InvalidParameter(format!(
                "cap index {j} out of range ({} caps)",
                caps.len()
            )));
        }
        let max_a = f.max_support();
        if f.support().0 < -1e-12 {
            return Err(Error::Precondition(
                "kernel evaluation needs a multiplier supported in [0, inf)".into(),
            ));
        }

        // Output-grid Nyquist check against the largest central frequency.
        let mu_max = radial_interval.1;
        for axis in &grid_template.axes()[g.d1()..] {
            if axis.count > 1 && mu_max * axis.spacing() > std::f64::consts::PI {
                return Err(Error::QuadratureTooCoarse {
                    product: mu_max * axis.spacing(),
                });
            }
        }

        let nodes = mu_nodes(caps, j, radial_interval, radial_profile, quad);

        let mut directions: Vec<DirectionData> = Vec::new();
        let mut dir_of_node: Vec<usize> = Vec::with_capacity(nodes.len());
        for node in &nodes {
            let is_new = directions
                .last()
                .map(|d| (&d.decomp.mu - &node.omega).amax() > 1e-14)
                .unwrap_or(true);
            if is_new {
                let decomp = spectral_for_kernel(g, &node.omega, cluster_tol)?;
                let prev = directions.last().map(|d| &d.kernel_basis);
                let kernel_basis = aligned_kernel_basis(&decomp.p0, decomp.r0, prev);
                directions.push(DirectionData {
                    decomp,
                    kernel_basis,
                });
            }
            dir_of_node.push(directions.len() - 1);
        }

        let (r0, half_ranks) = if let Some(first) = directions.first() {
            (first.decomp.r0, first.decomp.half_ranks())
        } else {
            (0, vec![])
        };
        for d in &directions {
            if d.decomp.r0 != r0 || d.decomp.half_ranks() != half_ranks {
                return Err(Error::KernelRankNotConstant(
                    "spectral layout changed across quadrature directions".into(),
                ));
            }
        }
        let prefactor = (2.0 * std::f64::consts::PI)
            .powi(-(r0 as i32 + g.d2() as i32 + half_ranks.iter().sum::<usize>() as i32));

        let d1 = g.d1();
        let d2 = g.d2();
        let axes = grid_template.axes().to_vec();
        let x_counts: Vec<usize> = axes[..d1].iter().map(|a| a.count).collect();
        let u_counts: Vec<usize> = axes[d1..].iter().map(|a| a.count).collect();
        let x_total: usize = x_counts.iter().product();
        let u_total: usize = u_counts.iter().product();
        let xs: Vec<DVector<f64>> = (0..x_total)
            .map(|mut flat| {
                let mut v = DVector::zeros(d1);
                for a in (0..d1).rev() {
                    v[a] = axes[a].node(flat % x_counts[a]);
                    flat /= x_counts[a];
                }
                v
            })
            .collect();
        let us: Vec<DVector<f64>> = (0..u_total)
            .map(|mut flat| {
                let mut v = DVector::zeros(d2);
                for a in (0..d2).rev() {
                    v[a] = axes[d1 + a].node(flat % u_counts[a]);
                    flat /= u_counts[a];
                }
                v
            })
            .collect();

        let n_blocks = half_ranks.len();
        let k_lists: Vec<Vec<Vec<usize>>> = nodes
            .iter()
            .enumerate()
            .map(|(i, node)| {
                let d = &directions[dir_of_node[i]].decomp;
                admissible_k_lists(&d.b, &half_ranks, max_a / node.rho)
            })
            .collect();
        let k_max = k_lists
            .iter()
            .flat_map(|lists| lists.iter().map(|k| k.iter().sum::<usize>()))
            .max()
            .unwrap_or(0);
        let kmax_per_block: Vec<Vec<usize>> = k_lists
            .iter()
            .map(|lists| {
                (0..n_blocks)
                    .map(|n| lists.iter().map(|k| k[n]).max().unwrap_or(0))
                    .collect()
            })
            .collect();

        let y_max = xs
            .iter()
            .map(|x| x.norm())
            .fold(0.0f64, f64::max)
            .max(1.0);
        let xi = XiIntegral::build(f, r0, max_a, y_max, quad.xi);

        // Evaluation window on the u axis (single-axis grids only).
        let u_window = match u_clip {
            Some(clip) if d2 == 1 => {
                let axis = axes[d1];
                let lo = ((-clip - axis.min) / axis.spacing()).floor().max(0.0) as usize;
                let hi = (((clip - axis.min) / axis.spacing()).ceil() as usize + 1).min(u_total);
                (lo.min(u_total), hi)
            }
            _ => (0, u_total),
        };

        // The mu quadrature must resolve e^{i rho <omega, u>} over the
        // evaluated u range: nodes per unit bandwidth-times-extent below one
        // per pi alias mass into the box.
        let u_abs_max = us[u_window.0..u_window.1]
            .iter()
            .map(|u| u.norm())
            .fold(0.0f64, f64::max);
        let bandwidth = radial_interval.1 - radial_interval.0;
        let radial_budget = bandwidth * u_abs_max / std::f64::consts::PI;
        if (quad.radial as f64) < radial_budget {
            return Err(Error::QuadratureTooCoarse {
                product: radial_budget / quad.radial as f64 * std::f64::consts::PI,
            });
        }
        if d2 >= 2 {
            let arc = 2.0 * caps.support_radius().min(std::f64::consts::PI);
            let sphere_budget = arc * radial_interval.1 * u_abs_max / std::f64::consts::PI;
            if (quad.sphere as f64) < sphere_budget {
                return Err(Error::QuadratureTooCoarse {
                    product: sphere_budget / quad.sphere as f64 * std::f64::consts::PI,
                });
            }
        }

        let phases = if d2 == 1 {
            // Running rotation along the uniform u axis.
            let axis = axes[d1];
            let u_start = axis.node(u_window.0);
            PhaseData::Recurrence(
                nodes
                    .iter()
                    .map(|node| {
                        let freq = node.rho * node.omega[0];
                        (
                            Complex64::from_polar(node.weight, freq * u_start),
                            Complex64::from_polar(1.0, freq * axis.spacing()),
                        )
                    })
                    .collect(),
            )
        } else {
            PhaseData::Table(
                nodes
                    .par_iter()
                    .map(|node| {
                        us[u_window.0..u_window.1]
                            .iter()
                            .map(|u| {
                                let arg = node.rho * node.omega.dot(u);
                                Complex64::from_polar(node.weight, arg)
                            })
                            .collect()
                    })
                    .collect(),
            )
        };

        Ok(KernelEvaluator {
            f,
            nodes,
            dir_of_node,
            directions,
            k_lists,
            kmax_per_block,
            half_ranks,
            r0,
            prefactor,
            xi,
            phases,
            xs,
            us,
            u_window,
            k_max,
        })
    }

    pub fn x_total(&self) -> usize {
        self.xs.len()
    }
    pub fn u_total(&self) -> usize {
        self.us.len()
    }
    pub fn x_point(&self, ix: usize) -> &DVector<f64> {
        &self.xs[ix]
    }
    pub fn u_point(&self, iu: usize) -> &DVector<f64> {
        &self.us[iu]
    }
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Fills the kernel values K(x_ix, u_iu) for all u indices.
    pub fn row(&self, ix: usize, out: &mut [Complex64]) {
        debug_assert_eq!(out.len(), self.us.len());
        out.fill(Complex64::new(0.0, 0.0));
        let x = &self.xs[ix];
        let n_blocks = self.half_ranks.len();
        let mut q = vec![0.0f64; n_blocks];
        let mut y = vec![0.0f64; self.r0];
        let mut phi_seqs: Vec<Vec<f64>> = vec![Vec::new(); n_blocks];
        for (i, node) in self.nodes.iter().enumerate() {
            if self.k_lists[i].is_empty() {
                continue;
            }
            let dir = &self.directions[self.dir_of_node[i]];
            let d = &dir.decomp;
            for (n, pn) in d.p.iter().enumerate() {
                q[n] = (pn * x).norm_squared();
            }
            for a in 0..self.r0 {
                y[a] = dir.kernel_basis.column(a).dot(x);
            }
            for n in 0..n_blocks {
                phi_seqs[n] = crate::specfun::laguerre_phi_sequence(
                    self.kmax_per_block[i][n],
                    d.b[n] * node.rho,
                    self.half_ranks[n],
                    q[n],
                )
                .expect("laguerre evaluation in admissible range");
            }
            // G(x) at this mu node: the Laguerre product against the
            // xi integral, summed over admissible k.
            let mut gx = 0.0f64;
            for kvec in &self.k_lists[i] {
                let eta: f64 = kvec
                    .iter()
                    .zip(d.b.iter().zip(&self.half_ranks))
                    .map(|(k, (b, r))| (2.0 * *k as f64 + *r as f64) * b * node.rho)
                    .sum();
                let mut lag = 1.0f64;
                for n in 0..n_blocks {
                    lag *= phi_seqs[n][kvec[n]];
                    if lag == 0.0 {
                        break;
                    }
                }
                if lag == 0.0 {
                    continue;
                }
                gx += lag * self.xi.eval(self.f, eta, &y);
            }
            if gx == 0.0 {
                continue;
            }
            let window = &mut out[self.u_window.0..self.u_window.1];
            match &self.phases {
                PhaseData::Table(tables) => {
                    for (slot, ph) in window.iter_mut().zip(&tables[i]) {
                        *slot += ph * gx;
                    }
                }
                PhaseData::Recurrence(steps) => {
                    let (start, step) = steps[i];
                    let mut phase = start;
                    for slot in window.iter_mut() {
                        *slot += phase * gx;
                        phase *= step;
                    }
                }
            }
        }
        for v in out.iter_mut() {
            *v *= self.prefactor;
        }
    }

    /// Parallel fold over kernel rows with a deterministic merge order:
    /// rows are processed in fixed chunks, each chunk folds sequentially,
    /// and chunk results merge in chunk order regardless of thread count.
    pub fn fold<Acc: Clone + Send + Sync>(
        &self,
        init: Acc,
        fold_row: impl Fn(&mut Acc, usize, &[Complex64]) + Sync,
        merge: impl Fn(&mut Acc, Acc),
    ) -> Acc {
        const CHUNK: usize = 64;
        let indices: Vec<usize> = (0..self.x_total()).collect();
        let partials: Vec<Acc> = indices
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = init.clone();
                let mut row = vec![Complex64::new(0.0, 0.0); self.u_total()];
                for &ix in chunk {
                    self.row(ix, &mut row);
                    fold_row(&mut acc, ix, &row);
                }
                acc
            })
            .collect();
        let mut acc = init;
        for p in partials {
            merge(&mut acc, p);
        }
        acc
    }
}

/// Kernel samples plus the evaluation metadata.
#[derive(Debug, Clone)]
pub struct KernelSample {
    pub grid: GridFunction,
    pub meta: KernelMeta,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelMeta {
    pub group: String,
    pub multiplier: String,
    pub ell: i32,
    pub cap_index: usize,
    pub cap_delta: f64,
    pub cap_count: usize,
    pub quad: QuadratureSpec,
    /// Largest total Laguerre degree that survived the support truncation.
    pub k_max: usize,
    /// Truncation constraint: sum (2k_n + r_n) b_n^mu <= this bound.
    pub truncation_budget: f64,
}

/// Radial window of chi(2^ell .): the dyadic band [2^{-ell-1}, 2^{-ell+1}].
pub fn dyadic_interval(ell: i32) -> (f64, f64) {
    let scale = 2f64.powi(-ell);
    (0.5 * scale, 2.0 * scale)
}

/// Core quadrature: evaluates the kernel of F(L) rho_profile(|U|) zeta_j(U)
/// on the grid template. The radial profile stands in for chi(2^ell .) so
/// products of profiles can be evaluated with the same machinery.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_kernel_radial(
    g: &TwoStepGroup,
    f: &Multiplier,
    radial_profile: &(dyn Fn(f64) -> f64 + Sync),
    radial_interval: (f64, f64),
    caps: &CapPartition,
    j: usize,
    grid_template: &GridFunction,
    quad: &QuadratureSpec,
    cluster_tol: f64,
) -> Result<(GridFunction, usize)> {
    let eval = KernelEvaluator::new(
        g,
        f,
        radial_profile,
        radial_interval,
        caps,
        j,
        grid_template,
        quad,
        cluster_tol,
    )?;
    let mut out = grid_template.clone();
    let u_total = eval.u_total();
    let values: Vec<Complex64> = (0..eval.x_total())
        .into_par_iter()
        .flat_map_iter(|ix| {
            let mut row = vec![Complex64::new(0.0, 0.0); u_total];
            eval.row(ix, &mut row);
            row.into_iter()
        })
        .collect();
    out.values_mut().copy_from_slice(&values);
    Ok((out, eval.k_max()))
}

/// Evaluates the convolution kernel of F(L) chi(2^ell U) zeta_j(U) on the
/// grid template.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_kernel(
    g: &TwoStepGroup,
    f: &Multiplier,
    chi: &ScalePartition,
    ell: i32,
    caps: &CapPartition,
    j: usize,
    grid_template: &GridFunction,
    quad: &QuadratureSpec,
) -> Result<KernelSample> {
    let chi = *chi;
    let profile = move |rho: f64| chi.chi_at_scale(ell, rho);
    let (grid, k_max) = evaluate_kernel_radial(
        g,
        f,
        &profile,
        dyadic_interval(ell),
        caps,
        j,
        grid_template,
        quad,
        crate::spectral::DEFAULT_CLUSTER_TOL,
    )?;
    Ok(KernelSample {
        grid,
        meta: KernelMeta {
            group: g.name().to_string(),
            multiplier: f.label().to_string(),
            ell,
            cap_index: j,
            cap_delta: caps.delta(),
            cap_count: caps.len(),
            quad: *quad,
            k_max,
            truncation_budget: f.max_support(),
        },
    })
}
