//! Spectral analysis of the matrix family mu -> J_mu: eigendecompositions
//! with clustering, kernel projections, the Lipschitz constant of the kernel
//! projection, assumption checks, and group classification.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::TwoStepGroup;
use crate::sphere::{sphere_samples, structured_probes};

/// Default relative gap threshold for eigenvalue clustering.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;
/// Default tolerance for projection / assumption residuals.
pub const DEFAULT_CHECK_TOL: f64 = 1e-9;

/// J_mu = mu_1 J_1 + ... + mu_d2 J_d2.
pub fn j_matrix(g: &TwoStepGroup, mu: &DVector<f64>) -> Result<DMatrix<f64>> {
    if mu.len() != g.d2() {
        return Err(Error::DimensionMismatch(format!(
            "mu has length {}, expected {}",
            mu.len(),
            g.d2()
        )));
    }
    let mut m = DMatrix::zeros(g.d1(), g.d1());
    for (k, jk) in g.j().iter().enumerate() {
        m += jk * mu[k];
    }
    Ok(m)
}

/// Spectral data of J_mu at one frequency: -J_mu^2 = sum b_n^2 P_n, with P0
/// the projection onto ker J_mu.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub mu: DVector<f64>,
    /// Positive eigenvalue magnitudes of i J_mu, descending.
    pub b: Vec<f64>,
    /// Orthogonal projections onto the corresponding eigenspaces of -J_mu^2.
    pub p: Vec<DMatrix<f64>>,
    /// Projection onto ker J_mu.
    pub p0: DMatrix<f64>,
    /// Ranks of the P_n (always even).
    pub ranks: Vec<usize>,
    /// dim ker J_mu.
    pub r0: usize,
}

impl SpectralDecomposition {
    /// Half-ranks r_n with 2 r_n = ranks[n].
    pub fn half_ranks(&self) -> Vec<usize> {
        self.ranks.iter().map(|r| r / 2).collect()
    }

    pub fn dbar1(&self) -> usize {
        self.ranks.iter().sum()
    }

    fn validate(&self, g: &TwoStepGroup, scale: f64) -> Result<()> {
        let d1 = g.d1();
        let jmu = j_matrix(g, &self.mu)?;
        let mut recon = &jmu * &jmu;
        let mut complete = self.p0.clone();
        for (b, p) in self.b.iter().zip(&self.p) {
            recon += p * (b * b);
            complete += p;
        }
        if recon.amax() > 1e-9 * scale.max(1e-300) {
            return Err(Error::Precondition(format!(
                "spectral reconstruction residual {:.3e} exceeds 1e-9 * |J_mu|^2",
                recon.amax()
            )));
        }
        complete -= DMatrix::identity(d1, d1);
        if complete.amax() > 1e-10 {
            return Err(Error::Precondition(format!(
                "projection completeness residual {:.3e} exceeds 1e-10",
                complete.amax()
            )));
        }
        for (i, p) in self.p.iter().chain(std::iter::once(&self.p0)).enumerate() {
            if (p * p - p).amax() > 1e-10 || (p - p.transpose()).amax() > 1e-10 {
                return Err(Error::Precondition(format!(
                    "projection {i} is not an orthogonal projection to 1e-10"
                )));
            }
        }
        Ok(())
    }
}

fn symmetric_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| {
        eig.eigenvalues[*b]
            .partial_cmp(&eig.eigenvalues[*a])
            .unwrap()
    });
    let vals: Vec<f64> = order.iter().map(|i| eig.eigenvalues[*i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(*i));
    }
    (vals, vecs)
}

/// Projection onto the span of the given (nearly orthonormal) columns,
/// re-orthonormalized through a QR step and symmetrized.
fn projection_from_columns(cols: &DMatrix<f64>) -> DMatrix<f64> {
    if cols.ncols() == 0 {
        return DMatrix::zeros(cols.nrows(), cols.nrows());
    }
    let qr = cols.clone().qr();
    let q = qr.q();
    let p = &q * q.transpose();
    (&p + p.transpose()) * 0.5
}

fn cluster_boundaries(vals: &[f64], scale: f64, tol: f64) -> Result<Vec<usize>> {
    // Returns start indices of clusters in the descending value list.
    let mut starts = vec![0usize];
    for i in 1..vals.len() {
        let gap = (vals[i - 1] - vals[i]) / scale;
        if gap >= 10.0 * tol {
            starts.push(i);
        } else if gap > tol {
            return Err(Error::ClusteringAmbiguity {
                gap,
                lo: tol,
                hi: 10.0 * tol,
            });
        }
    }
    Ok(starts)
}

/// Eigendecomposition of -J_mu^2 with relative-gap clustering.
///
/// Eigenvalues whose relative gap stays below `tol` merge into one cluster;
/// a gap inside [tol, 10 tol] is reported as an ambiguity error. Eigenvalues
/// below tol * |J_mu|^2 form the kernel cluster.
pub fn spectral_decompose(
    g: &TwoStepGroup,
    mu: &DVector<f64>,
    tol: f64,
) -> Result<SpectralDecomposition> {
    if mu.norm() == 0.0 {
        return Err(Error::InvalidParameter("mu must be nonzero".into()));
    }
    let jmu = j_matrix(g, mu)?;
    let m = -(&jmu * &jmu);
    let (vals, vecs) = symmetric_eigen_sorted(&m);
    let scale = vals[0].max(0.0);
    if scale <= 0.0 {
        return Err(Error::Precondition(
            "J_mu vanished at a nonzero mu; structure matrices are degenerate".into(),
        ));
    }
    let starts = cluster_boundaries(&vals, scale, tol)?;
    let mut b = Vec::new();
    let mut p = Vec::new();
    let mut ranks = Vec::new();
    let mut p0 = DMatrix::zeros(g.d1(), g.d1());
    let mut r0 = 0usize;
    for (ci, &start) in starts.iter().enumerate() {
        let end = starts.get(ci + 1).copied().unwrap_or(vals.len());
        let members = &vals[start..end];
        let cols = vecs.columns(start, end - start).into_owned();
        if members[0] <= tol * scale {
            // Kernel cluster (trailing by descending order).
            p0 = projection_from_columns(&cols);
            r0 = end - start;
        } else {
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            if (end - start) % 2 != 0 {
                return Err(Error::Precondition(format!(
                    "nonzero eigenvalue cluster of odd multiplicity {} near {:.6e}; \
                     adjust the clustering tolerance",
                    end - start,
                    mean
                )));
            }
            b.push(mean.max(0.0).sqrt());
            ranks.push(end - start);
            p.push(projection_from_columns(&cols));
        }
    }
    let out = SpectralDecomposition {
        mu: mu.clone(),
        b,
        p,
        p0,
        ranks,
        r0,
    };
    out.validate(g, scale)?;
    Ok(out)
}

/// Spectral data per Assumption-A block: one (b_n, P_n^mu, r_n) triple for
/// every block projection of the group, even when eigenvalues coincide
/// across blocks. Entries are sorted by descending b with ties kept in
/// block order.
pub fn block_spectral_decompose(
    g: &TwoStepGroup,
    mu: &DVector<f64>,
    tol: f64,
) -> Result<SpectralDecomposition> {
    let blocks = g.blocks().ok_or(Error::BlocksMissing)?;
    if mu.norm() == 0.0 {
        return Err(Error::InvalidParameter("mu must be nonzero".into()));
    }
    let jmu = j_matrix(g, mu)?;
    let m = -(&jmu * &jmu);
    let scale = m.amax().max(1e-300);

    let mut entries: Vec<(f64, DMatrix<f64>, usize, usize)> = Vec::new();
    let mut p0 = DMatrix::identity(g.d1(), g.d1());
    let mut covered = 0usize;
    for (n, pn) in blocks.iter().enumerate() {
        // Orthonormal basis of range(P_n).
        let (pvals, pvecs) = symmetric_eigen_sorted(pn);
        let rank = pvals.iter().filter(|v| **v > 0.5).count();
        covered += rank;
        let basis = pvecs.columns(0, rank).into_owned();
        let restricted = basis.transpose() * &m * &basis;
        let (vals, vecs) = symmetric_eigen_sorted(&restricted);
        let nz: Vec<usize> = (0..vals.len()).filter(|i| vals[*i] > tol * scale).collect();
        if nz.is_empty() {
            return Err(Error::Precondition(format!(
                "block {} of {} has no nonzero eigenvalue at this mu",
                n + 1,
                g.name()
            )));
        }
        let nz_vals: Vec<f64> = nz.iter().map(|i| vals[*i]).collect();
        let spread = (nz_vals[0] - nz_vals[nz_vals.len() - 1]) / scale;
        if spread > 10.0 * tol {
            return Err(Error::Precondition(format!(
                "block {} of {} has more than one nonzero eigenvalue (spread {:.3e})",
                n + 1,
                g.name(),
                spread
            )));
        }
        if nz.len() % 2 != 0 {
            return Err(Error::Precondition(format!(
                "block {} has odd nonzero rank {}",
                n + 1,
                nz.len()
            )));
        }
        let mean = nz_vals.iter().sum::<f64>() / nz_vals.len() as f64;
        let mut lifted = DMatrix::zeros(g.d1(), nz.len());
        for (c, i) in nz.iter().enumerate() {
            lifted.set_column(c, &(&basis * vecs.column(*i)));
        }
        let proj = projection_from_columns(&lifted);
        p0 -= &proj;
        entries.push((mean.sqrt(), proj, nz.len(), n));
    }
    if covered != g.d1() {
        return Err(Error::InvalidBlocks(format!(
            "block ranks cover {} of {} first-layer dimensions",
            covered,
            g.d1()
        )));
    }
    entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.3.cmp(&b.3)));
    let p0 = (&p0 + p0.transpose()) * 0.5;
    let r0 = g.d1() - entries.iter().map(|e| e.2).sum::<usize>();
    let out = SpectralDecomposition {
        mu: mu.clone(),
        b: entries.iter().map(|e| e.0).collect(),
        p: entries.iter().map(|e| e.1.clone()).collect(),
        p0,
        ranks: entries.iter().map(|e| e.2).collect(),
        r0,
    };
    out.validate(g, scale)?;
    Ok(out)
}

/// Number of eigenvalues of -J_mu^2 below tol * |J_mu|^2.
pub fn kernel_rank(g: &TwoStepGroup, mu: &DVector<f64>, tol: f64) -> Result<usize> {
    let jmu = j_matrix(g, mu)?;
    let m = -(&jmu * &jmu);
    let eig = m.symmetric_eigen();
    let scale = eig.eigenvalues.max().max(1e-300);
    Ok(eig.eigenvalues.iter().filter(|v| **v <= tol * scale).count())
}

/// Orthonormal basis of ker J_mu (d1 x r0 matrix).
pub fn kernel_basis(g: &TwoStepGroup, mu: &DVector<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let jmu = j_matrix(g, mu)?;
    let m = -(&jmu * &jmu);
    let (vals, vecs) = symmetric_eigen_sorted(&m);
    let scale = vals[0].max(1e-300);
    let r0 = vals.iter().filter(|v| **v <= tol * scale).count();
    let cols = vecs.columns(vals.len() - r0, r0).into_owned();
    if r0 == 0 {
        return Ok(DMatrix::zeros(g.d1(), 0));
    }
    Ok(cols.qr().q())
}

/// Projection onto ker J_mu with degree-0 homogeneity validation at
/// t in {1/2, 2} and a constancy check of r0 over sampled directions.
pub fn kernel_projection(g: &TwoStepGroup, mu: &DVector<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let base = spectral_decompose(g, mu, tol)?;
    let mut witnesses = Vec::new();
    for dir in sphere_samples(g.d2(), 16) {
        let r = kernel_rank(g, &dir, tol)?;
        if r != base.r0 {
            witnesses.push(format!("dim ker J_mu = {r} at mu = {:?}", dir.as_slice()));
        }
    }
    if !witnesses.is_empty() {
        return Err(Error::KernelRankNotConstant(witnesses.join("; ")));
    }
    for t in [0.5, 2.0] {
        let scaled = spectral_decompose(g, &(mu * t), tol)?;
        if (&scaled.p0 - &base.p0).amax() > 1e-9 {
            return Err(Error::Precondition(format!(
                "P0 is not homogeneous of degree 0: residual {:.3e} at t = {t}",
                (&scaled.p0 - &base.p0).amax()
            )));
        }
    }
    Ok(base.p0)
}

fn operator_norm_symmetric(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Measured Lipschitz constant of mu -> P0^mu over the unit sphere.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzEstimate {
    pub kappa: f64,
    pub pair: (Vec<f64>, Vec<f64>),
    pub samples: usize,
}

/// Estimates sup |P0(mu) - P0(mu')| / |mu - mu'| over unit directions from a
/// deterministic sphere set plus seeded random refinement near the maximum.
pub fn projection_lipschitz_constant(
    g: &TwoStepGroup,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<LipschitzEstimate> {
    let dirs = sphere_samples(g.d2(), samples.max(2));
    let r0 = kernel_rank(g, &dirs[0], tol)?;
    let mut witnesses = Vec::new();
    let projections: Vec<DMatrix<f64>> = dirs
        .iter()
        .map(|mu| {
            let r = kernel_rank(g, mu, tol)?;
            if r != r0 {
                witnesses.push(format!("dim ker = {r} at {:?}", mu.as_slice()));
            }
            let basis = kernel_basis(g, mu, tol)?;
            Ok(projection_from_columns(&basis))
        })
        .collect::<Result<Vec<_>>>()?;
    if !witnesses.is_empty() {
        return Err(Error::KernelRankNotConstant(witnesses.join("; ")));
    }
    if r0 == 0 {
        return Ok(LipschitzEstimate {
            kappa: 0.0,
            pair: (dirs[0].as_slice().to_vec(), dirs[1].as_slice().to_vec()),
            samples: dirs.len(),
        });
    }

    let ratio = |a: &DVector<f64>, b: &DVector<f64>, pa: &DMatrix<f64>, pb: &DMatrix<f64>| {
        let dist = (a - b).norm();
        if dist < 1e-12 {
            0.0
        } else {
            operator_norm_symmetric(&(pa - pb)) / dist
        }
    };

    let mut best = 0.0f64;
    let mut pair = (0usize, 1usize);
    for i in 0..dirs.len() {
        for j in (i + 1)..dirs.len() {
            let r = ratio(&dirs[i], &dirs[j], &projections[i], &projections[j]);
            if r > best {
                best = r;
                pair = (i, j);
            }
        }
    }

    // Seeded refinement near the maximizing pair, probing ever closer pairs
    // to approach the local supremum of the difference quotient.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_pair = (dirs[pair.0].clone(), dirs[pair.1].clone());
    let anchor = dirs[pair.0].clone();
    let p_anchor = projections[pair.0].clone();
    for scale_exp in 1..=6 {
        let eps = 10f64.powi(-scale_exp);
        for _ in 0..64 {
            let mut tangent = DVector::from_fn(g.d2(), |_, _| rng.gen_range(-1.0..1.0));
            tangent -= &anchor * anchor.dot(&tangent);
            let tn = tangent.norm();
            if tn < 1e-12 {
                continue;
            }
            let mut nearby = &anchor + tangent * (eps / tn);
            nearby /= nearby.norm();
            let pb = projection_from_columns(&kernel_basis(g, &nearby, tol)?);
            let r = ratio(&anchor, &nearby, &p_anchor, &pb);
            if r > best {
                best = r;
                best_pair = (anchor.clone(), nearby);
            }
        }
    }

    Ok(LipschitzEstimate {
        kappa: best,
        pair: (
            best_pair.0.as_slice().to_vec(),
            best_pair.1.as_slice().to_vec(),
        ),
        samples: dirs.len(),
    })
}

/// Verdict carrier for the structural assumption checks.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub assumption: String,
    pub holds: bool,
    pub samples: Vec<Vec<f64>>,
    pub worst_residual: f64,
    pub witnesses: Vec<String>,
    pub notes: String,
    /// 2 (r_1 + ... + r_N) when applicable.
    pub dbar1: Option<usize>,
    pub half_ranks: Option<Vec<usize>>,
}

/// Verifies the block decomposition hypothesis: commutation with every J_mu,
/// a mu-independent even rank of J_mu^2 P_n, and a single nonzero eigenvalue
/// per block, over a deterministic direction sample.
pub fn check_assumption_a(g: &TwoStepGroup, samples: usize, tol: f64) -> Result<AssumptionReport> {
    let blocks = g.blocks().ok_or(Error::BlocksMissing)?;
    let mut dirs = sphere_samples(g.d2(), samples);
    dirs.extend(structured_probes(g.d2()));
    let mut worst = 0.0f64;
    let mut witnesses = Vec::new();
    let mut ranks: Vec<Option<usize>> = vec![None; blocks.len()];

    for mu in &dirs {
        let jmu = j_matrix(g, mu)?;
        let jscale = jmu.amax().max(1e-300);
        let m = -(&jmu * &jmu);
        let scale = m.amax().max(1e-300);
        for (n, pn) in blocks.iter().enumerate() {
            let comm = (&jmu * pn - pn * &jmu).amax() / jscale;
            worst = worst.max(comm);
            if comm > tol {
                witnesses.push(format!(
                    "commutator |J_mu P_{} - P_{} J_mu| = {:.3e} at mu = {:?}",
                    n + 1,
                    n + 1,
                    comm,
                    mu.as_slice()
                ));
            }
            let prod = &m * pn;
            let svd = prod.svd(false, false);
            let rank = svd
                .singular_values
                .iter()
                .filter(|s| **s > tol * scale)
                .count();
            match ranks[n] {
                None => ranks[n] = Some(rank),
                Some(r) if r != rank => witnesses.push(format!(
                    "rank(J_mu^2 P_{}) jumped from {r} to {rank} at mu = {:?}",
                    n + 1,
                    mu.as_slice()
                )),
                _ => {}
            }
            if rank % 2 != 0 {
                witnesses.push(format!(
                    "rank(J_mu^2 P_{}) = {rank} is odd at mu = {:?}",
                    n + 1,
                    mu.as_slice()
                ));
            }
            // Single nonzero eigenvalue on the block.
            let (pvals, pvecs) = symmetric_eigen_sorted(pn);
            let brank = pvals.iter().filter(|v| **v > 0.5).count();
            let basis = pvecs.columns(0, brank).into_owned();
            let restricted = basis.transpose() * &m * &basis;
            let eig = restricted.symmetric_eigen();
            let nz: Vec<f64> = eig
                .eigenvalues
                .iter()
                .copied()
                .filter(|v| *v > tol * scale)
                .collect();
            if !nz.is_empty() {
                let max = nz.iter().cloned().fold(f64::MIN, f64::max);
                let min = nz.iter().cloned().fold(f64::MAX, f64::min);
                let spread = (max - min) / scale;
                worst = worst.max(spread);
                if spread > tol * 10.0 {
                    witnesses.push(format!(
                        "block {} eigenvalue spread {:.3e} at mu = {:?}",
                        n + 1,
                        spread,
                        mu.as_slice()
                    ));
                }
            }
        }
    }

    let holds = witnesses.is_empty();
    let dbar1 = if holds {
        Some(ranks.iter().map(|r| r.unwrap_or(0)).sum())
    } else {
        None
    };
    let half_ranks = if holds {
        Some(ranks.iter().map(|r| r.unwrap_or(0) / 2).collect())
    } else {
        None
    };
    Ok(AssumptionReport {
        assumption: "A".into(),
        holds,
        samples: dirs.iter().map(|d| d.as_slice().to_vec()).collect(),
        worst_residual: worst,
        witnesses,
        notes: format!("{} blocks, {} directions", blocks.len(), dirs.len()),
        dbar1,
        half_ranks,
    })
}

/// Verifies that kernel vectors of any single J_mu0 bracket trivially:
/// |(J_k x)^T x'| <= tol for all orthonormal kernel basis pairs.
pub fn check_assumption_b(g: &TwoStepGroup, samples: usize, tol: f64) -> Result<AssumptionReport> {
    let mut dirs = sphere_samples(g.d2(), samples);
    dirs.extend(structured_probes(g.d2()));
    let mut worst = 0.0f64;
    let mut witnesses = Vec::new();
    let mut any_kernel = false;

    for mu0 in &dirs {
        let basis = kernel_basis(g, mu0, 1e-8)?;
        let r0 = basis.ncols();
        if r0 == 0 {
            continue;
        }
        any_kernel = true;
        for a in 0..r0 {
            for b in 0..r0 {
                let xa = basis.column(a).into_owned();
                let xb = basis.column(b).into_owned();
                for (k, jk) in g.j().iter().enumerate() {
                    let val = (jk * &xa).dot(&xb).abs();
                    worst = worst.max(val);
                    if val > tol {
                        witnesses.push(format!(
                            "(J_{} x)^T x' = {:.3e} for kernel vectors of J_mu0, mu0 = {:?}",
                            k + 1,
                            val,
                            mu0.as_slice()
                        ));
                    }
                }
            }
        }
    }

    let notes = if any_kernel {
        format!("{} directions probed", dirs.len())
    } else {
        "all sampled kernels were trivial; holds vacuously".to_string()
    };
    Ok(AssumptionReport {
        assumption: "B".into(),
        holds: witnesses.is_empty(),
        samples: dirs.iter().map(|d| d.as_slice().to_vec()).collect(),
        worst_residual: worst,
        witnesses,
        notes,
        dbar1: None,
        half_ranks: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub is_metivier: bool,
    pub is_heisenberg_type: bool,
    pub r0: usize,
    pub r0_constant: bool,
}

/// Metivier iff J_mu is invertible at every sampled direction; Heisenberg
/// type iff additionally J_mu^T J_mu = Id for |mu| = 1.
pub fn classify_group(g: &TwoStepGroup, samples: usize, tol: f64) -> Result<Classification> {
    let mut dirs = sphere_samples(g.d2(), samples);
    dirs.extend(structured_probes(g.d2()));
    let mut metivier = true;
    let mut htype = true;
    let mut r0_seen: Option<usize> = None;
    let mut r0_constant = true;
    let mut r0_max = 0usize;
    for mu in &dirs {
        let jmu = j_matrix(g, mu)?;
        let svd = jmu.clone().svd(false, false);
        let smax = svd.singular_values.max().max(1e-300);
        let r0 = svd
            .singular_values
            .iter()
            .filter(|s| **s <= tol.sqrt() * smax)
            .count();
        r0_max = r0_max.max(r0);
        match r0_seen {
            None => r0_seen = Some(r0),
            Some(r) if r != r0 => r0_constant = false,
            _ => {}
        }
        if r0 > 0 {
            metivier = false;
        }
        if (jmu.transpose() * &jmu - DMatrix::identity(g.d1(), g.d1())).amax() > tol.sqrt() {
            htype = false;
        }
    }
    Ok(Classification {
        is_metivier: metivier,
        is_heisenberg_type: metivier && htype,
        r0: r0_max,
        r0_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{builtin_group, BuiltinFamily};
    use approx::assert_relative_eq;

    fn unit(v: Vec<f64>) -> DVector<f64> {
        let v = DVector::from_vec(v);
        let n = v.norm();
        v / n
    }

    #[test]
    fn j_matrix_matches_reference_n32() {
        let g = builtin_group(BuiltinFamily::N32Glued(1)).unwrap();
        let j = j_matrix(&g, &DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
        assert!((j - expected).amax() < 1e-15);
        let j0 = j_matrix(&g, &DVector::zeros(3)).unwrap();
        assert_eq!(j0.amax(), 0.0);
    }

    #[test]
    fn j_matrix_linearity() {
        let g = builtin_group(BuiltinFamily::HeisenbergReiter(2, 3)).unwrap();
        let a = DVector::from_vec(vec![0.3, -1.0, 0.7]);
        let b = DVector::from_vec(vec![1.1, 0.2, -0.5]);
        let lhs = j_matrix(&g, &(&a + &b)).unwrap();
        let rhs = j_matrix(&g, &a).unwrap() + j_matrix(&g, &b).unwrap();
        assert!((lhs - rhs).amax() < 1e-14);
    }

    #[test]
    fn decompose_n32_at_e3() {
        let g = builtin_group(BuiltinFamily::N32Glued(1)).unwrap();
        let mu = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let d = spectral_decompose(&g, &mu, DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(d.b.len(), 1);
        assert_relative_eq!(d.b[0], 1.0, max_relative = 1e-12);
        assert_eq!(d.ranks, vec![2]);
        assert_eq!(d.r0, 1);
        // Kernel is span{mu} = span{e3}.
        let expected_p0 = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 0., 0., 0., 0., 1.]);
        assert!((d.p0 - expected_p0).amax() < 1e-12);
    }

    #[test]
    fn decompose_heisenberg_reiter() {
        let g = builtin_group(BuiltinFamily::HeisenbergReiter(1, 2)).unwrap();
        let mu = unit(vec![1.0, 0.0]);
        let d = spectral_decompose(&g, &mu, DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(d.b, vec![1.0]);
        assert_eq!(d.r0, 1);
        // Kernel = mu-perp x {0} = span{e2}.
        let expected_p0 = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 1., 0., 0., 0., 0.]);
        assert!((d.p0 - expected_p0).amax() < 1e-12);
    }

    #[test]
    fn decompose_heisenberg_is_full_rank() {
        let g = builtin_group(BuiltinFamily::Heisenberg(2)).unwrap();
        let mu = DVector::from_vec(vec![1.7]);
        let d = spectral_decompose(&g, &mu, DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(d.b.len(), 1);
        assert_relative_eq!(d.b[0], 1.7, max_relative = 1e-12);
        assert_eq!(d.ranks, vec![4]);
        assert_eq!(d.r0, 0);
        assert!((&d.p[0] - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn block_decompose_gives_per_block_entries() {
        let g = builtin_group(BuiltinFamily::N32Glued(2)).unwrap();
        let mu = unit(vec![0.2, -0.5, 1.0]);
        let d = block_spectral_decompose(&g, &mu, DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(d.b.len(), 2);
        assert_relative_eq!(d.b[0], 1.0, max_relative = 1e-10);
        assert_relative_eq!(d.b[1], 1.0, max_relative = 1e-10);
        assert_eq!(d.ranks, vec![2, 2]);
        assert_eq!(d.r0, 2);
        // Cluster mode merges the two equal eigenvalues instead.
        let c = spectral_decompose(&g, &mu, DEFAULT_CLUSTER_TOL).unwrap();
        assert_eq!(c.ranks, vec![4]);
    }

    #[test]
    fn homogeneity_of_b_and_p() {
        let g = builtin_group(BuiltinFamily::HeisenbergReiter(2, 3)).unwrap();
        let mu = unit(vec![0.3, 0.9, -0.2]);
        let d1 = block_spectral_decompose(&g, &mu, DEFAULT_CLUSTER_TOL).unwrap();
        for t in [0.5, 2.0] {
            let dt = block_spectral_decompose(&g, &(&mu * t), DEFAULT_CLUSTER_TOL).unwrap();
            for (a, b) in d1.b.iter().zip(&dt.b) {
                assert_relative_eq!(b, &(a * t), max_relative = 1e-9);
            }
            for (pa, pb) in d1.p.iter().zip(&dt.p) {
                assert!((pa - pb).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn kernel_projection_reference_values() {
        let g = builtin_group(BuiltinFamily::N32Glued(1)).unwrap();
        let p0 = kernel_projection(&g, &DVector::from_vec(vec![0.0, 0.0, 1.0]), 1e-6).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 0., 0., 0., 0., 1.]);
        assert!((&p0 - &expected).amax() < 1e-12);
        let p0_scaled =
            kernel_projection(&g, &DVector::from_vec(vec![0.0, 0.0, 2.0]), 1e-6).unwrap();
        assert!((&p0 - &p0_scaled).amax() < 1e-12);

        let h = builtin_group(BuiltinFamily::Heisenberg(1)).unwrap();
        let p0h = kernel_projection(&h, &DVector::from_vec(vec![1.0]), 1e-6).unwrap();
        assert!(p0h.amax() < 1e-14);
    }

    #[test]
    fn lipschitz_constant_reference() {
        let h = builtin_group(BuiltinFamily::Heisenberg(2)).unwrap();
        let est = projection_lipschitz_constant(&h, 32, 1, 1e-6).unwrap();
        assert_eq!(est.kappa, 0.0);

        // Hand-computable pair on heisenberg_reiter(1,2): P0(e1) - P0(e2)
        // has operator norm 1 at distance sqrt(2).
        let g = builtin_group(BuiltinFamily::HeisenbergReiter(1, 2)).unwrap();
        let est = projection_lipschitz_constant(&g, 64, 1, 1e-6).unwrap();
        assert!(est.kappa >= 1.0 / 2f64.sqrt() - 1e-9, "kappa = {}", est.kappa);
        // For rank-one kernels the difference quotient approaches 1.
        assert!(est.kappa <= 1.0 + 1e-6, "kappa = {}", est.kappa);
    }

    #[test]
    fn assumption_a_reference_groups() {
        let g = builtin_group(BuiltinFamily::N32Glued(2)).unwrap();
        let rep = check_assumption_a(&g, 200, DEFAULT_CHECK_TOL).unwrap();
        assert!(rep.holds, "witnesses: {:?}", rep.witnesses);
        assert_eq!(rep.dbar1, Some(4));
        assert_eq!(rep.half_ranks, Some(vec![1, 1]));

        let hr = builtin_group(BuiltinFamily::HeisenbergReiter(2, 3)).unwrap();
        let rep = check_assumption_a(&hr, 200, DEFAULT_CHECK_TOL).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.dbar1, Some(4));

        let h = builtin_group(BuiltinFamily::Heisenberg(3)).unwrap();
        let rep = check_assumption_a(&h, 64, DEFAULT_CHECK_TOL).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.dbar1, Some(6));
        assert_eq!(rep.half_ranks, Some(vec![3]));
    }

    #[test]
    fn assumption_a_needs_blocks() {
        let g = crate::group::parse_group_spec(r#"{"d1":2,"d2":1,"J":[[[0,1],[-1,0]]]}"#).unwrap();
        assert!(matches!(
            check_assumption_a(&g, 8, DEFAULT_CHECK_TOL),
            Err(Error::BlocksMissing)
        ));
    }

    #[test]
    fn assumption_b_reference_groups() {
        for fam in [
            BuiltinFamily::N32Glued(2),
            BuiltinFamily::HeisenbergReiter(2, 2),
            BuiltinFamily::HeisenbergReiter(1, 3),
        ] {
            let g = builtin_group(fam).unwrap();
            let rep = check_assumption_b(&g, 200, 1e-9).unwrap();
            assert!(rep.holds, "witnesses: {:?}", rep.witnesses);
        }
        let h = builtin_group(BuiltinFamily::Heisenberg(1)).unwrap();
        let rep = check_assumption_b(&h, 64, 1e-9).unwrap();
        assert!(rep.holds);
        assert!(rep.notes.contains("vacuously"));
    }

    #[test]
    fn assumption_b_counterexample_detected() {
        // Two planes with decoupled J's: ker J_{e1} = span{e3, e4} but
        // (J_2 e3)^T e4 = 1, so kernel vectors bracket nontrivially.
        let text = r#"{"d1":4,"d2":2,"J":[
            [[0,1,0,0],[-1,0,0,0],[0,0,0,0],[0,0,0,0]],
            [[0,0,0,0],[0,0,0,0],[0,0,0,1],[0,0,-1,0]]
        ]}"#;
        let g = crate::group::parse_group_spec(text).unwrap();
        let rep = check_assumption_b(&g, 100, 1e-9).unwrap();
        assert!(!rep.holds);
        assert!(!rep.witnesses.is_empty());
        assert!(rep.worst_residual > 0.9);
    }

    #[test]
    fn classification_reference() {
        let h = builtin_group(BuiltinFamily::Heisenberg(2)).unwrap();
        let c = classify_group(&h, 100, 1e-9).unwrap();
        assert!(c.is_metivier && c.is_heisenberg_type);
        assert_eq!(c.r0, 0);

        let hr = builtin_group(BuiltinFamily::HeisenbergReiter(1, 2)).unwrap();
        let c = classify_group(&hr, 100, 1e-9).unwrap();
        assert!(!c.is_metivier);
        assert_eq!(c.r0, 1);
        assert!(c.r0_constant);

        let n32 = builtin_group(BuiltinFamily::N32Glued(2)).unwrap();
        let c = classify_group(&n32, 100, 1e-9).unwrap();
        assert!(!c.is_metivier);
        assert_eq!(c.r0, 2);
    }

    #[test]
    fn clustering_ambiguity_is_reported() {
        // Eigenvalues 1 and 1 + 3 tol: the relative gap sits inside the
        // ambiguity band [tol, 10 tol].
        let tol = 1e-3;
        let b2 = (1.0f64 + 3.0 * tol).sqrt();
        let mut j = DMatrix::zeros(4, 4);
        j[(0, 1)] = 1.0;
        j[(1, 0)] = -1.0;
        j[(2, 3)] = b2;
        j[(3, 2)] = -b2;
        let g = TwoStepGroup::new("ambiguous", 4, 1, vec![j], None).unwrap();
        let err = spectral_decompose(&g, &DVector::from_vec(vec![1.0]), tol).unwrap_err();
        assert!(matches!(err, Error::ClusteringAmbiguity { .. }), "{err}");
    }
}
