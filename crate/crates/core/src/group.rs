//! Two-step stratified groups in exponential coordinates: construction,
//! validation, built-in families, and the group operations.

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Relative tolerance for the skew-symmetry check of the structure matrices.
pub const SKEW_TOL: f64 = 1e-12;

/// A two-step stratified Lie group determined by its first-layer dimension
/// `d1`, center dimension `d2`, and the skew-symmetric matrices `J_1..J_d2`
/// encoding the bracket.
#[derive(Debug, Clone)]
pub struct TwoStepGroup {
    name: String,
    d1: usize,
    d2: usize,
    j: Vec<DMatrix<f64>>,
    blocks: Option<Vec<DMatrix<f64>>>,
}

/// A point (x, u) of the group in exponential coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
}

impl GroupPoint {
    pub fn new(x: DVector<f64>, u: DVector<f64>) -> Self {
        assert!(
            x.iter().chain(u.iter()).all(|v| v.is_finite()),
            "group points must have finite coordinates"
        );
        GroupPoint { x, u }
    }

    pub fn from_slices(x: &[f64], u: &[f64]) -> Self {
        Self::new(DVector::from_row_slice(x), DVector::from_row_slice(u))
    }
}

#[derive(Deserialize)]
struct GroupSpecFile {
    name: Option<String>,
    d1: usize,
    d2: usize,
    #[serde(rename = "J")]
    j: Vec<Vec<Vec<f64>>>,
    blocks: Option<Vec<Vec<Vec<f64>>>>,
}

fn matrix_from_rows(rows: &[Vec<f64>], d: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Parse(format!(
            "{what} must be a {d}x{d} row-major matrix"
        )));
    }
    Ok(DMatrix::from_fn(d, d, |r, c| rows[r][c]))
}

impl TwoStepGroup {
    /// Validates and constructs a group from raw data. The J matrices are
    /// symmetrized (J - J^T)/2 after the skew check passes.
    pub fn new(
        name: impl Into<String>,
        d1: usize,
        d2: usize,
        j: Vec<DMatrix<f64>>,
        blocks: Option<Vec<DMatrix<f64>>>,
    ) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::InvalidParameter(
                "d1 and d2 must be positive".into(),
            ));
        }
        if j.len() != d2 {
            return Err(Error::DimensionMismatch(format!(
                "expected {d2} J matrices, got {}",
                j.len()
            )));
        }
        let mut j_clean = Vec::with_capacity(d2);
        for (k, jk) in j.iter().enumerate() {
            if jk.nrows() != d1 || jk.ncols() != d1 {
                return Err(Error::DimensionMismatch(format!(
                    "J_{} must be {d1}x{d1}, got {}x{}",
                    k + 1,
                    jk.nrows(),
                    jk.ncols()
                )));
            }
            let sym = jk + jk.transpose();
            let residual = sym.amax();
            let tol = SKEW_TOL * (1.0 + jk.amax());
            if residual > tol {
                return Err(Error::NonSkewMatrix { k: k + 1, residual, tol });
            }
            j_clean.push((jk - jk.transpose()) * 0.5);
        }

        // Linear independence of the J's: rank of the stacked vectorizations.
        let stacked = DMatrix::from_fn(d2, d1 * d1, |r, c| j_clean[r][(c / d1, c % d1)]);
        let svd = stacked.svd(false, false);
        let smax = svd.singular_values.max();
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > 1e-10 * smax.max(1.0))
            .count();
        if rank != d2 {
            return Err(Error::LinearlyDependentJ { d2, rank });
        }

        if let Some(bs) = &blocks {
            let mut total_rank = 0usize;
            for (n, p) in bs.iter().enumerate() {
                if p.nrows() != d1 || p.ncols() != d1 {
                    return Err(Error::InvalidBlocks(format!(
                        "P_{} must be {d1}x{d1}",
                        n + 1
                    )));
                }
                if (p - p.transpose()).amax() > 1e-10 {
                    return Err(Error::InvalidBlocks(format!("P_{} is not symmetric", n + 1)));
                }
                if (p * p - p).amax() > 1e-10 {
                    return Err(Error::InvalidBlocks(format!("P_{} is not idempotent", n + 1)));
                }
                total_rank += p.trace().round() as usize;
                for (m, q) in bs.iter().enumerate().take(n) {
                    if (p * q).amax() > 1e-10 {
                        return Err(Error::InvalidBlocks(format!(
                            "P_{} and P_{} do not have orthogonal ranges",
                            m + 1,
                            n + 1
                        )));
                    }
                }
            }
            if total_rank > d1 {
                return Err(Error::InvalidBlocks(format!(
                    "block ranks sum to {total_rank} > d1 = {d1}"
                )));
            }
        }

        Ok(TwoStepGroup {
            name: name.into(),
            d1,
            d2,
            j: j_clean,
            blocks,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn d1(&self) -> usize {
        self.d1
    }
    pub fn d2(&self) -> usize {
        self.d2
    }
    /// Topological dimension d = d1 + d2.
    pub fn dim(&self) -> usize {
        self.d1 + self.d2
    }
    /// Homogeneous dimension Q = d1 + 2 d2.
    pub fn homogeneous_dim(&self) -> usize {
        self.d1 + 2 * self.d2
    }
    pub fn j(&self) -> &[DMatrix<f64>] {
        &self.j
    }
    pub fn blocks(&self) -> Option<&[DMatrix<f64>]> {
        self.blocks.as_deref()
    }

    pub fn identity(&self) -> GroupPoint {
        GroupPoint::new(DVector::zeros(self.d1), DVector::zeros(self.d2))
    }

    fn check_point(&self, p: &GroupPoint) -> Result<()> {
        if p.x.len() != self.d1 || p.u.len() != self.d2 {
            return Err(Error::DimensionMismatch(format!(
                "point has shape ({}, {}), group needs ({}, {})",
                p.x.len(),
                p.u.len(),
                self.d1,
                self.d2
            )));
        }
        Ok(())
    }

    /// Bracket [x, x'] in R^{d2}: component k equals (J_k x)^T x'.
    pub fn bracket(&self, x: &DVector<f64>, xp: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.d2, |k, _| (&self.j[k] * x).dot(xp))
    }

    /// Group law (x,u)(x',u') = (x + x', u + u' + (J x)^T x' / 2).
    pub fn multiply(&self, p: &GroupPoint, q: &GroupPoint) -> Result<GroupPoint> {
        self.check_point(p)?;
        self.check_point(q)?;
        let x = &p.x + &q.x;
        let u = &p.u + &q.u + self.bracket(&p.x, &q.x) * 0.5;
        Ok(GroupPoint::new(x, u))
    }

    /// Group inverse (x,u)^{-1} = (-x, -u).
    pub fn invert(&self, p: &GroupPoint) -> Result<GroupPoint> {
        self.check_point(p)?;
        Ok(GroupPoint::new(-&p.x, -&p.u))
    }

    /// q^{-1} p, expanded as (p.x - q.x, p.u - q.u - [q.x, p.x]/2).
    pub fn left_quotient(&self, q: &GroupPoint, p: &GroupPoint) -> Result<GroupPoint> {
        self.check_point(p)?;
        self.check_point(q)?;
        let x = &p.x - &q.x;
        let u = &p.u - &q.u - self.bracket(&q.x, &p.x) * 0.5;
        Ok(GroupPoint::new(x, u))
    }

    /// Anisotropic dilation delta_R(x, u) = (R x, R^2 u), R > 0.
    pub fn dilate(&self, p: &GroupPoint, r: f64) -> Result<GroupPoint> {
        self.check_point(p)?;
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dilation factor must be positive, got {r}"
            )));
        }
        Ok(GroupPoint::new(&p.x * r, &p.u * (r * r)))
    }
}

/// Homogeneous norm |x| + |u|^{1/2}.
pub fn homogeneous_norm(p: &GroupPoint) -> f64 {
    p.x.norm() + p.u.norm().sqrt()
}

/// Parses the group-spec JSON document and validates all invariants.
pub fn parse_group_spec(text: &str) -> Result<TwoStepGroup> {
    let raw: GroupSpecFile = serde_json::from_str(text)?;
    let j = raw
        .j
        .iter()
        .enumerate()
        .map(|(k, rows)| matrix_from_rows(rows, raw.d1, &format!("J_{}", k + 1)))
        .collect::<Result<Vec<_>>>()?;
    let blocks = match raw.blocks {
        Some(bs) => Some(
            bs.iter()
                .enumerate()
                .map(|(n, rows)| matrix_from_rows(rows, raw.d1, &format!("P_{}", n + 1)))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    TwoStepGroup::new(raw.name.unwrap_or_else(|| "custom".into()), raw.d1, raw.d2, j, blocks)
}

/// Built-in families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinFamily {
    /// Heisenberg group H_n: d1 = 2n, d2 = 1.
    Heisenberg(usize),
    /// N copies of N_{3,2} glued along their three-dimensional centers.
    N32Glued(usize),
    /// Heisenberg-Reiter group with N blocks of size d2 + 1.
    HeisenbergReiter(usize, usize),
}

impl BuiltinFamily {
    /// Parses designators like "heisenberg:2", "n32_glued:3",
    /// "heisenberg_reiter:1,2".
    pub fn parse(text: &str) -> Result<Self> {
        let (name, params) = text
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("builtin designator '{text}' needs name:params")))?;
        let nums: Vec<usize> = params
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad builtin parameter '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        match (name, nums.as_slice()) {
            ("heisenberg", [n]) => Ok(BuiltinFamily::Heisenberg(*n)),
            ("n32_glued", [n]) => Ok(BuiltinFamily::N32Glued(*n)),
            ("heisenberg_reiter", [n, d2]) => Ok(BuiltinFamily::HeisenbergReiter(*n, *d2)),
            _ => Err(Error::Parse(format!(
                "unknown builtin '{text}'; expected heisenberg:n, n32_glued:N, or heisenberg_reiter:N,d2"
            ))),
        }
    }
}

/// Constructs a built-in group with the canonical structure matrices and
/// block projections.
pub fn builtin_group(family: BuiltinFamily) -> Result<TwoStepGroup> {
    match family {
        BuiltinFamily::Heisenberg(n) => {
            if n == 0 {
                return Err(Error::InvalidParameter("heisenberg requires n >= 1".into()));
            }
            // Symplectic orientation: (J(x,y))^T (x',y') = x y' - y x', so
            // (e_1, 0)(e_2, 0) lands at height +1/2.
            let d1 = 2 * n;
            let mut j1 = DMatrix::zeros(d1, d1);
            for i in 0..n {
                j1[(i, n + i)] = -1.0;
                j1[(n + i, i)] = 1.0;
            }
            let blocks = vec![DMatrix::identity(d1, d1)];
            TwoStepGroup::new(format!("heisenberg({n})"), d1, 1, vec![j1], Some(blocks))
        }
        BuiltinFamily::N32Glued(n) => {
            if n == 0 {
                return Err(Error::InvalidParameter("n32_glued requires N >= 1".into()));
            }
            let d1 = 3 * n;
            // Per copy, J_mu is the cross-product matrix mu x (.), so
            // J_k = cross(e_k) on each 3x3 diagonal block.
            let cross = |k: usize| -> DMatrix<f64> {
                let mut m = DMatrix::zeros(3, 3);
                let (a, b) = match k {
                    0 => ((1usize, 2usize), -1.0),
                    1 => ((0, 2), 1.0),
                    _ => ((0, 1), -1.0),
                };
                m[(a.0, a.1)] = b;
                m[(a.1, a.0)] = -b;
                m
            };
            let mut js = Vec::new();
            for k in 0..3 {
                let mut jk = DMatrix::zeros(d1, d1);
                for c in 0..n {
                    jk.view_mut((3 * c, 3 * c), (3, 3)).copy_from(&cross(k));
                }
                js.push(jk);
            }
            let blocks = (0..n)
                .map(|c| {
                    let mut p = DMatrix::zeros(d1, d1);
                    for i in 0..3 {
                        p[(3 * c + i, 3 * c + i)] = 1.0;
                    }
                    p
                })
                .collect();
            TwoStepGroup::new(format!("n32_glued({n})"), d1, 3, js, Some(blocks))
        }
        BuiltinFamily::HeisenbergReiter(n, d2) => {
            if n == 0 || d2 == 0 {
                return Err(Error::InvalidParameter(
                    "heisenberg_reiter requires N >= 1 and d2 >= 1".into(),
                ));
            }
            // Block coordinates (x_1..x_d2, y); J_mu = [[0, mu], [-mu^T, 0]]
            // on each block.
            let bs = d2 + 1;
            let d1 = n * bs;
            let mut js = Vec::new();
            for k in 0..d2 {
                let mut jk = DMatrix::zeros(d1, d1);
                for b in 0..n {
                    let o = b * bs;
                    jk[(o + k, o + d2)] = 1.0;
                    jk[(o + d2, o + k)] = -1.0;
                }
                js.push(jk);
            }
            let blocks = (0..n)
                .map(|b| {
                    let mut p = DMatrix::zeros(d1, d1);
                    for i in 0..bs {
                        p[(b * bs + i, b * bs + i)] = 1.0;
                    }
                    p
                })
                .collect();
            TwoStepGroup::new(
                format!("heisenberg_reiter({n},{d2})"),
                d1,
                d2,
                js,
                Some(blocks),
            )
        }
    }
}
