//! Halfspace-representation polytopes and the set algebra used for constraint
//! tightening and invariant-set synthesis.
//!
//! All sets live in H-representation {x : Ax ≤ b}. Canonical form means unit
//! normals, no zero rows, and no redundant rows. Vertex enumeration (needed
//! for Minkowski sums and general affine images) is implemented for dimension
//! 1 and 2 only — everything in this crate that needs vertices is planar.

use crate::qp::{self, FeasibilityResult, SolverTolerances, SupportOutcome};
use crate::spectral_radius;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for support-function comparisons (subset tests,
/// redundancy removal). Sits above the LP tolerance and below set geometry.
const GEOM_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum PolytopeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operand is unbounded along a required direction")]
    UnboundedOperand,
    #[error("affine map matrix is singular; use the bounded-operand path")]
    SingularMap,
    #[error("spectral radius of the given matrix is {0:.6}, not strictly < 1")]
    UnstablePhi(f64),
    #[error("iteration limit reached in {0}")]
    IterationLimit(&'static str),
    #[error("result is empty: {0}")]
    EmptyResult(String),
    #[error("vertex enumeration only implemented for dimension ≤ 2 (got {0})")]
    VertexEnumerationUnavailable(usize),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl From<qp::QpError> for PolytopeError {
    fn from(e: qp::QpError) -> Self {
        PolytopeError::Solver(e.to_string())
    }
}

/// Convex polyhedron {x : Ax ≤ b}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Polytope {
    #[serde(with = "crate::config::matrix_serde", rename = "A")]
    pub a: DMatrix<f64>,
    #[serde(with = "crate::config::vector_serde")]
    pub b: DVector<f64>,
    #[serde(skip)]
    pub canonical: bool,
    #[serde(skip)]
    pub bounded: Option<bool>,
    #[serde(skip)]
    pub empty: Option<bool>,
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, PolytopeError> {
        if a.nrows() != b.len() {
            return Err(PolytopeError::DimensionMismatch(format!(
                "A has {} rows, b has length {}",
                a.nrows(),
                b.len()
            )));
        }
        Ok(Self { a, b, canonical: false, bounded: None, empty: None })
    }

    /// Axis-aligned box {‖x‖∞ ≤ r}.
    pub fn inf_ball(dim: usize, r: f64) -> Self {
        let mut a = DMatrix::<f64>::zeros(2 * dim, dim);
        let mut b = DVector::<f64>::zeros(2 * dim);
        for i in 0..dim {
            a[(2 * i, i)] = 1.0;
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i] = r;
            b[2 * i + 1] = r;
        }
        Self { a, b, canonical: r > 0.0, bounded: Some(true), empty: Some(false) }
    }

    /// The singleton {0}, represented as a degenerate box.
    pub fn origin(dim: usize) -> Self {
        Self::inf_ball(dim, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    fn tol() -> SolverTolerances {
        SolverTolerances::default()
    }

    pub fn contains(&self, x: &DVector<f64>) -> Result<bool, PolytopeError> {
        if x.len() != self.dim() {
            return Err(PolytopeError::DimensionMismatch(format!(
                "point has length {}, set has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let r = &self.a * x - &self.b;
        Ok(r.iter().all(|v| *v <= Self::tol().feas_tol))
    }

    /// Support function h(c) = max cᵀx over the set.
    pub fn support(&self, c: &DVector<f64>) -> Result<SupportOutcome, PolytopeError> {
        Ok(qp::support(&self.a, &self.b, c, Self::tol())?)
    }

    /// Support value h(c), erroring on empty or unbounded sets.
    pub fn support_value(&self, c: &DVector<f64>) -> Result<f64, PolytopeError> {
        match self.support(c)? {
            SupportOutcome::Finite(v, _) => Ok(v),
            SupportOutcome::Unbounded => Err(PolytopeError::UnboundedOperand),
            SupportOutcome::Infeasible => {
                Err(PolytopeError::EmptyResult("support of an empty set".into()))
            }
        }
    }

    pub fn is_empty(&self) -> Result<bool, PolytopeError> {
        if let Some(e) = self.empty {
            return Ok(e);
        }
        Ok(matches!(
            qp::solve_lp_feasibility(&self.a, &self.b, Self::tol())?,
            FeasibilityResult::Infeasible
        ))
    }

    /// Finite support along ± every coordinate axis.
    pub fn is_bounded(&self) -> Result<bool, PolytopeError> {
        if let Some(bd) = self.bounded {
            return Ok(bd);
        }
        let n = self.dim();
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut c = DVector::<f64>::zeros(n);
                c[i] = sign;
                if matches!(self.support(&c)?, SupportOutcome::Unbounded) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// subset test via support functions: for every row of `q`,
    /// h_self(a_i) ≤ b_i + tol.
    pub fn subset_of(&self, q: &Polytope) -> Result<bool, PolytopeError> {
        if self.dim() != q.dim() {
            return Err(PolytopeError::DimensionMismatch(format!(
                "dimensions {} vs {}",
                self.dim(),
                q.dim()
            )));
        }
        if self.is_empty()? {
            return Ok(true);
        }
        for i in 0..q.num_rows() {
            let c = q.a.row(i).transpose();
            match self.support(&c)? {
                SupportOutcome::Finite(v, _) => {
                    if v > q.b[i] + GEOM_TOL {
                        return Ok(false);
                    }
                }
                SupportOutcome::Unbounded => return Ok(false),
                SupportOutcome::Infeasible => return Ok(true),
            }
        }
        Ok(true)
    }

    /// Canonical form: unit-norm rows, zero rows resolved, duplicates merged,
    /// redundant rows removed (checked by support LP). An empty set is
    /// returned as a fixed two-row contradiction with the `empty` flag set.
    pub fn canonicalize(&self) -> Result<Polytope, PolytopeError> {
        let n = self.dim();
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
        for i in 0..self.num_rows() {
            let a = self.a.row(i).transpose();
            let norm = a.norm();
            if norm < 1e-12 {
                if self.b[i] < -1e-12 {
                    return Ok(Self::canonical_empty(n));
                }
                continue; // 0·x ≤ b with b ≥ 0 is vacuous
            }
            rows.push((a / norm, self.b[i] / norm));
        }
        // Merge duplicate normals, keeping the tightest offset.
        let mut merged: Vec<(DVector<f64>, f64)> = Vec::new();
        'outer: for (a, b) in rows {
            for (am, bm) in merged.iter_mut() {
                if (&a - &*am).amax() < 1e-12 {
                    *bm = bm.min(b);
                    continue 'outer;
                }
            }
            merged.push((a, b));
        }
        let mut p = Self::from_rows(n, &merged);
        if p.is_empty()? {
            return Ok(Self::canonical_empty(n));
        }
        // Sequential redundancy removal: a row is redundant iff maximizing its
        // normal over the remaining rows stays within its offset.
        let mut i = 0;
        while i < merged.len() {
            if merged.len() == 1 {
                break;
            }
            let mut rest = merged.clone();
            let (a_i, b_i) = rest.remove(i);
            let rest_p = Self::from_rows(n, &rest);
            let redundant = match rest_p.support(&a_i)? {
                SupportOutcome::Finite(v, _) => v <= b_i + 1e-9,
                SupportOutcome::Unbounded => false,
                SupportOutcome::Infeasible => true,
            };
            if redundant {
                merged.remove(i);
            } else {
                i += 1;
            }
        }
        p = Self::from_rows(n, &merged);
        p.canonical = true;
        p.empty = Some(false);
        p.bounded = self.bounded; // canonicalization does not change the set
        Ok(p)
    }

    fn from_rows(n: usize, rows: &[(DVector<f64>, f64)]) -> Polytope {
        let mut a = DMatrix::<f64>::zeros(rows.len(), n);
        let mut b = DVector::<f64>::zeros(rows.len());
        for (i, (ai, bi)) in rows.iter().enumerate() {
            a.row_mut(i).copy_from(&ai.transpose());
            b[i] = *bi;
        }
        Polytope { a, b, canonical: false, bounded: None, empty: None }
    }

    fn canonical_empty(n: usize) -> Polytope {
        // x₁ ≤ −1 together with −x₁ ≤ −1 (i.e. x₁ ≥ 1): unsatisfiable.
        let mut a = DMatrix::<f64>::zeros(2, n);
        a[(0, 0)] = 1.0;
        a[(1, 0)] = -1.0;
        let b = DVector::from_row_slice(&[-1.0, -1.0]);
        Polytope { a, b, canonical: true, bounded: None, empty: Some(true) }
    }

    /// Vertices in counterclockwise order (dimension 1 or 2 only).
    pub fn vertices(&self) -> Result<Vec<DVector<f64>>, PolytopeError> {
        match self.dim() {
            1 => {
                let hi = self.support_value(&DVector::from_row_slice(&[1.0]))?;
                let lo = -self.support_value(&DVector::from_row_slice(&[-1.0]))?;
                if lo > hi + GEOM_TOL {
                    return Ok(vec![]);
                }
                if (hi - lo).abs() < 1e-12 {
                    return Ok(vec![DVector::from_row_slice(&[lo])]);
                }
                Ok(vec![DVector::from_row_slice(&[lo]), DVector::from_row_slice(&[hi])])
            }
            2 => self.vertices_2d(),
            d => Err(PolytopeError::VertexEnumerationUnavailable(d)),
        }
    }

    /// Vertices of a canonical bounded polygon by intersecting facets that are
    /// adjacent in normal-angle order. This is exact for an irredundant H-rep,
    /// unlike feasibility-filtered pairwise intersections, which on polygons
    /// with fans of nearly parallel facets admit points far outside the set
    /// (a point can slide a long way along a near-straight boundary while
    /// violating every row by less than any fixed tolerance).
    fn vertices_2d(&self) -> Result<Vec<DVector<f64>>, PolytopeError> {
        if !self.canonical {
            return self.canonicalize()?.vertices_2d();
        }
        if self.is_empty()? {
            return Ok(vec![]);
        }
        if !self.is_bounded()? {
            return Err(PolytopeError::UnboundedOperand);
        }
        let m = self.num_rows();
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&i, &j| {
            let ai = self.a[(i, 1)].atan2(self.a[(i, 0)]);
            let aj = self.a[(j, 1)].atan2(self.a[(j, 0)]);
            ai.partial_cmp(&aj).unwrap()
        });
        let mut pts: Vec<DVector<f64>> = Vec::with_capacity(m);
        for k in 0..m {
            let i = idx[k];
            let j = idx[(k + 1) % m];
            let det = self.a[(i, 0)] * self.a[(j, 1)] - self.a[(i, 1)] * self.a[(j, 0)];
            if det.abs() < 1e-13 {
                continue; // effectively the same facet direction
            }
            let x = (self.b[i] * self.a[(j, 1)] - self.a[(i, 1)] * self.b[j]) / det;
            let y = (self.a[(i, 0)] * self.b[j] - self.b[i] * self.a[(j, 0)]) / det;
            pts.push(DVector::from_row_slice(&[x, y]));
        }
        // Drop consecutive duplicates (zero-length edges), including wraparound.
        let scale = pts.iter().map(|p| p.amax()).fold(1.0, f64::max);
        let mut out: Vec<DVector<f64>> = Vec::with_capacity(pts.len());
        for v in pts {
            if !out.last().is_some_and(|p| (p - &v).amax() < 1e-9 * scale) {
                out.push(v);
            }
        }
        if out.len() > 1 && (&out[0] - out.last().unwrap()).amax() < 1e-9 * scale {
            out.pop();
        }
        Ok(out)
    }
}

/// Convex hull vertices of 2D points (monotone chain), counterclockwise.
/// Collinear and duplicate points are pruned.
fn hull_points_2d(points: &[DVector<f64>]) -> Vec<(f64, f64)> {
    assert!(!points.is_empty(), "hull of an empty point set");
    // Snap the cloud to a power-of-two grid of relative pitch ~1e-9 and run
    // the monotone chain with exact integer cross products. Orientation
    // decisions are then exact — no floating-point epsilon can discard an
    // extreme point or keep a concave corner — at the cost of perturbing
    // each coordinate by at most half a pitch (~5e-10 relative), which is
    // below the feasibility tolerances used everywhere else.
    let scale = points.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let pitch = (1e-9 * scale).log2().ceil().exp2();
    let mut pts: Vec<(i64, i64)> = points
        .iter()
        .map(|p| ((p[0] / pitch).round() as i64, (p[1] / pitch).round() as i64))
        .collect();
    pts.sort_unstable();
    pts.dedup();
    let unsnap = |p: &(i64, i64)| (p.0 as f64 * pitch, p.1 as f64 * pitch);
    if pts.len() == 1 {
        return vec![unsnap(&pts[0])]; // single point: both chains would pop it away
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| -> i128 {
        (a.0 - o.0) as i128 * (b.1 - o.1) as i128 - (a.1 - o.1) as i128 * (b.0 - o.0) as i128
    };
    let chain = |seq: &mut dyn Iterator<Item = (i64, i64)>| -> Vec<(i64, i64)> {
        let mut out: Vec<(i64, i64)> = Vec::new();
        for p in seq {
            while out.len() >= 2 && cross(out[out.len() - 2], out[out.len() - 1], p) <= 0 {
                out.pop();
            }
            out.push(p);
        }
        out
    };
    let mut lower = chain(&mut pts.iter().copied());
    let mut upper = chain(&mut pts.iter().rev().copied());
    lower.pop();
    upper.pop();
    lower.iter().chain(upper.iter()).map(|p| unsnap(p)).collect()
}

/// Convex hull of 2D points → H-representation (handles the degenerate point
/// and segment cases with explicit equality-like row pairs).
fn hull_to_hrep_2d(points: &[DVector<f64>]) -> Result<Polytope, PolytopeError> {
    let hull = hull_points_2d(points);

    let rows_for_pair = |p: (f64, f64), q: (f64, f64)| -> Vec<(DVector<f64>, f64)> {
        // Outward normal for ccw edge p→q is (dy, −dx).
        let (dx, dy) = (q.0 - p.0, q.1 - p.1);
        let norm = (dx * dx + dy * dy).sqrt();
        let n = DVector::from_row_slice(&[dy / norm, -dx / norm]);
        let b = n[0] * p.0 + n[1] * p.1;
        vec![(n, b)]
    };

    let rows: Vec<(DVector<f64>, f64)> = match hull.len() {
        0 => unreachable!(),
        1 => {
            let (x, y) = hull[0];
            vec![
                (DVector::from_row_slice(&[1.0, 0.0]), x),
                (DVector::from_row_slice(&[-1.0, 0.0]), -x),
                (DVector::from_row_slice(&[0.0, 1.0]), y),
                (DVector::from_row_slice(&[0.0, -1.0]), -y),
            ]
        }
        2 => {
            // Segment: two facets along the direction, two across.
            let (p, q) = (hull[0], hull[1]);
            let mut r = rows_for_pair(p, q);
            r.extend(rows_for_pair(q, p));
            let (dx, dy) = (q.0 - p.0, q.1 - p.1);
            let norm = (dx * dx + dy * dy).sqrt();
            let d = DVector::from_row_slice(&[dx / norm, dy / norm]);
            let hi = (d[0] * q.0 + d[1] * q.1).max(d[0] * p.0 + d[1] * p.1);
            let lo = (d[0] * q.0 + d[1] * q.1).min(d[0] * p.0 + d[1] * p.1);
            r.push((d.clone(), hi));
            r.push((-d, -lo));
            r
        }
        _ => {
            let mut r = Vec::with_capacity(hull.len());
            for i in 0..hull.len() {
                r.extend(rows_for_pair(hull[i], hull[(i + 1) % hull.len()]));
            }
            r
        }
    };
    let mut p = Polytope::from_rows(2, &rows);
    p.bounded = Some(true); // hull of finitely many points
    p.canonicalize()
}

fn check_same_dim(p: &Polytope, q: &Polytope) -> Result<(), PolytopeError> {
    if p.dim() != q.dim() {
        return Err(PolytopeError::DimensionMismatch(format!(
            "dimensions {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    Ok(())
}

/// p ⊕ q = {x + y : x ∈ p, y ∈ q}, both bounded, via vertex enumeration
/// (dimension ≤ 2) and convex hull.
pub fn minkowski_sum(p: &Polytope, q: &Polytope) -> Result<Polytope, PolytopeError> {
    check_same_dim(p, q)?;
    if !p.is_bounded()? || !q.is_bounded()? {
        return Err(PolytopeError::UnboundedOperand);
    }
    match p.dim() {
        1 => {
            let e = DVector::from_row_slice(&[1.0]);
            let hi = p.support_value(&e)? + q.support_value(&e)?;
            let lo = p.support_value(&(-&e))? + q.support_value(&(-&e))?;
            let rows =
                vec![(e.clone(), hi), (-e, lo)];
            let mut iv = Polytope::from_rows(1, &rows);
            iv.bounded = Some(true);
            iv.canonicalize()
        }
        2 => {
            let vp = p.vertices()?;
            let vq = q.vertices()?;
            if vp.is_empty() || vq.is_empty() {
                return Err(PolytopeError::EmptyResult("Minkowski sum of an empty set".into()));
            }
            let mut sums = Vec::with_capacity(vp.len() * vq.len());
            for a in &vp {
                for b in &vq {
                    sums.push(a + b);
                }
            }
            hull_to_hrep_2d(&sums)
        }
        d => Err(PolytopeError::VertexEnumerationUnavailable(d)),
    }
}

/// p ⊖ q = {x : {x} ⊕ q ⊆ p}: each facet offset of p retreats by the support
/// of q along its normal. May be empty.
pub fn pontryagin_diff(p: &Polytope, q: &Polytope) -> Result<Polytope, PolytopeError> {
    check_same_dim(p, q)?;
    let mut b = p.b.clone();
    for i in 0..p.num_rows() {
        let c = p.a.row(i).transpose();
        b[i] -= q.support_value(&c)?;
    }
    Polytope { a: p.a.clone(), b, canonical: false, bounded: None, empty: None }.canonicalize()
}

/// Image {Mx : x ∈ p}. Invertible square M uses the exact halfspace
/// transformation A·M⁻¹; otherwise p must be bounded and low-dimensional
/// (vertex image + hull).
pub fn affine_map(p: &Polytope, m: &DMatrix<f64>) -> Result<Polytope, PolytopeError> {
    if m.ncols() != p.dim() {
        return Err(PolytopeError::DimensionMismatch(format!(
            "map has {} columns, set has dimension {}",
            m.ncols(),
            p.dim()
        )));
    }
    // Prefer the vertex path for bounded planar sets: mapping vertices and
    // re-hulling is numerically robust even for near-singular M, where the
    // halfspace transform A·M⁻¹ produces badly conditioned sliver rows.
    let vertex_path = p.dim() <= 2 && p.is_bounded()?;
    if !vertex_path {
        if m.nrows() == m.ncols() {
            let svd = m.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if smin <= 1e-8 * smax.max(1.0) {
                return Err(PolytopeError::SingularMap);
            }
            let m_inv = m.clone().try_inverse().ok_or(PolytopeError::SingularMap)?;
            let a = &p.a * m_inv;
            return Polytope {
                a,
                b: p.b.clone(),
                canonical: false,
                bounded: p.bounded, // invertible maps preserve boundedness
                empty: p.empty,
            }
            .canonicalize();
        }
        return Err(PolytopeError::UnboundedOperand);
    }
    let verts = p.vertices()?;
    if verts.is_empty() {
        return Err(PolytopeError::EmptyResult("affine map of an empty set".into()));
    }
    let images: Vec<DVector<f64>> = verts.iter().map(|v| m * v).collect();
    match m.nrows() {
        1 => {
            let hi = images.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            let lo = images.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let rows = vec![
                (DVector::from_row_slice(&[1.0]), hi),
                (DVector::from_row_slice(&[-1.0]), -lo),
            ];
            let mut iv = Polytope::from_rows(1, &rows);
            iv.bounded = Some(true);
            iv.canonicalize()
        }
        2 => hull_to_hrep_2d(&images),
        d => Err(PolytopeError::VertexEnumerationUnavailable(d)),
    }
}

/// p ∩ q: stacked rows, canonicalized.
pub fn intersect(p: &Polytope, q: &Polytope) -> Result<Polytope, PolytopeError> {
    check_same_dim(p, q)?;
    let m = p.num_rows() + q.num_rows();
    let mut a = DMatrix::<f64>::zeros(m, p.dim());
    a.view_mut((0, 0), (p.num_rows(), p.dim())).copy_from(&p.a);
    a.view_mut((p.num_rows(), 0), (q.num_rows(), p.dim())).copy_from(&q.a);
    let mut b = DVector::<f64>::zeros(m);
    b.rows_mut(0, p.num_rows()).copy_from(&p.b);
    b.rows_mut(p.num_rows(), q.num_rows()).copy_from(&q.b);
    Polytope { a, b, canonical: false, bounded: None, empty: None }.canonicalize()
}

/// Scales offsets: c·p for c > 0 (valid for canonical sets containing 0 this
/// is {cx : x ∈ p}; in general it scales each halfspace offset).
pub fn scale(p: &Polytope, c: f64) -> Polytope {
    Polytope {
        a: p.a.clone(),
        b: &p.b * c,
        canonical: false,
        bounded: p.bounded,
        empty: p.empty,
    }
}

/// Outer approximation of the minimal robust positively invariant set of
/// e⁺ = Φe + w, w ∈ W: find the smallest s with Φˢ W ⊆ α·W for
/// α ≤ eps/(eps + radius(F_s)), where F_s = ⊕_{i<s} Φⁱ W, and return
/// F_s / (1 − α). The result Z satisfies Φ Z ⊕ W ⊆ Z.
pub fn mrpi_outer(phi: &DMatrix<f64>, w: &Polytope, eps: f64) -> Result<Polytope, PolytopeError> {
    let n = w.dim();
    if phi.nrows() != n || phi.ncols() != n {
        return Err(PolytopeError::DimensionMismatch(format!(
            "Φ is {}x{}, W has dimension {n}",
            phi.nrows(),
            phi.ncols()
        )));
    }
    let rho = spectral_radius(phi);
    if rho >= 1.0 - 1e-9 {
        return Err(PolytopeError::UnstablePhi(rho));
    }
    let w = if w.canonical { w.clone() } else { w.canonicalize()? };
    if !w.is_bounded()? {
        return Err(PolytopeError::UnboundedOperand);
    }
    let zero = DVector::<f64>::zeros(n);
    if !w.contains(&zero)? {
        return Err(PolytopeError::EmptyResult("W must contain the origin".into()));
    }
    // Degenerate W = {0}: the error never leaves the origin.
    if w.b.amax() < 1e-12 {
        return Ok(Polytope::origin(n));
    }
    // Work in vertex arithmetic throughout: Φˢ is close to rank-deficient for
    // moderate s, so the halfspace form of ΦˢW is a badly conditioned sliver,
    // while its vertex image stays perfectly tame. F_s is accumulated as a
    // hull-pruned vertex cloud (F_s = ⊕_{i<s} ΦⁱW is a zonotope-like sum) and
    // converted to H-form only once, at acceptance.
    let w_verts = w.vertices()?;
    let mut phi_pow = DMatrix::<f64>::identity(n, n); // Φ^s
    let mut f_verts: Vec<DVector<f64>> = w_verts.clone();
    // Exact support of W from its vertices.
    let h_w = |c: &DVector<f64>| -> f64 {
        w_verts.iter().map(|v| c.dot(v)).fold(f64::NEG_INFINITY, f64::max)
    };
    for _s in 1..=200 {
        phi_pow = phi * &phi_pow;
        // α(s) = max_i h_W((Φˢ)ᵀ aᵢ) / bᵢ over the rows of canonical W.
        let mut alpha: f64 = 0.0;
        for i in 0..w.num_rows() {
            let c = phi_pow.transpose() * w.a.row(i).transpose();
            alpha = alpha.max(h_w(&c) / w.b[i]);
        }
        let radius = f_verts.iter().map(|v| v.amax()).fold(0.0, f64::max);
        if alpha <= eps / (eps + radius) {
            let f_s = match n {
                1 => {
                    let hi = f_verts.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
                    let lo = f_verts.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
                    let rows = vec![
                        (DVector::from_row_slice(&[1.0]), hi),
                        (DVector::from_row_slice(&[-1.0]), -lo),
                    ];
                    {
                        let mut iv = Polytope::from_rows(1, &rows);
                        iv.bounded = Some(true);
                        iv.canonicalize()?
                    }
                }
                _ => hull_to_hrep_2d(&f_verts)?,
            };
            return scale(&f_s, 1.0 / (1.0 - alpha)).canonicalize();
        }
        // F_{s+1} = F_s ⊕ ΦˢW, vertex cloud pruned by hull.
        let mut sums: Vec<DVector<f64>> = Vec::with_capacity(f_verts.len() * w_verts.len());
        for v in &f_verts {
            for wv in &w_verts {
                sums.push(v + &phi_pow * wv);
            }
        }
        f_verts = match n {
            1 => {
                let hi = sums.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
                let lo = sums.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
                vec![DVector::from_row_slice(&[lo]), DVector::from_row_slice(&[hi])]
            }
            _ => hull_points_2d(&sums)
                .into_iter()
                .map(|(x, y)| DVector::from_row_slice(&[x, y]))
                .collect(),
        };
    }
    Err(PolytopeError::IterationLimit("mrpi_outer"))
}

/// Maximal positively invariant set of x⁺ = Φx inside X_c:
/// Ω_{k+1} = Ω_k ∩ {x : Φx ∈ Ω_k}, stopping at a fixed point.
///
/// Implemented incrementally: at each pass only the rows added in the
/// previous pass spawn new candidate rows (aᵀΦ x ≤ b), and a candidate is
/// appended only if it is not already implied; the final set is canonicalized
/// once at the end.
pub fn max_invariant_set(phi: &DMatrix<f64>, x_c: &Polytope) -> Result<Polytope, PolytopeError> {
    let n = x_c.dim();
    if phi.nrows() != n || phi.ncols() != n {
        return Err(PolytopeError::DimensionMismatch(format!(
            "Φ is {}x{}, X_c has dimension {n}",
            phi.nrows(),
            phi.ncols()
        )));
    }
    let rho = spectral_radius(phi);
    if rho >= 1.0 - 1e-9 {
        return Err(PolytopeError::UnstablePhi(rho));
    }
    let base = x_c.canonicalize()?;
    if base.is_empty()? {
        return Err(PolytopeError::EmptyResult("constraint set is empty".into()));
    }
    // Origin must be interior: every canonical offset strictly positive.
    if base.b.iter().any(|v| *v <= 1e-9) {
        return Err(PolytopeError::EmptyResult(
            "origin is not in the interior of the constraint set".into(),
        ));
    }
    let mut rows: Vec<(DVector<f64>, f64)> = (0..base.num_rows())
        .map(|i| (base.a.row(i).transpose(), base.b[i]))
        .collect();
    let mut fresh: Vec<usize> = (0..rows.len()).collect();
    for _iter in 0..500 {
        if fresh.is_empty() {
            let p = Polytope::from_rows(n, &rows).canonicalize()?;
            return Ok(p);
        }
        let current = Polytope::from_rows(n, &rows);
        let mut added: Vec<usize> = Vec::new();
        for &i in &fresh {
            let (a_i, b_i) = (rows[i].0.clone(), rows[i].1);
            let cand = phi.transpose() * &a_i;
            let norm = cand.norm();
            if norm < 1e-12 {
                continue;
            }
            let cand_n = &cand / norm;
            let cand_b = b_i / norm;
            // Already implied by the current row set?
            let implied = match current.support(&cand_n)? {
                SupportOutcome::Finite(v, _) => v <= cand_b + 1e-9,
                SupportOutcome::Unbounded => false,
                SupportOutcome::Infeasible => true,
            };
            if !implied {
                rows.push((cand_n, cand_b));
                added.push(rows.len() - 1);
            }
        }
        fresh = added;
    }
    Err(PolytopeError::IterationLimit("max_invariant_set"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows.len(), rows[0].len(), &rows.concat())
    }

    fn vec2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_row_slice(&[x, y])
    }

    /// Max deviation between two sets measured by support along ± axes and
    /// diagonals (cheap equality check for canonical bounded 2D sets).
    fn support_gap(p: &Polytope, q: &Polytope) -> f64 {
        let dirs = [
            vec2(1.0, 0.0),
            vec2(-1.0, 0.0),
            vec2(0.0, 1.0),
            vec2(0.0, -1.0),
            vec2(1.0, 1.0),
            vec2(-1.0, 1.0),
            vec2(1.0, -1.0),
            vec2(-1.0, -1.0),
        ];
        dirs.iter()
            .map(|d| {
                let hp = match p.support(d).unwrap() {
                    SupportOutcome::Finite(v, _) => v,
                    _ => f64::NAN,
                };
                let hq = match q.support(d).unwrap() {
                    SupportOutcome::Finite(v, _) => v,
                    _ => f64::NAN,
                };
                (hp - hq).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn dominated_halfspace_removed() {
        let p = Polytope::new(mat(&[&[1.0], &[1.0]]), DVector::from_row_slice(&[1.0, 2.0])).unwrap();
        let c = p.canonicalize().unwrap();
        assert_eq!(c.num_rows(), 1);
        assert_abs_diff_eq!(c.b[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn duplicate_facet_removed() {
        let mut a = Polytope::inf_ball(2, 1.0);
        // Duplicate the first facet.
        let mut rows = a.a.clone().insert_rows(4, 1, 0.0);
        rows[(4, 0)] = 1.0;
        a.a = rows;
        a.b = a.b.clone().insert_rows(4, 1, 1.0);
        let c = a.canonicalize().unwrap();
        assert_eq!(c.num_rows(), 4);
    }

    #[test]
    fn empty_set_detected() {
        let p = Polytope::new(mat(&[&[1.0], &[-1.0]]), DVector::from_row_slice(&[-1.0, -2.0]))
            .unwrap();
        let c = p.canonicalize().unwrap();
        assert_eq!(c.empty, Some(true));
        assert!(c.is_empty().unwrap());
        assert!(!c.contains(&DVector::from_row_slice(&[0.0])).unwrap());
    }

    #[test]
    fn canonicalize_idempotent() {
        let p = Polytope::new(
            mat(&[&[1.0, 0.2], &[-0.3, 1.0], &[0.0, -1.0], &[2.0, 0.4], &[-1.0, -1.0]]),
            DVector::from_row_slice(&[1.0, 1.5, 1.0, 2.0, 2.0]),
        )
        .unwrap();
        let c1 = p.canonicalize().unwrap();
        let c2 = c1.canonicalize().unwrap();
        assert_eq!(c1.num_rows(), c2.num_rows());
        assert!((&c1.a - &c2.a).amax() < 1e-12);
        assert!((&c1.b - &c2.b).amax() < 1e-12);
    }

    #[test]
    fn box_sum_adds_radii() {
        let p = Polytope::inf_ball(2, 1.0);
        let q = Polytope::inf_ball(2, 0.07);
        let s = minkowski_sum(&p, &q).unwrap();
        let expect = Polytope::inf_ball(2, 1.07);
        assert!(support_gap(&s, &expect) < 1e-9);
    }

    #[test]
    fn sum_with_origin_is_identity() {
        let p = Polytope::new(
            mat(&[&[1.0, 0.3], &[-1.0, 0.2], &[0.1, 1.0], &[0.0, -1.0]]),
            DVector::from_row_slice(&[1.0, 1.0, 1.0, 1.0]),
        )
        .unwrap()
        .canonicalize()
        .unwrap();
        let s = minkowski_sum(&p, &Polytope::origin(2)).unwrap();
        assert!(support_gap(&s, &p) < 1e-9);
    }

    #[test]
    fn box_difference_subtracts_radii() {
        let p = Polytope::inf_ball(2, 1.0);
        let q = Polytope::inf_ball(2, 0.07);
        let d = pontryagin_diff(&p, &q).unwrap();
        let expect = Polytope::inf_ball(2, 0.93);
        assert!(support_gap(&d, &expect) < 1e-9);
    }

    #[test]
    fn difference_with_origin_is_identity() {
        let p = Polytope::inf_ball(2, 0.5);
        let d = pontryagin_diff(&p, &Polytope::origin(2)).unwrap();
        assert!(support_gap(&d, &p) < 1e-9);
    }

    #[test]
    fn affine_identity_and_scaling() {
        let p = Polytope::inf_ball(2, 1.0);
        let id = affine_map(&p, &DMatrix::identity(2, 2)).unwrap();
        assert!(support_gap(&id, &p) < 1e-9);
        let sc = affine_map(&p, &(DMatrix::identity(2, 2) * 2.0)).unwrap();
        assert!(support_gap(&sc, &Polytope::inf_ball(2, 2.0)) < 1e-9);
    }

    #[test]
    fn affine_map_to_interval() {
        // K = [-0.29, 0.49] maps the unit box to [-0.78, 0.78].
        let p = Polytope::inf_ball(2, 1.0);
        let k = mat(&[&[-0.29, 0.49]]);
        let img = affine_map(&p, &k).unwrap();
        assert_eq!(img.dim(), 1);
        let hi = match img.support(&DVector::from_row_slice(&[1.0])).unwrap() {
            SupportOutcome::Finite(v, _) => v,
            _ => panic!(),
        };
        assert_abs_diff_eq!(hi, 0.78, epsilon = 1e-9);
    }

    #[test]
    fn intersection_idempotent_and_nested() {
        let p = Polytope::inf_ball(2, 1.0);
        let q = Polytope::inf_ball(2, 0.5);
        let pp = intersect(&p, &p).unwrap();
        assert!(support_gap(&pp, &p) < 1e-9);
        let pq = intersect(&p, &q).unwrap();
        assert!(support_gap(&pq, &q) < 1e-9);
    }

    #[test]
    fn subset_and_membership() {
        let p = Polytope::inf_ball(2, 0.5);
        let q = Polytope::inf_ball(2, 1.0);
        assert!(p.subset_of(&q).unwrap());
        assert!(!q.subset_of(&p).unwrap());
        assert!(q.contains(&DVector::zeros(2)).unwrap());
    }

    #[test]
    fn vertices_of_unit_box() {
        let p = Polytope::inf_ball(2, 1.0);
        let v = p.vertices().unwrap();
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn mrpi_deadbeat_returns_w() {
        let w = Polytope::inf_ball(2, 0.07);
        let z = mrpi_outer(&DMatrix::zeros(2, 2), &w, 1e-3).unwrap();
        assert!(support_gap(&z, &w) < 1e-6);
    }

    #[test]
    fn mrpi_geometric_series() {
        // Φ = 0.5 I on box(±1): true minimal RPI set is box(±2).
        let w = Polytope::inf_ball(2, 1.0);
        let eps = 1e-3;
        let z = mrpi_outer(&(DMatrix::identity(2, 2) * 0.5), &w, eps).unwrap();
        let lower = Polytope::inf_ball(2, 2.0);
        assert!(lower.subset_of(&z).unwrap());
        assert!(z.subset_of(&Polytope::inf_ball(2, 2.0 + eps + 1e-6)).unwrap());
    }

    #[test]
    fn mrpi_is_robustly_invariant_for_the_closed_loop() {
        // Φ = A + BK for the benchmark system.
        let a = mat(&[&[1.0, 0.0075], &[-0.143, 0.996]]);
        let b = mat(&[&[4.798], &[0.115]]);
        let k = mat(&[&[-0.29, 0.49]]);
        let phi = &a + &b * &k;
        let w = Polytope::inf_ball(2, 0.07);
        let z = mrpi_outer(&phi, &w, 0.6).unwrap();
        let phi_z = affine_map(&z, &phi).unwrap();
        let lhs = minkowski_sum(&phi_z, &w).unwrap();
        assert!(lhs.subset_of(&z).unwrap());
    }

    #[test]
    fn mrpi_scalar_system_closed_form() {
        // x⁺ = 0.5x + w, |w| ≤ 0.1: minimal RPI set is [−0.2, 0.2].
        let phi = DMatrix::from_row_slice(1, 1, &[0.5]);
        let w = Polytope::new(mat(&[&[1.0], &[-1.0]]), DVector::from_row_slice(&[0.1, 0.1]))
            .unwrap();
        let z = mrpi_outer(&phi, &w, 1e-3).unwrap();
        let hi = match z.support(&DVector::from_row_slice(&[1.0])).unwrap() {
            SupportOutcome::Finite(v, _) => v,
            _ => panic!(),
        };
        assert!(hi >= 0.2 - 1e-9 && hi <= 0.2 * (1.0 + 1e-2));
    }

    #[test]
    fn invariant_set_deadbeat_is_constraint_set() {
        let xc = Polytope::inf_ball(2, 1.0);
        let om = max_invariant_set(&DMatrix::zeros(2, 2), &xc).unwrap();
        let dirs_ok = om.subset_of(&xc).unwrap() && xc.subset_of(&om).unwrap();
        assert!(dirs_ok);
    }

    #[test]
    fn invariant_set_contraction_keeps_box() {
        let xc = Polytope::inf_ball(2, 1.0);
        let om = max_invariant_set(&(DMatrix::identity(2, 2) * 0.9), &xc).unwrap();
        assert!(om.subset_of(&xc).unwrap() && xc.subset_of(&om).unwrap());
    }

    #[test]
    fn invariant_set_is_invariant() {
        let phi = mat(&[&[0.9, 0.3], &[-0.2, 0.8]]);
        let xc = Polytope::new(
            mat(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0], &[1.0, 1.0]]),
            DVector::from_row_slice(&[1.0, 1.0, 0.5, 0.5, 1.2]),
        )
        .unwrap();
        let om = max_invariant_set(&phi, &xc).unwrap();
        assert!(om.subset_of(&xc).unwrap());
        let mapped = affine_map(&om, &phi).unwrap();
        assert!(mapped.subset_of(&om).unwrap());
    }

    #[test]
    fn unstable_phi_rejected() {
        let xc = Polytope::inf_ball(2, 1.0);
        assert!(matches!(
            max_invariant_set(&(DMatrix::identity(2, 2) * 1.01), &xc),
            Err(PolytopeError::UnstablePhi(_))
        ));
        let w = Polytope::inf_ball(2, 0.1);
        assert!(matches!(
            mrpi_outer(&(DMatrix::identity(2, 2) * 1.5), &w, 1e-3),
            Err(PolytopeError::UnstablePhi(_))
        ));
    }

    #[test]
    fn sum_difference_interplay() {
        // (p ⊖ q) ⊕ q ⊆ p, with equality on boxes.
        let p = Polytope::inf_ball(2, 1.0);
        let q = Polytope::inf_ball(2, 0.3);
        let d = pontryagin_diff(&p, &q).unwrap();
        let back = minkowski_sum(&d, &q).unwrap();
        assert!(back.subset_of(&p).unwrap());
        assert!(support_gap(&back, &p) < 1e-9);
    }
}
