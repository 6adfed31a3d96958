//! Closed convex sets with exact orthogonal projections.
//!
//! Every set implements [`ConvexSet`]. Affine sets additionally implement
//! the [`AffineSet`] marker, which the circumcenter-based steps require for
//! their second reflector. Set values are immutable once built, so a shared
//! reference can be projected onto from any number of threads.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{distance, dot, norm, Point};

/// Relative threshold below which singular values of an affine system are
/// treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Consistency tolerance on `||A x - b||`, scaled by `1 + ||b||`.
pub const CONSISTENCY_TOL: f64 = 1e-10;

/// A nonempty closed convex subset of R^n with an exact projector.
pub trait ConvexSet: Sync {
    fn dim(&self) -> usize;

    /// Nearest point of the set to `x`. The caller guarantees `x.len() == self.dim()`.
    fn project_slice(&self, x: &[f64]) -> Vec<f64>;

    fn project(&self, x: &Point) -> Result<Point> {
        x.check_dim(self.dim())?;
        Ok(Point::from_vec(self.project_slice(x)))
    }

    /// `2 P(x) - x`.
    fn reflect(&self, x: &Point) -> Result<Point> {
        let p = self.project(x)?;
        Ok(x.reflect_through(&p))
    }

    /// True iff `||x - P(x)|| <= tol`.
    fn contains(&self, x: &Point, tol: f64) -> Result<bool> {
        let p = self.project(x)?;
        Ok(x.distance(&p) <= tol)
    }
}

/// Marker for sets that are affine subspaces (reflection is an isometric involution).
pub trait AffineSet: ConvexSet {}

impl<S: ConvexSet + ?Sized> ConvexSet for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn project_slice(&self, x: &[f64]) -> Vec<f64> {
        (**self).project_slice(x)
    }
}

impl<S: AffineSet + ?Sized> AffineSet for &S {}

/// The whole space R^n.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FullSpace {
    dim: usize,
}

impl FullSpace {
    pub fn new(dim: usize) -> Self {
        FullSpace { dim }
    }
}

impl ConvexSet for FullSpace {
    fn dim(&self) -> usize {
        self.dim
    }
    fn project_slice(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

impl AffineSet for FullSpace {}

/// `{x : a^T x <= b}` or `{x : a^T x = b}` depending on the wrapping variant.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    a: Point,
    b: f64,
    norm_sq: f64,
}

impl LinearConstraint {
    pub fn new(a: Point, b: f64) -> Result<Self> {
        let norm_sq = dot(&a, &a);
        if norm_sq == 0.0 {
            return Err(Error::InvalidSet("normal vector must be nonzero".into()));
        }
        if !b.is_finite() {
            return Err(Error::InvalidSet("offset must be finite".into()));
        }
        Ok(LinearConstraint { a, b, norm_sq })
    }

    pub fn normal(&self) -> &Point {
        &self.a
    }

    pub fn offset(&self) -> f64 {
        self.b
    }

    /// Signed excess `a^T x - b`.
    pub fn excess(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) - self.b
    }

    fn shift(&self, x: &[f64], excess: f64) -> Vec<f64> {
        let s = excess / self.norm_sq;
        x.iter()
            .zip(self.a.iter())
            .map(|(xi, ai)| xi - s * ai)
            .collect()
    }
}

/// Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Point,
    radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidSet(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Ball { center, radius })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Axis-aligned box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lower: Point,
    upper: Point,
}

impl BoxSet {
    pub fn new(lower: Point, upper: Point) -> Result<Self> {
        upper.check_dim(lower.dim())?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::InvalidSet(
                "box needs lower <= upper componentwise".into(),
            ));
        }
        Ok(BoxSet { lower, upper })
    }

    pub fn lower(&self) -> &Point {
        &self.lower
    }

    pub fn upper(&self) -> &Point {
        &self.upper
    }
}

/// Second-order cone `{(t, u) in R x R^{n-1} : ||u|| <= t}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SecondOrderCone {
    n: usize,
}

impl SecondOrderCone {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSet(format!(
                "second-order cone needs n >= 2, got {n}"
            )));
        }
        Ok(SecondOrderCone { n })
    }

    fn project(x: &[f64]) -> Vec<f64> {
        let t = x[0];
        let u = &x[1..];
        let nu = norm(u);
        if nu <= t {
            return x.to_vec();
        }
        if nu <= -t {
            return vec![0.0; x.len()];
        }
        let alpha = 0.5 * (t + nu);
        let mut out = Vec::with_capacity(x.len());
        out.push(alpha);
        out.extend(u.iter().map(|ui| alpha * ui / nu));
        out
    }
}

/// Affine subspace `{x : A x = b}`.
///
/// The constructor factors `A` once with a thin SVD and keeps an orthonormal
/// basis of the row space plus the minimum-norm solution `x0`, so that
/// `P(x) = x - V (V^T (x - x0))` costs `O(n * rank)`. Singular values below
/// `RANK_TOL * sigma_max` are dropped, which makes dependent rows harmless.
#[derive(Debug, Clone)]
pub struct AffineSubspace {
    matrix: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    dim: usize,
    /// Row-space basis, `rank` rows of length `dim`.
    basis: Vec<Vec<f64>>,
    anchor: Vec<f64>,
}

impl PartialEq for AffineSubspace {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix && self.rhs == other.rhs
    }
}

impl AffineSubspace {
    /// Builds `{x : A x = b}` from row-major `A`. Fails when the rows are
    /// ragged, any entry is non-finite, or the system is inconsistent.
    pub fn new(matrix: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        let rows = matrix.len();
        if rows == 0 {
            return Err(Error::InvalidSet(
                "affine subspace needs at least one equation".into(),
            ));
        }
        if rhs.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: rhs.len(),
            });
        }
        let dim = matrix[0].len();
        if dim == 0 {
            return Err(Error::BadDimension(0));
        }
        for row in &matrix {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
        }
        if matrix.iter().flatten().chain(&rhs).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSet(
                "affine system has non-finite entries".into(),
            ));
        }

        let a = DMatrix::from_fn(rows, dim, |i, j| matrix[i][j]);
        let svd = a.svd(true, true);
        let u = svd.u.as_ref().expect("svd computed with U");
        let v_t = svd.v_t.as_ref().expect("svd computed with V^T");
        let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);

        let mut basis = Vec::new();
        let mut anchor = vec![0.0; dim];
        for (k, &sigma) in svd.singular_values.iter().enumerate() {
            if sigma_max == 0.0 || sigma <= RANK_TOL * sigma_max {
                continue;
            }
            let coeff = (0..rows).map(|i| u[(i, k)] * rhs[i]).sum::<f64>() / sigma;
            let row: Vec<f64> = (0..dim).map(|j| v_t[(k, j)]).collect();
            for (x, v) in anchor.iter_mut().zip(&row) {
                *x += coeff * v;
            }
            basis.push(row);
        }

        let residual = matrix
            .iter()
            .zip(&rhs)
            .map(|(row, bi)| (dot(row, &anchor) - bi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual > CONSISTENCY_TOL * (1.0 + norm(&rhs)) {
            return Err(Error::InconsistentSystem { residual });
        }

        Ok(AffineSubspace {
            matrix,
            rhs,
            dim,
            basis,
            anchor,
        })
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn rows(&self) -> usize {
        self.matrix.len()
    }

    /// Numerical rank of `A`.
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Minimum-norm point of the subspace.
    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    /// `||A x - b||`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.matrix
            .iter()
            .zip(&self.rhs)
            .map(|(row, bi)| (dot(row, x) - bi).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Appends one equation `a^T x = beta` and refactors.
    pub fn with_equation(&self, a: &[f64], beta: f64) -> Result<Self> {
        let mut matrix = self.matrix.clone();
        matrix.push(a.to_vec());
        let mut rhs = self.rhs.clone();
        rhs.push(beta);
        AffineSubspace::new(matrix, rhs)
    }
}

impl ConvexSet for AffineSubspace {
    fn dim(&self) -> usize {
        self.dim
    }

    fn project_slice(&self, x: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = x.iter().zip(&self.anchor).map(|(a, b)| a - b).collect();
        let mut out = x.to_vec();
        for v in &self.basis {
            let c = dot(v, &diff);
            for (o, vi) in out.iter_mut().zip(v) {
                *o -= c * vi;
            }
        }
        out
    }
}

impl AffineSet for AffineSubspace {}

/// One closed convex set from the catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetSpec", into = "SetSpec")]
pub enum ConvexSetDescriptor {
    Halfspace(LinearConstraint),
    Hyperplane(LinearConstraint),
    Affine(AffineSubspace),
    Ball(Ball),
    Box(BoxSet),
    SecondOrderCone(SecondOrderCone),
}

impl ConvexSetDescriptor {
    pub fn halfspace(a: Vec<f64>, b: f64) -> Result<Self> {
        Ok(Self::Halfspace(LinearConstraint::new(Point::new(a)?, b)?))
    }

    pub fn hyperplane(a: Vec<f64>, b: f64) -> Result<Self> {
        Ok(Self::Hyperplane(LinearConstraint::new(Point::new(a)?, b)?))
    }

    pub fn affine(matrix: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        Ok(Self::Affine(AffineSubspace::new(matrix, rhs)?))
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Ok(Self::Ball(Ball::new(Point::new(center)?, radius)?))
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Ok(Self::Box(BoxSet::new(
            Point::new(lower)?,
            Point::new(upper)?,
        )?))
    }

    pub fn second_order_cone(n: usize) -> Result<Self> {
        Ok(Self::SecondOrderCone(SecondOrderCone::new(n)?))
    }

    /// Constraint violation computed from the set's defining inequalities,
    /// without going through the projector.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            Self::Halfspace(h) => h.excess(x).max(0.0) / h.norm_sq.sqrt(),
            Self::Hyperplane(h) => h.excess(x).abs() / h.norm_sq.sqrt(),
            Self::Affine(u) => u.residual(x),
            Self::Ball(ball) => (distance(x, &ball.center) - ball.radius).max(0.0),
            Self::Box(bx) => x
                .iter()
                .zip(bx.lower.iter().zip(bx.upper.iter()))
                .map(|(xi, (l, u))| (l - xi).max(xi - u).max(0.0))
                .fold(0.0, f64::max),
            Self::SecondOrderCone(_) => (norm(&x[1..]) - x[0]).max(0.0),
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, Self::Hyperplane(_) | Self::Affine(_))
    }
}

impl ConvexSet for ConvexSetDescriptor {
    fn dim(&self) -> usize {
        match self {
            Self::Halfspace(h) | Self::Hyperplane(h) => h.a.dim(),
            Self::Affine(u) => u.dim,
            Self::Ball(b) => b.center.dim(),
            Self::Box(b) => b.lower.dim(),
            Self::SecondOrderCone(c) => c.n,
        }
    }

    fn project_slice(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Halfspace(h) => {
                let e = h.excess(x);
                if e <= 0.0 {
                    x.to_vec()
                } else {
                    h.shift(x, e)
                }
            }
            Self::Hyperplane(h) => h.shift(x, h.excess(x)),
            Self::Affine(u) => u.project_slice(x),
            Self::Ball(ball) => {
                let d = distance(x, &ball.center);
                if d <= ball.radius {
                    x.to_vec()
                } else {
                    let s = ball.radius / d;
                    x.iter()
                        .zip(ball.center.iter())
                        .map(|(xi, ci)| ci + s * (xi - ci))
                        .collect()
                }
            }
            Self::Box(bx) => x
                .iter()
                .zip(bx.lower.iter().zip(bx.upper.iter()))
                .map(|(xi, (l, u))| xi.clamp(*l, *u))
                .collect(),
            Self::SecondOrderCone(_) => SecondOrderCone::project(x),
        }
    }
}

/// JSON shape of one set: `{"type": "halfspace", "a": [...], "b": 0.5}` and so on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum SetSpec {
    #[serde(rename = "halfspace")]
    Halfspace { a: Vec<f64>, b: f64 },
    #[serde(rename = "hyperplane")]
    Hyperplane { a: Vec<f64>, b: f64 },
    #[serde(rename = "affine")]
    Affine {
        #[serde(rename = "A")]
        matrix: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    #[serde(rename = "ball")]
    Ball { center: Vec<f64>, radius: f64 },
    #[serde(rename = "box")]
    Box { lower: Vec<f64>, upper: Vec<f64> },
    #[serde(rename = "second_order_cone")]
    SecondOrderCone { n: usize },
}

impl TryFrom<SetSpec> for ConvexSetDescriptor {
    type Error = Error;

    fn try_from(spec: SetSpec) -> Result<Self> {
        match spec {
            SetSpec::Halfspace { a, b } => Self::halfspace(a, b),
            SetSpec::Hyperplane { a, b } => Self::hyperplane(a, b),
            SetSpec::Affine { matrix, b } => Self::affine(matrix, b),
            SetSpec::Ball { center, radius } => Self::ball(center, radius),
            SetSpec::Box { lower, upper } => Self::boxed(lower, upper),
            SetSpec::SecondOrderCone { n } => Self::second_order_cone(n),
        }
    }
}

impl From<ConvexSetDescriptor> for SetSpec {
    fn from(set: ConvexSetDescriptor) -> Self {
        match set {
            ConvexSetDescriptor::Halfspace(h) => SetSpec::Halfspace {
                a: h.a.into_vec(),
                b: h.b,
            },
            ConvexSetDescriptor::Hyperplane(h) => SetSpec::Hyperplane {
                a: h.a.into_vec(),
                b: h.b,
            },
            ConvexSetDescriptor::Affine(u) => SetSpec::Affine {
                matrix: u.matrix,
                b: u.rhs,
            },
            ConvexSetDescriptor::Ball(b) => SetSpec::Ball {
                center: b.center.into_vec(),
                radius: b.radius,
            },
            ConvexSetDescriptor::Box(b) => SetSpec::Box {
                lower: b.lower.into_vec(),
                upper: b.upper.into_vec(),
            },
            ConvexSetDescriptor::SecondOrderCone(c) => SetSpec::SecondOrderCone { n: c.n },
        }
    }
}

/// JSON shape of an affine subspace: `{"A": [[...]], "b": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineSpec {
    #[serde(rename = "A")]
    pub matrix: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl Serialize for AffineSubspace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AffineSpec {
            matrix: self.matrix.clone(),
            b: self.rhs.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AffineSubspace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let spec = AffineSpec::deserialize(d)?;
        AffineSubspace::new(spec.matrix, spec.b).map_err(serde::de::Error::custom)
    }
}
