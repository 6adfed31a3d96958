//! Product-space reformulation of `X_1 ∩ ... ∩ X_m ⊂ R^n`.
//!
//! `W = X_1 × ... × X_m` and the diagonal `D = {(x, ..., x)}` live in
//! `R^{nm}`; `x ∈ ∩ X_i` exactly when `(x, ..., x) ∈ W ∩ D`. Both implement
//! the set traits, so the generic drivers in [`crate::methods`] run with
//! `K := W`, `U := D`. The prod-specific MAP and DRM steps apply `D` first,
//! then `W`, which is the reverse of the two-set convention.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::methods::{
    check_in_affine, crm_from_projection, drive, Advance, IterationTrace, Method, Observer,
    SolverConfig,
};
use crate::point::{norm, Point};
use crate::sets::{AffineSet, ConvexSet, ConvexSetDescriptor};

/// Relative tolerance (on `1 + ||z||`) for reading a point off the diagonal.
pub const DIAGONAL_TOL: f64 = 1e-8;

/// Product dimension above which factor projections fan out over threads.
const PARALLEL_MIN_DIM: usize = 1 << 14;

/// `X_1 × ... × X_m`, every factor of dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSet<S = ConvexSetDescriptor> {
    factors: Vec<S>,
    block: usize,
}

impl<S: ConvexSet> ProductSet<S> {
    pub fn new(factors: Vec<S>) -> Result<Self> {
        let block = factors.first().ok_or(Error::EmptyInput)?.dim();
        for f in &factors {
            if f.dim() != block {
                return Err(Error::DimensionMismatch {
                    expected: block,
                    found: f.dim(),
                });
            }
        }
        Ok(ProductSet { factors, block })
    }

    pub fn factors(&self) -> &[S] {
        &self.factors
    }

    pub fn block_dim(&self) -> usize {
        self.block
    }

    pub fn blocks(&self) -> usize {
        self.factors.len()
    }

    /// The diagonal subspace matching this product's shape.
    pub fn diagonal(&self) -> DiagonalSubspace {
        DiagonalSubspace {
            n: self.block,
            m: self.factors.len(),
        }
    }
}

impl<S: ConvexSet> ConvexSet for ProductSet<S> {
    fn dim(&self) -> usize {
        self.block * self.factors.len()
    }

    fn project_slice(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        let work = |((dst, src), f): ((&mut [f64], &[f64]), &S)| {
            dst.copy_from_slice(&f.project_slice(src));
        };
        if x.len() >= PARALLEL_MIN_DIM {
            out.par_chunks_mut(self.block)
                .zip(x.par_chunks(self.block))
                .zip(self.factors.par_iter())
                .for_each(work);
        } else {
            out.chunks_mut(self.block)
                .zip(x.chunks(self.block))
                .zip(self.factors.iter())
                .for_each(work);
        }
        out
    }
}

/// `D = {(x, ..., x) : x ∈ R^n}` with `m` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiagonalSubspace {
    n: usize,
    m: usize,
}

impl DiagonalSubspace {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidSet(format!(
                "diagonal needs n, m >= 1 (got n={n}, m={m})"
            )));
        }
        Ok(DiagonalSubspace { n, m })
    }

    pub fn block_dim(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> usize {
        self.m
    }

    fn block_mean(&self, z: &[f64]) -> Vec<f64> {
        let mut mean = vec![0.0; self.n];
        for block in z.chunks(self.n) {
            for (a, b) in mean.iter_mut().zip(block) {
                *a += b;
            }
        }
        let inv = 1.0 / self.m as f64;
        mean.iter_mut().for_each(|a| *a *= inv);
        mean
    }

    /// `(x, ..., x)`.
    pub fn lift(&self, x: &Point) -> Result<Point> {
        x.check_dim(self.n)?;
        Ok(lift(x, self.m))
    }

    /// Blockwise mean of a point on (or within `DIAGONAL_TOL` of) the diagonal.
    pub fn restrict(&self, z: &Point) -> Result<Point> {
        z.check_dim(self.n * self.m)?;
        let mean = self.block_mean(z);
        let spread = z
            .chunks(self.n)
            .flat_map(|block| block.iter().zip(&mean).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread > DIAGONAL_TOL * (1.0 + z.norm()) {
            return Err(Error::NotDiagonal { spread });
        }
        Ok(Point::from_vec(mean))
    }
}

impl ConvexSet for DiagonalSubspace {
    fn dim(&self) -> usize {
        self.n * self.m
    }

    fn project_slice(&self, x: &[f64]) -> Vec<f64> {
        self.block_mean(x).repeat(self.m)
    }
}

impl AffineSet for DiagonalSubspace {}

/// `m` concatenated copies of `x`.
pub fn lift(x: &Point, m: usize) -> Point {
    Point::from_vec(x.repeat(m))
}

/// `P_D(z)` for `m` blocks.
pub fn project_d(z: &Point, m: usize) -> Result<Point> {
    if m == 0 {
        return Err(Error::InvalidSet(
            "diagonal needs at least one block".into(),
        ));
    }
    if !z.dim().is_multiple_of(m) {
        return Err(Error::DimensionMismatch {
            expected: z.dim().div_ceil(m) * m,
            found: z.dim(),
        });
    }
    DiagonalSubspace::new(z.dim() / m, m)?.project(z)
}

/// `P_W(z)`, one factor projection per block.
pub fn project_w<S: ConvexSet>(w: &ProductSet<S>, z: &Point) -> Result<Point> {
    w.project(z)
}

/// `circ{z, R_W z, R_D R_W z}` from `z ∈ D`.
pub fn crm_prod_step<S: ConvexSet>(w: &ProductSet<S>, z: &Point) -> Result<Point> {
    crate::methods::crm_step(w, &w.diagonal(), z)
}

/// `P_W P_D z`.
pub fn map_prod_step<S: ConvexSet>(w: &ProductSet<S>, z: &Point) -> Result<Point> {
    w.project(&w.diagonal().project(z)?)
}

/// `z/2 + R_W R_D z / 2`.
pub fn drm_prod_step<S: ConvexSet>(w: &ProductSet<S>, z: &Point) -> Result<Point> {
    let rwrd = w.reflect(&w.diagonal().reflect(z)?)?;
    Ok(z.midpoint(&rwrd))
}

/// `||P_D z - P_W z||`; equals `||z - P_W z||` on the diagonal.
pub fn prod_gap<S: ConvexSet>(w: &ProductSet<S>, z: &Point) -> Result<f64> {
    Ok(w.diagonal().project(z)?.distance(&w.project(z)?))
}

/// Operator order for the MAP and DRM product-space iterations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ProdOrdering {
    /// `P_W P_D` and `(I + R_W R_D) / 2`.
    #[default]
    DiagonalFirst,
    /// `P_D P_W` and `(I + R_D R_W) / 2`.
    ProductFirst,
}

/// Runs CRM-prod, MAP-prod or DRM-prod from `P_D(z0)`.
///
/// Every method stops on [`prod_gap`] `< tol`. `z0` may be given in `R^n`
/// (it is lifted) or in `R^{nm}`.
pub fn run_prod<S: ConvexSet>(
    w: &ProductSet<S>,
    z0: &Point,
    config: &SolverConfig,
    ordering: ProdOrdering,
) -> Result<IterationTrace> {
    run_prod_with(w, z0, config, ordering, &mut |_, _| {})
}

/// [`run_prod`] with a callback on every step.
pub fn run_prod_with<S: ConvexSet>(
    w: &ProductSet<S>,
    z0: &Point,
    config: &SolverConfig,
    ordering: ProdOrdering,
    observe: Observer<'_>,
) -> Result<IterationTrace> {
    config.validate()?;
    let d = w.diagonal();
    let start = if z0.dim() == w.block_dim() {
        lift(z0, w.blocks())
    } else {
        z0.check_dim(w.dim())?;
        d.project(z0)?
    };
    let method = config.method;
    if !matches!(method, Method::Crm | Method::Map | Method::Drm) {
        return Err(Error::InvalidConfig(format!(
            "{method} has no product-space form"
        )));
    }
    Ok(drive(
        start,
        config,
        |z, tol| {
            let pw = w.project(z)?;
            let pd = d.project(z)?;
            let gap = pd.distance(&pw);
            let next = (gap >= tol).then(|| match (method, ordering) {
                (Method::Crm, _) => {
                    check_in_affine(z, &pd)?;
                    crm_from_projection(&d, z, &pw)
                }
                (Method::Map, ProdOrdering::DiagonalFirst) => w.project(&pd),
                (Method::Map, ProdOrdering::ProductFirst) => d.project(&pw),
                (Method::Drm, ProdOrdering::DiagonalFirst) => {
                    let rwrd = w.reflect(&z.reflect_through(&pd))?;
                    Ok(z.midpoint(&rwrd))
                }
                (Method::Drm, ProdOrdering::ProductFirst) => {
                    let rdrw = d.reflect(&z.reflect_through(&pw))?;
                    Ok(z.midpoint(&rdrw))
                }
                _ => unreachable!(),
            });
            Ok(Advance { gap, next })
        },
        observe,
    ))
}

/// Largest distance between two blocks of `z`, i.e. how far `z` is from `D` in block terms.
pub fn block_spread(z: &[f64], n: usize) -> f64 {
    let first = &z[..n];
    z.chunks(n)
        .map(|b| norm(&b.iter().zip(first).map(|(x, y)| x - y).collect::<Vec<_>>()))
        .fold(0.0, f64::max)
}
