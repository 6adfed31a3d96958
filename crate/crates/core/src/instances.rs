//! Seeded random feasibility problems and the JSON problem file.
//!
//! Randomness comes from ChaCha20 (`rand_chacha` 0.9) seeded through
//! `seed_from_u64`; instances draw from stream 0 and start points from
//! stream 1 of their own seed. Normal deviates use the ziggurat sampler of
//! `rand_distr` 0.5.1, pinned exactly so files stay byte-identical.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::{self, DEFAULT_TOL};
use crate::point::{dot, norm, Point};
use crate::product_space::{self, lift, ProductSet};
use crate::sets::{AffineSubspace, ConvexSet, ConvexSetDescriptor};

pub const SCHEMA_VERSION: u64 = 1;
pub const INSTANCE_STREAM: u64 = 0;
pub const START_STREAM: u64 = 1;
/// Start points have norm in `[START_NORM_MIN, START_NORM_MAX]`.
pub const START_NORM_MIN: f64 = 5.0;
pub const START_NORM_MAX: f64 = 15.0;
pub const MAX_START_DRAWS: usize = 1000;
/// Membership tolerance used to reject feasible start points.
pub const START_MEMBERSHIP_TOL: f64 = 1e-9;
/// Certificates must satisfy every constraint to this tolerance.
pub const CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    /// One convex set intersected with `{x : A x = b}`.
    AffineConic,
    /// Finitely many sets, solved in the product space.
    Polyhedral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub kind: InstanceKind,
    pub sets: Vec<ConvexSetDescriptor>,
    pub affine: Option<AffineSubspace>,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// A known feasible point.
    pub certificate: Option<Point>,
}

impl ProblemInstance {
    /// Checks dimensions, the kind-specific shape and the certificate.
    pub fn validate(&self) -> Result<()> {
        if self.sets.is_empty() {
            return Err(Error::InvalidSet("problem has no sets".into()));
        }
        for s in &self.sets {
            if s.dim() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    found: s.dim(),
                });
            }
        }
        match (self.kind, &self.affine) {
            (InstanceKind::AffineConic, None) => {
                return Err(Error::InvalidSet(
                    "affine_conic problem needs an affine part".into(),
                ))
            }
            (InstanceKind::AffineConic, Some(u)) if u.dim() != self.n => {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    found: u.dim(),
                })
            }
            (InstanceKind::Polyhedral, Some(_)) => {
                return Err(Error::InvalidSet(
                    "polyhedral problem has no affine part".into(),
                ))
            }
            _ => {}
        }
        if let Some(c) = &self.certificate {
            c.check_dim(self.n)?;
            let worst = self.certificate_residual(c);
            if worst >= CERTIFICATE_TOL {
                return Err(Error::InvalidSet(format!(
                    "certificate violates constraints by {worst:.3e}"
                )));
            }
        }
        Ok(())
    }

    /// Largest constraint violation of `x` over all sets and the affine part.
    pub fn certificate_residual(&self, x: &[f64]) -> f64 {
        let sets = self.sets.iter().map(|s| s.violation(x)).fold(0.0, f64::max);
        let affine = self.affine.as_ref().map_or(0.0, |u| u.residual(x));
        sets.max(affine)
    }

    /// `W = X_1 × ... × X_m` over this instance's sets.
    pub fn product(&self) -> Result<ProductSet> {
        ProductSet::new(self.sets.clone())
    }

    /// `S` for affine-conic problems (the first set), if any.
    pub fn cone(&self) -> &ConvexSetDescriptor {
        &self.sets[0]
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ProblemFile {
            schema: SCHEMA_VERSION,
            kind: self.kind,
            n: self.n,
            m: self.m,
            seed: self.seed,
            sets: self.sets.clone(),
            affine: self.affine.clone(),
            certificate: self.certificate.clone(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::parse("serialize", e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            schema: u64,
        }
        let probe: Probe = serde_json::from_str(text).map_err(|e| {
            Error::parse(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        if probe.schema != SCHEMA_VERSION {
            return Err(Error::SchemaVersionMismatch {
                found: probe.schema,
                expected: SCHEMA_VERSION,
            });
        }
        let mut de = serde_json::Deserializer::from_str(text);
        let file: ProblemFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::parse(
                format!(
                    "field `{path}` (line {} column {})",
                    inner.line(),
                    inner.column()
                ),
                inner.to_string(),
            )
        })?;
        let instance = ProblemInstance {
            kind: file.kind,
            sets: file.sets,
            affine: file.affine,
            n: file.n,
            m: file.m,
            seed: file.seed,
            certificate: file.certificate,
        };
        instance.validate()?;
        Ok(instance)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    schema: u64,
    kind: InstanceKind,
    n: usize,
    m: usize,
    seed: u64,
    sets: Vec<ConvexSetDescriptor>,
    affine: Option<AffineSubspace>,
    certificate: Option<Point>,
}

pub fn write_problem(instance: &ProblemInstance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, instance.to_json()?)?;
    Ok(())
}

pub fn read_problem(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    ProblemInstance::from_json(&fs::read_to_string(path)?)
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normals(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::BadDimension(n));
    }
    Ok(())
}

/// Where the certificate `x̄ = (t, u)` of a cone instance sits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeCertificate {
    /// `t = ||u||`, on the boundary of the cone.
    #[default]
    Boundary,
    /// `t = ||u|| (1 + |g|)` with a further normal `g`, strictly inside.
    Interior,
}

/// Random second-order cone system `A x = b, x ∈ C_n` with a boundary certificate.
pub fn gen_soc_instance(n: usize, seed: u64) -> Result<ProblemInstance> {
    gen_soc_instance_with(n, seed, ConeCertificate::Boundary)
}

/// `m` is uniform in `1..=n-1`, `A` has i.i.d. standard normal entries,
/// `u` is standard normal and `b = A x̄`. The same seed gives the same
/// `A` and `u` for either certificate kind.
pub fn gen_soc_instance_with(
    n: usize,
    seed: u64,
    certificate: ConeCertificate,
) -> Result<ProblemInstance> {
    check_n(n)?;
    let mut rng = rng_for(seed, INSTANCE_STREAM);
    let m = rng.random_range(1..n);
    let matrix: Vec<Vec<f64>> = (0..m).map(|_| normals(&mut rng, n)).collect();
    let u = normals(&mut rng, n - 1);
    let g: f64 = rng.sample(StandardNormal);
    let mut cert = Vec::with_capacity(n);
    cert.push(match certificate {
        ConeCertificate::Boundary => norm(&u),
        ConeCertificate::Interior => norm(&u) * (1.0 + g.abs()),
    });
    cert.extend(u);
    let rhs: Vec<f64> = matrix.iter().map(|row| dot(row, &cert)).collect();
    let instance = ProblemInstance {
        kind: InstanceKind::AffineConic,
        sets: vec![ConvexSetDescriptor::second_order_cone(n)?],
        affine: Some(AffineSubspace::new(matrix, rhs)?),
        n,
        m,
        seed,
        certificate: Some(Point::new(cert)?),
    };
    instance.validate()?;
    Ok(instance)
}

/// Random polyhedron `{x : a_i^T x <= b_i}` with a Slater-type certificate.
///
/// `a_i` and `x̄` are standard normal, `b̄ = A x̄`, and a random subset `I`
/// of `p` rows gets `b_i = b̄_i + ||b̄|| r` with `r ~ U(0, 1)`. `p` is
/// uniform in `1..=m` unless `slack_rows` fixes it (clamped to `m`).
pub fn gen_polyhedral_instance_with(
    n: usize,
    seed: u64,
    slack_rows: Option<usize>,
) -> Result<ProblemInstance> {
    check_n(n)?;
    let mut rng = rng_for(seed, INSTANCE_STREAM);
    let m = rng.random_range(1..n);
    let normals_a: Vec<Vec<f64>> = (0..m).map(|_| normals(&mut rng, n)).collect();
    let cert = normals(&mut rng, n);
    let base: Vec<f64> = normals_a.iter().map(|a| dot(a, &cert)).collect();
    let p = match slack_rows {
        Some(p) => p.min(m),
        None => rng.random_range(1..=m),
    };
    let slack = rand::seq::index::sample(&mut rng, m, p);
    let r = loop {
        let r: f64 = rng.random();
        if r > 0.0 {
            break r;
        }
    };
    let lift_by = norm(&base) * r;
    let mut rhs = base;
    for i in slack.iter() {
        rhs[i] += lift_by;
    }
    let sets = normals_a
        .into_iter()
        .zip(rhs)
        .map(|(a, b)| ConvexSetDescriptor::halfspace(a, b))
        .collect::<Result<Vec<_>>>()?;
    let instance = ProblemInstance {
        kind: InstanceKind::Polyhedral,
        sets,
        affine: None,
        n,
        m,
        seed,
        certificate: Some(Point::new(cert)?),
    };
    instance.validate()?;
    Ok(instance)
}

pub fn gen_polyhedral_instance(n: usize, seed: u64) -> Result<ProblemInstance> {
    gen_polyhedral_instance_with(n, seed, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartPoint {
    /// Drawn point of R^n, norm in `[5, 15]`.
    pub raw: Point,
    /// `P_U(raw)` for affine-conic problems, `(raw, ..., raw)` for product-space runs.
    pub projected: Point,
    pub seed: u64,
}

/// Draws an infeasible start point.
///
/// A standard normal direction is scaled to a norm drawn uniformly from
/// `[5, 15]`. Draws that already solve the problem, or whose projected
/// start has gap below the default tolerance, are rejected.
pub fn gen_start(instance: &ProblemInstance, seed: u64) -> Result<StartPoint> {
    let mut rng = rng_for(seed, START_STREAM);
    let n = instance.n;
    for _ in 0..MAX_START_DRAWS {
        let dir = normals(&mut rng, n);
        let len = norm(&dir);
        let target = rng.random_range(START_NORM_MIN..=START_NORM_MAX);
        if len == 0.0 {
            continue;
        }
        let raw = Point::new(dir.iter().map(|d| d * target / len).collect())?;
        if solves(instance, &raw)? {
            continue;
        }
        let (projected, gap) = match instance.kind {
            InstanceKind::AffineConic => {
                let u = instance.affine.as_ref().expect("validated affine part");
                let projected = u.project(&raw)?;
                let gap = instance
                    .sets
                    .iter()
                    .map(|k| methods::gap(k, u, &projected))
                    .try_fold(0.0f64, |acc, g| g.map(|g| acc.max(g)))?;
                (projected, gap)
            }
            InstanceKind::Polyhedral => {
                let w = instance.product()?;
                let projected = lift(&raw, instance.sets.len());
                let gap = product_space::prod_gap(&w, &projected)?;
                (projected, gap)
            }
        };
        if gap < DEFAULT_TOL {
            continue;
        }
        return Ok(StartPoint {
            raw,
            projected,
            seed,
        });
    }
    Err(Error::ExhaustedRejection(MAX_START_DRAWS))
}

fn solves(instance: &ProblemInstance, x: &Point) -> Result<bool> {
    for s in &instance.sets {
        if !s.contains(x, START_MEMBERSHIP_TOL)? {
            return Ok(false);
        }
    }
    match &instance.affine {
        Some(u) => u.contains(x, START_MEMBERSHIP_TOL),
        None => Ok(true),
    }
}
