//! CRM, MAP and DRM steps for `K ∩ U` (closed convex `K`, affine `U`), the
//! serial and averaged circumcenter compositions over several sets, and the
//! iteration driver shared by all of them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circumcenter::circumcenter;
use crate::error::{Error, Result};
use crate::point::Point;
use crate::sets::{AffineSet, ConvexSet};

/// Default gap tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// How far (relative to `1 + ||z||`) an iterate may sit from `U` before a
/// circumcenter step refuses it.
pub const AFFINE_TOL: f64 = 1e-8;
/// `||z - R_K z|| < FIXED_POINT_TOL * (1 + ||z||)` returns `z` unchanged.
pub const FIXED_POINT_TOL: f64 = 1e-14;
const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Crm,
    Map,
    Drm,
    SerialCrm,
    AveragedCrm,
}

impl Method {
    pub const fn name(self) -> &'static str {
        match self {
            Method::Crm => "crm",
            Method::Map => "map",
            Method::Drm => "drm",
            Method::SerialCrm => "serialcrm",
            Method::AveragedCrm => "averagedcrm",
        }
    }

    /// Whether iterates must stay on the affine set.
    pub const fn is_circumcentric(self) -> bool {
        matches!(self, Method::Crm | Method::SerialCrm | Method::AveragedCrm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "crm" => Ok(Method::Crm),
            "map" => Ok(Method::Map),
            "drm" => Ok(Method::Drm),
            "serialcrm" | "serial-crm" => Ok(Method::SerialCrm),
            "averagedcrm" | "averaged-crm" => Ok(Method::AveragedCrm),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub method: Method,
    /// Convex weights for [`Method::AveragedCrm`].
    pub weights: Option<Vec<f64>>,
    /// Keep every iterate in the trace.
    pub record_trace: bool,
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        SolverConfig {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            method,
            weights: None,
            record_trace: false,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn recording(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        if let Some(w) = &self.weights {
            check_weights(w)?;
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::new(Method::Crm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterReached,
    Degenerate,
}

impl Status {
    pub const fn name(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterReached => "max_iter_reached",
            Status::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(Status::Converged),
            "max_iter_reached" => Ok(Status::MaxIterReached),
            "degenerate" => Ok(Status::Degenerate),
            other => Err(Error::parse("status", format!("unknown status `{other}`"))),
        }
    }
}

/// Outcome of one solver run.
///
/// `gaps[k]` is the gap at the k-th iterate, so a run that stopped on the
/// tolerance or the iteration cap has `gaps.len() == iterations + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// All iterates starting with the (projected) start point; empty unless recorded.
    pub iterates: Vec<Point>,
    pub gaps: Vec<f64>,
    pub iterations: usize,
    pub status: Status,
    pub final_point: Point,
}

impl IterationTrace {
    pub fn final_gap(&self) -> f64 {
        self.gaps.last().copied().unwrap_or(f64::NAN)
    }
}

/// Gap at the current iterate plus, when the tolerance is not met yet, the next iterate.
pub(crate) struct Advance {
    pub gap: f64,
    pub next: Option<Result<Point>>,
}

/// Called with `(z_k, z_{k+1})` after every accepted step.
pub type Observer<'a> = &'a mut dyn FnMut(&Point, &Point);

pub(crate) fn drive<F>(
    z0: Point,
    config: &SolverConfig,
    mut advance: F,
    observe: Observer<'_>,
) -> IterationTrace
where
    F: FnMut(&Point, f64) -> Result<Advance>,
{
    let mut z = z0;
    let mut gaps = Vec::new();
    let mut iterates = Vec::new();
    if config.record_trace {
        iterates.push(z.clone());
    }
    let mut iterations = 0;
    let status = loop {
        let step = match advance(&z, config.tol) {
            Ok(step) => step,
            Err(_) => break Status::Degenerate,
        };
        gaps.push(step.gap);
        if step.gap < config.tol {
            break Status::Converged;
        }
        if iterations == config.max_iter {
            break Status::MaxIterReached;
        }
        match step.next {
            Some(Ok(next)) if next.is_finite() => {
                observe(&z, &next);
                z = next;
            }
            _ => break Status::Degenerate,
        }
        iterations += 1;
        if config.record_trace {
            iterates.push(z.clone());
        }
    };
    IterationTrace {
        iterates,
        gaps,
        iterations,
        status,
        final_point: z,
    }
}

/// `pu` is `P_U z`.
pub(crate) fn check_in_affine(z: &Point, pu: &Point) -> Result<()> {
    let distance = z.distance(pu);
    if distance > AFFINE_TOL * (1.0 + z.norm()) {
        return Err(Error::NotInAffine { distance });
    }
    Ok(())
}

/// Circumcenter of `{z, R_K z, R_U R_K z}` given `P_K z`.
pub(crate) fn crm_from_projection<U: AffineSet + ?Sized>(
    u: &U,
    z: &Point,
    pk: &Point,
) -> Result<Point> {
    let rk = z.reflect_through(pk);
    if z.distance(&rk) < FIXED_POINT_TOL * (1.0 + z.norm()) {
        return Ok(z.clone());
    }
    let rurk = u.reflect(&rk)?;
    let center = circumcenter(&[z.clone(), rk, rurk])?.center;
    // The center lies in U exactly; long steps near the solution amplify
    // rounding off U, so snap it back.
    u.project(&center)
}

/// One CRM step `circ{z, R_K z, R_U R_K z}` from `z ∈ U`.
pub fn crm_step<K, U>(k: &K, u: &U, z: &Point) -> Result<Point>
where
    K: ConvexSet + ?Sized,
    U: AffineSet + ?Sized,
{
    let pu = u.project(z)?;
    check_in_affine(z, &pu)?;
    let pk = k.project(z)?;
    crm_from_projection(u, z, &pk)
}

/// `P_U P_K z`.
pub fn map_step<K, U>(k: &K, u: &U, z: &Point) -> Result<Point>
where
    K: ConvexSet + ?Sized,
    U: AffineSet + ?Sized,
{
    u.project(&k.project(z)?)
}

/// `(z + R_U R_K z) / 2`.
pub fn drm_step<K, U>(k: &K, u: &U, z: &Point) -> Result<Point>
where
    K: ConvexSet + ?Sized,
    U: AffineSet + ?Sized,
{
    let pk = k.project(z)?;
    drm_from_projection(u, z, &pk)
}

fn drm_from_projection<U: AffineSet + ?Sized>(u: &U, z: &Point, pk: &Point) -> Result<Point> {
    let rurk = u.reflect(&z.reflect_through(pk))?;
    Ok(z.midpoint(&rurk))
}

/// CRM steps for `K_1, ..., K_N` applied in order.
pub fn serial_crm_step<K, U>(ks: &[K], u: &U, z: &Point) -> Result<Point>
where
    K: ConvexSet,
    U: AffineSet + ?Sized,
{
    if ks.is_empty() {
        return Err(Error::EmptyInput);
    }
    ks.iter().try_fold(z.clone(), |z, k| crm_step(k, u, &z))
}

/// `sum_i w_i C_(K_i, U)(z)`.
pub fn averaged_crm_step<K, U>(ks: &[K], u: &U, weights: &[f64], z: &Point) -> Result<Point>
where
    K: ConvexSet,
    U: AffineSet + ?Sized,
{
    if ks.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_weights(weights)?;
    if weights.len() != ks.len() {
        return Err(Error::WeightError(format!(
            "{} weights for {} sets",
            weights.len(),
            ks.len()
        )));
    }
    let mut acc = vec![0.0; z.dim()];
    for (k, w) in ks.iter().zip(weights) {
        let c = crm_step(k, u, z)?;
        for (a, ci) in acc.iter_mut().zip(c.iter()) {
            *a += w * ci;
        }
    }
    Ok(Point::from_vec(acc))
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::WeightError("no weights".into()));
    }
    if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::WeightError(
            "weights must be strictly positive".into(),
        ));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::WeightError(format!("weights sum to {sum}, not 1")));
    }
    Ok(())
}

/// Gap distance `||P_U z - P_K z||`.
pub fn gap<K, U>(k: &K, u: &U, z: &Point) -> Result<f64>
where
    K: ConvexSet + ?Sized,
    U: AffineSet + ?Sized,
{
    Ok(u.project(z)?.distance(&k.project(z)?))
}

/// Iterates CRM, MAP or DRM on `K ∩ U` from `P_U(z0)` until the gap drops below `tol`.
///
/// [`Method::SerialCrm`] and [`Method::AveragedCrm`] with a single set reduce
/// to CRM (the averaged variant still checks its weights).
pub fn run<K, U>(k: &K, u: &U, z0: &Point, config: &SolverConfig) -> Result<IterationTrace>
where
    K: ConvexSet + ?Sized,
    U: AffineSet + ?Sized,
{
    run_with(k, u, z0, config, &mut |_, _| {})
}

/// [`run`] with a callback on every step.
pub fn run_with<K, U>(
    k: &K,
    u: &U,
    z0: &Point,
    config: &SolverConfig,
    observe: Observer<'_>,
) -> Result<IterationTrace>
where
    K: ConvexSet + ?Sized,
    U: AffineSet + ?Sized,
{
    config.validate()?;
    z0.check_dim(k.dim())?;
    z0.check_dim(u.dim())?;
    if config.method == Method::AveragedCrm {
        let w = config.weights.as_deref().unwrap_or(&[1.0]);
        if w.len() != 1 {
            return Err(Error::WeightError(format!("{} weights for 1 set", w.len())));
        }
    }
    let start = u.project(z0)?;
    let method = config.method;
    Ok(drive(
        start,
        config,
        |z, tol| {
            let pk = k.project(z)?;
            let pu = u.project(z)?;
            let gap = pu.distance(&pk);
            let next = (gap >= tol).then(|| match method {
                Method::Crm | Method::SerialCrm | Method::AveragedCrm => {
                    check_in_affine(z, &pu)?;
                    crm_from_projection(u, z, &pk)
                }
                Method::Map => u.project(&pk),
                Method::Drm => drm_from_projection(u, z, &pk),
            });
            Ok(Advance { gap, next })
        },
        observe,
    ))
}

/// Drives [`serial_crm_step`] or [`averaged_crm_step`] over several sets.
///
/// The gap is `max_i ||P_U z - P_{K_i} z||`. CRM, MAP and DRM are accepted
/// only with a single set.
pub fn run_composite<K, U>(
    ks: &[K],
    u: &U,
    z0: &Point,
    config: &SolverConfig,
) -> Result<IterationTrace>
where
    K: ConvexSet,
    U: AffineSet + ?Sized,
{
    config.validate()?;
    match (config.method, ks) {
        (_, []) => return Err(Error::EmptyInput),
        (Method::Crm | Method::Map | Method::Drm, [k]) => return run(k, u, z0, config),
        (Method::Crm | Method::Map | Method::Drm, _) => {
            return Err(Error::InvalidConfig(format!(
                "{} runs on a single set; use serialcrm or averagedcrm",
                config.method
            )))
        }
        _ => {}
    }
    for k in ks {
        z0.check_dim(k.dim())?;
    }
    let weights = match config.method {
        Method::AveragedCrm => {
            let w = config
                .weights
                .clone()
                .unwrap_or_else(|| vec![1.0 / ks.len() as f64; ks.len()]);
            averaged_weights_ok(&w, ks.len())?;
            Some(w)
        }
        _ => None,
    };
    let start = u.project(z0)?;
    Ok(drive(
        start,
        config,
        |z, tol| {
            let pu = u.project(z)?;
            let mut gap = 0.0f64;
            for k in ks {
                gap = gap.max(pu.distance(&k.project(z)?));
            }
            let next = (gap >= tol).then(|| match &weights {
                Some(w) => averaged_crm_step(ks, u, w, z),
                None => serial_crm_step(ks, u, z),
            });
            Ok(Advance { gap, next })
        },
        &mut |_, _| {},
    ))
}

fn averaged_weights_ok(w: &[f64], n: usize) -> Result<()> {
    check_weights(w)?;
    if w.len() != n {
        return Err(Error::WeightError(format!(
            "{} weights for {n} sets",
            w.len()
        )));
    }
    Ok(())
}
