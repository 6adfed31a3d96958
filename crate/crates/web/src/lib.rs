//! Planar demos for the browser. Each entry point takes and returns JSON so
//! the page needs no bindings beyond strings.

use crm_core::{
    circumcenter, project_d, run, run_prod, AffineSubspace, ConvexSetDescriptor, Method, Point,
    ProdOrdering, ProductSet, SolverConfig,
};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

const DEMO_MAX_ITER: usize = 500;

#[derive(Debug, Deserialize)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

/// `a · x = b`.
#[derive(Debug, Deserialize)]
pub struct Line {
    pub a: [f64; 2],
    pub b: f64,
}

#[derive(Debug, Deserialize)]
pub struct AffineDemo {
    pub disk: Disk,
    pub line: Line,
    pub start: [f64; 2],
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Deserialize)]
pub struct ProductDemo {
    pub disks: Vec<Disk>,
    pub start: [f64; 2],
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-6
}

#[derive(Debug, Serialize)]
pub struct Path {
    pub method: String,
    pub points: Vec<[f64; 2]>,
    pub iterations: usize,
    pub status: String,
}

#[derive(Debug, Serialize)]
pub struct Circle {
    pub center: Vec<f64>,
    pub radius: f64,
}

fn xy(p: &[f64]) -> [f64; 2] {
    [p[0], p[1]]
}

fn disk(d: &Disk) -> crm_core::Result<ConvexSetDescriptor> {
    ConvexSetDescriptor::ball(d.center.to_vec(), d.radius)
}

fn config(method: Method, tol: f64) -> SolverConfig {
    SolverConfig::new(method)
        .with_tol(tol)
        .with_max_iter(DEMO_MAX_ITER)
        .recording(true)
}

/// CRM, MAP and DRM for a disk and a line, started from the projection of
/// `start` onto the line.
pub fn affine_paths(demo: &AffineDemo) -> crm_core::Result<Vec<Path>> {
    let k = disk(&demo.disk)?;
    let u = AffineSubspace::new(vec![demo.line.a.to_vec()], vec![demo.line.b])?;
    let z0 = Point::new(demo.start.to_vec())?;
    [Method::Crm, Method::Map, Method::Drm]
        .into_iter()
        .map(|m| {
            let t = run(&k, &u, &z0, &config(m, demo.tol))?;
            Ok(Path {
                method: m.name().to_owned(),
                points: t.iterates.iter().map(|p| xy(p)).collect(),
                iterations: t.iterations,
                status: t.status.to_string(),
            })
        })
        .collect()
}

/// Product-space CRM, MAP and DRM for several disks. Each iterate is shown
/// through its diagonal projection, i.e. the mean of its blocks.
pub fn product_paths(demo: &ProductDemo) -> crm_core::Result<Vec<Path>> {
    let disks = demo
        .disks
        .iter()
        .map(disk)
        .collect::<crm_core::Result<Vec<_>>>()?;
    let m = disks.len();
    let w = ProductSet::new(disks)?;
    let x0 = Point::new(demo.start.to_vec())?;
    [Method::Crm, Method::Map, Method::Drm]
        .into_iter()
        .map(|method| {
            let t = run_prod(
                &w,
                &x0,
                &config(method, demo.tol),
                ProdOrdering::DiagonalFirst,
            )?;
            let points = t
                .iterates
                .iter()
                .map(|z| project_d(z, m).map(|d| xy(&d)))
                .collect::<crm_core::Result<_>>()?;
            Ok(Path {
                method: format!("{}-prod", method.name()),
                points,
                iterations: t.iterations,
                status: t.status.to_string(),
            })
        })
        .collect()
}

pub fn circle_through(points: &[Vec<f64>]) -> crm_core::Result<Circle> {
    let points = points
        .iter()
        .map(|p| Point::new(p.clone()))
        .collect::<crm_core::Result<Vec<_>>>()?;
    let c = circumcenter(&points)?;
    Ok(Circle {
        radius: c.center.distance(&points[0]),
        center: c.center.into_vec(),
    })
}

fn respond<I, O, F>(input: &str, f: F) -> Result<String, JsError>
where
    I: for<'de> Deserialize<'de>,
    O: Serialize,
    F: FnOnce(&I) -> crm_core::Result<O>,
{
    let parsed: I = serde_json::from_str(input)?;
    let out = f(&parsed)?;
    Ok(serde_json::to_string(&out)?)
}

#[wasm_bindgen(js_name = affinePaths)]
pub fn affine_paths_js(input: &str) -> Result<String, JsError> {
    respond(input, affine_paths)
}

#[wasm_bindgen(js_name = productPaths)]
pub fn product_paths_js(input: &str) -> Result<String, JsError> {
    respond(input, product_paths)
}

#[wasm_bindgen(js_name = circleThrough)]
pub fn circle_through_js(input: &str) -> Result<String, JsError> {
    respond(input, |p: &Vec<Vec<f64>>| circle_through(p))
}
