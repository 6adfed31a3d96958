//! End-to-end acceptance suite. Runs without the libtest harness so that it
//! can print exactly one PASS/FAIL line per criterion.

use std::process::ExitCode;

use crm_core::bench::{
    bench_polyhedral_prod, bench_soc, BenchConfig, BenchMethod, BenchReport, RunRecord,
};
use crm_core::circumcenter::{circumcenter, crm_oracle};
use crm_core::point::{dot, norm};
use crm_core::product_space::{block_spread, run_prod};
use crm_core::{
    crm_step, drm_step, gen_soc_instance, map_step, run, AffineSubspace, ConvexSet,
    ConvexSetDescriptor, Error, Method, Point, ProdOrdering, ProductSet, SolverConfig, Status,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn normals(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn pt(v: Vec<f64>) -> Point {
    Point::new(v).unwrap()
}

/// Random affine subspace of codimension `rows` through `through`.
fn affine_through(rng: &mut impl Rng, through: &[f64], rows: usize) -> AffineSubspace {
    let a: Vec<Vec<f64>> = (0..rows).map(|_| normals(rng, through.len())).collect();
    let b = a.iter().map(|r| dot(r, through)).collect();
    AffineSubspace::new(a, b).unwrap()
}

fn one_step_hyperplanes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let n = rng.random_range(2..=50);
        let xbar = normals(&mut rng, n);
        let normal = normals(&mut rng, n);
        let h = ConvexSetDescriptor::hyperplane(normal.clone(), dot(&normal, &xbar)).unwrap();
        let rows = rng.random_range(1..n);
        let u = affine_through(&mut rng, &xbar, rows);
        let z0 = u
            .project(&pt(normals(&mut rng, n).iter().map(|x| 5.0 * x).collect()))
            .unwrap();
        let trace = run(&h, &u, &z0, &SolverConfig::new(Method::Crm))
            .map_err(|e| format!("case {case}: {e}"))?;
        if trace.status != Status::Converged || trace.iterations != 1 || trace.final_gap() >= 1e-10
        {
            return Err(format!(
                "case {case} (n={n}): {} after {} iterations, gap {:e}",
                trace.status,
                trace.iterations,
                trace.final_gap()
            ));
        }
        worst = worst.max(trace.final_gap());
    }
    Ok(format!(
        "200 triples, all 1 iteration, worst gap {worst:.1e}"
    ))
}

/// `K` containing `xbar`, drawn from the four set families in turn.
fn random_set(rng: &mut impl Rng, kind: usize, xbar: &[f64]) -> ConvexSetDescriptor {
    let n = xbar.len();
    match kind {
        0 => {
            let offset = normals(rng, n);
            let center: Vec<f64> = xbar.iter().zip(&offset).map(|(x, o)| x + o).collect();
            let radius = norm(&offset) * rng.random_range(1.0..2.0);
            ConvexSetDescriptor::ball(center, radius).unwrap()
        }
        1 => {
            let a = normals(rng, n);
            ConvexSetDescriptor::halfspace(a.clone(), dot(&a, xbar) + rng.random_range(0.0..1.0))
                .unwrap()
        }
        2 => ConvexSetDescriptor::second_order_cone(n).unwrap(),
        _ => {
            let lower = xbar
                .iter()
                .map(|x| x - rng.random_range(0.0..1.0))
                .collect();
            let upper = xbar
                .iter()
                .map(|x| x + rng.random_range(0.0..1.0))
                .collect();
            ConvexSetDescriptor::boxed(lower, upper).unwrap()
        }
    }
}

fn cone_point(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let u = normals(rng, n - 1);
    let mut x = vec![norm(&u) * (1.0 + rng.random_range(0.0..1.0))];
    x.extend(u);
    x
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut moved = 0;
    for case in 0..1000 {
        let kind = case % 4;
        let n = rng.random_range(2..=12);
        let xbar = if kind == 2 {
            cone_point(&mut rng, n)
        } else {
            normals(&mut rng, n)
        };
        let k = random_set(&mut rng, kind, &xbar);
        let rows = rng.random_range(1..n);
        let u = affine_through(&mut rng, &xbar, rows);
        let z = u
            .project(&pt(normals(&mut rng, n).iter().map(|x| 4.0 * x).collect()))
            .unwrap();
        let step = crm_step(&k, &u, &z).map_err(|e| format!("case {case}: {e}"))?;
        let oracle = crm_oracle(&k, &u, &z).map_err(|e| format!("case {case}: oracle {e}"))?;
        let err = step.distance(&oracle) / (1.0 + z.norm());
        if err > 1e-8 {
            return Err(format!(
                "case {case} (kind {kind}, n={n}): relative mismatch {err:e}"
            ));
        }
        worst = worst.max(err);
        moved += usize::from(step != z);
    }
    Ok(format!(
        "1000 cases ({moved} non-trivial), worst relative mismatch {worst:.1e}"
    ))
}

fn fejer(soc: &BenchReport, poly: &BenchReport) -> Outcome {
    let (a, b) = (soc.fejer.expect("audit on"), poly.fejer.expect("audit on"));
    let checks = a.checks + b.checks;
    let violations = a.violations + b.violations;
    let msg = format!(
        "{checks} checks over CRM and CRM-prod runs, {violations} violations, worst excess {:.1e}",
        a.worst_excess.max(b.worst_excess)
    );
    if violations == 0 && checks > 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn distance_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tested = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut seed = 0;
    while tested < 1000 {
        let n = 3 + (seed as usize % 38);
        let inst = gen_soc_instance(n, seed).unwrap();
        seed += 1;
        let (k, u, s) = (
            inst.cone(),
            inst.affine.as_ref().unwrap(),
            inst.certificate.as_ref().unwrap(),
        );
        for _ in 0..10 {
            let z = u
                .project(&pt(normals(&mut rng, n).iter().map(|x| 3.0 * x).collect()))
                .unwrap();
            let c = crm_step(k, u, &z).map_err(|e| e.to_string())?;
            let zm = map_step(k, u, &z).map_err(|e| e.to_string())?;
            let zd = drm_step(k, u, &z).map_err(|e| e.to_string())?;
            let scale = 1.0 + z.norm() + s.norm();
            let slack = 1e-9 * scale;
            let checks = [
                (c.distance(s) - zm.distance(s), "CRM vs MAP"),
                (zm.distance(s) - zd.distance(s), "MAP vs DRM"),
            ];
            // z_MAP = z + r (C(z) - z) with r in [0, 1]
            let dir = c.sub(&z);
            let step = zm.sub(&z);
            let r = if dir.norm() > 0.0 {
                dot(&step, &dir) / dot(&dir, &dir)
            } else {
                0.0
            };
            let on_segment: f64 = step
                .iter()
                .zip(dir.iter())
                .map(|(s, d)| (s - r * d).powi(2))
                .sum::<f64>()
                .sqrt();
            // z_MAP = (z + P_U R_K z) / 2
            let purk = u.project(&k.reflect(&z).unwrap()).unwrap();
            let midpoint = zm.distance(&z.midpoint(&purk));
            let identities = [
                (on_segment, "collinearity"),
                (-r, "r >= 0"),
                (r - 1.0, "r <= 1"),
                (midpoint, "midpoint"),
            ];
            for (excess, what) in checks.iter().chain(&identities) {
                let excess = if what.starts_with('r') {
                    excess * dir.norm()
                } else {
                    *excess
                };
                worst = worst.max(excess / scale);
                if excess > slack {
                    return Err(format!(
                        "{what} fails by {excess:e} (n={n}, instance {})",
                        inst.seed
                    ));
                }
            }
            tested += 1;
        }
    }
    Ok(format!(
        "{tested} points in U, worst scaled excess {worst:.1e}"
    ))
}

fn mean(report: &BenchReport, m: BenchMethod) -> f64 {
    report
        .stats_for(m)
        .and_then(|s| s.summary.as_ref())
        .map_or(f64::NAN, |s| s.mean)
}

fn max(report: &BenchReport, m: BenchMethod) -> usize {
    report
        .stats_for(m)
        .and_then(|s| s.summary.as_ref())
        .map_or(usize::MAX, |s| s.max)
}

fn table1(soc: &BenchReport) -> Outcome {
    let (crm, map, drm) = (
        mean(soc, BenchMethod::Crm),
        mean(soc, BenchMethod::Map),
        mean(soc, BenchMethod::Drm),
    );
    let crm_max = max(soc, BenchMethod::Crm);
    let msg = format!(
        "{} runs: CRM mean {crm:.3} max {crm_max}, MAP mean {map:.3} ({:.1}x), DRM mean {drm:.3} ({:.2}x), failures {}",
        soc.runs.len() / 3,
        map / crm,
        drm / crm,
        soc.failures()
    );
    let ok = soc.runs.len() == 3000
        && soc.failures() == 0
        && (3.0..=7.0).contains(&crm)
        && crm_max <= 10
        && map >= 10.0 * crm
        && drm >= 1.5 * crm;
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn table2(poly: &BenchReport, single: &BenchReport) -> Outcome {
    let (crm, map, drm) = (
        mean(poly, BenchMethod::CrmProd),
        mean(poly, BenchMethod::MapProd),
        mean(poly, BenchMethod::DrmProd),
    );
    let one = mean(single, BenchMethod::DrmProd) / mean(single, BenchMethod::CrmProd);
    let msg = format!(
        "{} runs: CRM-prod mean {crm:.2}, MAP-prod {map:.1} ({:.0}x), DRM-prod {drm:.2} ({:.2}x), failures {}; \
         single-instance reading DRM-prod/CRM-prod {one:.2}x (informational)",
        poly.runs.len() / 3,
        map / crm,
        drm / crm,
        poly.failures()
    );
    let ok = poly.failures() == 0 && crm <= 200.0 && map >= 10.0 * crm && drm >= 5.0 * crm;
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn crm_never_slower(soc: &BenchReport) -> Outcome {
    let by = |m: BenchMethod| {
        soc.runs
            .iter()
            .filter(move |r| r.method == m)
            .collect::<Vec<&RunRecord>>()
    };
    let (crm, map) = (by(BenchMethod::Crm), by(BenchMethod::Map));
    let mut ties = 0;
    let mut bad = Vec::new();
    for (c, m) in crm.iter().zip(&map) {
        assert_eq!(
            (c.instance_seed, c.start_seed),
            (m.instance_seed, m.start_seed)
        );
        ties += usize::from(c.iterations == m.iterations);
        if c.iterations > m.iterations {
            bad.push((c.instance_seed, c.start_seed));
        }
    }
    let msg = format!(
        "{} paired runs, {} violations, {ties} ties",
        crm.len(),
        bad.len()
    );
    if bad.is_empty() && crm.len() == 1000 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn two_ball_invariance() -> Outcome {
    let pairs = [
        ([-1.0, 0.0], 1.5, [1.0, 0.0], 1.5),
        ([-1.0, 0.0], 1.2, [1.0, 0.0], 1.0),
        ([0.0, 0.0], 2.0, [1.5, 1.5], 1.0),
    ];
    let starts = [[3.0, 2.5], [-4.0, 3.0], [0.0, -5.0], [6.0, 0.1]];
    let mut worst_d: f64 = 0.0;
    let mut worst_feas: f64 = 0.0;
    let mut iters = Vec::new();
    for (c1, r1, c2, r2) in pairs {
        let balls = vec![
            ConvexSetDescriptor::ball(c1.to_vec(), r1).unwrap(),
            ConvexSetDescriptor::ball(c2.to_vec(), r2).unwrap(),
        ];
        let w = ProductSet::new(balls.clone()).unwrap();
        for x0 in starts {
            let cfg = SolverConfig::new(Method::Crm).recording(true);
            let trace = run_prod(&w, &pt(x0.to_vec()), &cfg, ProdOrdering::DiagonalFirst)
                .map_err(|e| e.to_string())?;
            if trace.status != Status::Converged {
                return Err(format!(
                    "balls {c1:?}/{c2:?}, start {x0:?}: {}",
                    trace.status
                ));
            }
            for z in &trace.iterates {
                worst_d = worst_d.max(block_spread(z, 2));
            }
            let x = &trace.final_point[..2];
            for b in &balls {
                worst_feas = worst_feas.max(b.violation(x));
            }
            iters.push(trace.iterations);
        }
    }
    let msg = format!(
        "{} runs, max block spread {worst_d:.1e}, max ball violation {worst_feas:.1e}, iterations {iters:?}",
        iters.len()
    );
    if worst_d <= 1e-8 && worst_feas <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Distance from `c - p0` to the span of `p_i - p0`, by least squares.
fn hull_distance(points: &[Point], c: &Point) -> f64 {
    let n = c.dim();
    let q = points.len() - 1;
    if q == 0 {
        return c.distance(&points[0]);
    }
    let v = DMatrix::from_fn(n, q, |i, j| points[j + 1][i] - points[0][i]);
    let target = DVector::from_fn(n, |i, _| c[i] - points[0][i]);
    let svd = v.clone().svd(true, true);
    let coef = svd.solve(&target, 1e-12).unwrap();
    (v * coef - target).norm()
}

fn circumcenter_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_eq, mut worst_hull): (f64, f64) = (0.0, 0.0);
    let mut sets = 0;
    while sets < 10_000 {
        let dim = rng.random_range(1..=10);
        let q = rng.random_range(0..=3usize);
        if q > dim {
            continue;
        }
        let points: Vec<Point> = (0..=q).map(|_| pt(normals(&mut rng, dim))).collect();
        let res = circumcenter(&points)
            .map_err(|e| format!("generic set {sets} (dim {dim}, q {q}): {e}"))?;
        let scale = 1.0 + points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let radius = res.center.distance(&points[0]);
        let eq = points
            .iter()
            .map(|p| (p.distance(&res.center) - radius).abs())
            .fold(0.0, f64::max);
        let hull = hull_distance(&points, &res.center);
        worst_eq = worst_eq.max(eq / scale);
        worst_hull = worst_hull.max(hull / scale);
        if eq > 1e-8 * scale || hull > 1e-10 * scale {
            return Err(format!(
                "set {sets}: equidistance {eq:e}, hull distance {hull:e}"
            ));
        }
        sets += 1;
    }

    // Collinear and pairwise distinct: no circumcenter.
    let mut degenerate = 0;
    for _ in 0..500 {
        let dim = rng.random_range(1..=10);
        let a = normals(&mut rng, dim);
        let d = normals(&mut rng, dim);
        let mut ts: Vec<f64> = (0..rng.random_range(3..=4))
            .map(|_| rng.random_range(-3.0..3.0))
            .collect();
        ts.sort_by(f64::total_cmp);
        if ts.windows(2).any(|w| w[1] - w[0] < 0.1) {
            continue;
        }
        let points: Vec<Point> = ts
            .iter()
            .map(|t| pt(a.iter().zip(&d).map(|(a, d)| a + t * d).collect()))
            .collect();
        match circumcenter(&points) {
            Err(Error::DegenerateConfiguration { .. }) => degenerate += 1,
            other => return Err(format!("collinear distinct set accepted: {other:?}")),
        }
    }

    // Collinear with repeats, and concyclic dependent sets: circumcenter exists.
    for _ in 0..500 {
        let dim = rng.random_range(2..=10);
        let a = pt(normals(&mut rng, dim));
        let b = pt(normals(&mut rng, dim));
        circumcenter(&[a.clone(), b.clone(), b.clone(), a.clone()])
            .map_err(|e| format!("repeated pair rejected: {e}"))?;
        // Orthonormal pair spanning the circle's plane.
        let (mut e1, mut e2) = (normals(&mut rng, dim), normals(&mut rng, dim));
        let l1 = norm(&e1);
        e1.iter_mut().for_each(|x| *x /= l1);
        let c = dot(&e1, &e2);
        e2.iter_mut().zip(&e1).for_each(|(y, x)| *y -= c * x);
        let l2 = norm(&e2);
        e2.iter_mut().for_each(|x| *x /= l2);
        let points: Vec<Point> = (0..4)
            .map(|i| {
                let t = 1.3 * i as f64 + rng.random_range(0.0..0.5);
                let (co, si) = (t.cos(), t.sin());
                pt(a.iter()
                    .zip(e1.iter().zip(&e2))
                    .map(|(a, (x, y))| a + co * x + si * y)
                    .collect())
            })
            .collect();
        let res = circumcenter(&points).map_err(|e| format!("concyclic set rejected: {e}"))?;
        if res.center.distance(&a) > 1e-8 * (1.0 + a.norm()) {
            return Err("concyclic center is off".into());
        }
    }

    Ok(format!(
        "{sets} generic sets (worst equidistance {worst_eq:.1e}, hull {worst_hull:.1e}), \
         {degenerate} collinear-distinct sets all rejected, 1000 dependent-but-cospherical sets accepted"
    ))
}

fn main() -> ExitCode {
    let mut soc_cfg = BenchConfig::soc();
    soc_cfg.audit = true;
    let mut poly_cfg = BenchConfig::polyhedral();
    poly_cfg.instances = 10;
    poly_cfg.audit = true;
    let single_cfg = BenchConfig::polyhedral();

    let soc = bench_soc(&soc_cfg).expect("cone benchmark");
    let poly = bench_polyhedral_prod(&poly_cfg).expect("polyhedral benchmark");
    let single = bench_polyhedral_prod(&single_cfg).expect("single-instance polyhedral benchmark");

    let results: Vec<(&str, Outcome)> = vec![
        ("1 one-step hyperplane convergence", one_step_hyperplanes()),
        ("2 oracle equivalence", oracle_equivalence()),
        ("3 Fejer monotonicity", fejer(&soc, &poly)),
        ("4 CRM, MAP, DRM distance ordering", distance_ordering()),
        ("5 cone benchmark bands", table1(&soc)),
        ("6 product-space benchmark bands", table2(&poly, &single)),
        ("7 CRM <= MAP on every run", crm_never_slower(&soc)),
        ("8 two-ball CRM-prod D-invariance", two_ball_invariance()),
        ("9 circumcenter properties", circumcenter_suite()),
    ];

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(msg) => println!("PASS criterion {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
