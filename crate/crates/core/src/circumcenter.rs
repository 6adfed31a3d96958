//! Circumcenters of finite point lists, and the supporting-hyperplane
//! construction that characterizes a CRM step as a plain projection.

use crate::error::{Error, Result};
use crate::point::{dot, norm, Point};
use crate::sets::{AffineSubspace, ConvexSet, ConvexSetDescriptor};

/// Directions whose component orthogonal to the previous ones is below this
/// fraction of the largest direction are treated as dependent.
pub const INDEPENDENCE_TOL: f64 = 1e-10;

/// Largest accepted equidistance defect, relative to `1 + max pairwise distance`.
pub const EQUIDISTANCE_TOL: f64 = 1e-8;

/// Tolerance on `z in U` for the oracle, relative to `1 + ||z||`.
pub const ORACLE_AFFINE_TOL: f64 = 1e-10;

/// Below this relative gap `z` counts as a point of `K`.
pub const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CircumcenterResult {
    pub center: Point,
    /// `max_i | ||p_i - c|| - ||p_0 - c|| |`.
    pub residual: f64,
    /// Dimension of the affine hull that was used.
    pub basis_rank: usize,
}

/// Circumcenter of `points`: the point of their affine hull equidistant to all of them.
///
/// With `v_i = p_i - p_0`, the conditions `||c - p_i|| = ||c - p_0||` for
/// `c = p_0 + sum_j alpha_j v_j` are the Gram system `2 G alpha = d`,
/// `d_i = ||v_i||^2`. The `v_i` are orthogonalized one at a time (twice, for
/// stability) which yields the Cholesky factor of `G` directly, so the system
/// reduces to one forward substitution. Dependent directions are skipped;
/// their equations are then verified on the final center, and a violation
/// means no equidistant point exists.
pub fn circumcenter(points: &[Point]) -> Result<CircumcenterResult> {
    let origin = points.first().ok_or(Error::EmptyInput)?;
    let dim = origin.dim();
    for p in points {
        p.check_dim(dim)?;
    }

    let dirs: Vec<Point> = points[1..].iter().map(|p| p.sub(origin)).collect();
    let longest = dirs.iter().map(|v| v.norm()).fold(0.0, f64::max);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut coords = Vec::new();
    if longest > 0.0 {
        for v in &dirs {
            let mut w = v.to_vec();
            let mut r = vec![0.0; basis.len()];
            for _ in 0..2 {
                for (q, rj) in basis.iter().zip(r.iter_mut()) {
                    let c = dot(q, &w);
                    *rj += c;
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
            }
            let len = norm(&w);
            if len > INDEPENDENCE_TOL * longest {
                // y_k = (|v|^2 / 2 - sum_{j<k} r_j y_j) / r_kk
                let partial: f64 = r.iter().zip(&coords).map(|(rj, yj)| rj * yj).sum();
                coords.push((0.5 * dot(v, v) - partial) / len);
                w.iter_mut().for_each(|wi| *wi /= len);
                basis.push(w);
            }
        }
    }

    let mut center = origin.to_vec();
    for (q, y) in basis.iter().zip(&coords) {
        for (ci, qi) in center.iter_mut().zip(q) {
            *ci += y * qi;
        }
    }
    let center = Point::from_vec(center);

    let radius = origin.distance(&center);
    let residual = points
        .iter()
        .map(|p| (p.distance(&center) - radius).abs())
        .fold(0.0, f64::max);
    let spread = max_pairwise_distance(points);
    if !center.is_finite() || residual > EQUIDISTANCE_TOL * (1.0 + spread) {
        return Err(Error::DegenerateConfiguration { residual });
    }
    Ok(CircumcenterResult {
        center,
        residual,
        basis_rank: basis.len(),
    })
}

pub fn max_pairwise_distance(points: &[Point]) -> f64 {
    let mut best = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.max(p.distance(q));
        }
    }
    best
}

/// Result of [`supporting_hyperplane`].
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// `z` already lies in `K`.
    Contains,
    /// `{x : (z - P_K z)^T x = (z - P_K z)^T P_K z}`.
    Hyperplane(ConvexSetDescriptor),
}

/// The hyperplane through `P_K(z)` with normal `z - P_K(z)`.
pub fn supporting_hyperplane<K: ConvexSet + ?Sized>(k: &K, z: &Point) -> Result<Support> {
    let pk = k.project(z)?;
    let normal = z.sub(&pk);
    if normal.norm() <= SUPPORT_TOL * (1.0 + z.norm()) {
        return Ok(Support::Contains);
    }
    let offset = dot(&normal, &pk);
    Ok(Support::Hyperplane(ConvexSetDescriptor::hyperplane(
        normal.into_vec(),
        offset,
    )?))
}

/// Computes a CRM step without circumcenters: the projection of `z` onto
/// `H_z ∩ U`, obtained by appending the supporting-hyperplane equation to
/// the equations of `U`.
pub fn crm_oracle<K: ConvexSet + ?Sized>(k: &K, u: &AffineSubspace, z: &Point) -> Result<Point> {
    z.check_dim(u.dim())?;
    let pu = u.project(z)?;
    let distance = z.distance(&pu);
    if distance > ORACLE_AFFINE_TOL * (1.0 + z.norm()) {
        return Err(Error::NotInAffine { distance });
    }
    match supporting_hyperplane(k, z)? {
        Support::Contains => Ok(z.clone()),
        Support::Hyperplane(ConvexSetDescriptor::Hyperplane(h)) => {
            let stacked = u
                .with_equation(h.normal(), h.offset())
                .map_err(|e| match e {
                    Error::InconsistentSystem { .. } => Error::InconsistentIntersection,
                    other => other,
                })?;
            stacked.project(z)
        }
        Support::Hyperplane(_) => unreachable!("supporting_hyperplane returns a hyperplane"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn right_triangle() {
        let c = circumcenter(&[pt(&[0.0, 0.0]), pt(&[2.0, 0.0]), pt(&[0.0, 2.0])]).unwrap();
        assert!(c.center.distance(&pt(&[1.0, 1.0])) < 1e-15);
        assert_eq!(c.basis_rank, 2);
    }

    #[test]
    fn coincident_points() {
        let p = pt(&[1.5, -2.0, 3.0]);
        let c = circumcenter(&[p.clone(), p.clone(), p.clone()]).unwrap();
        assert_eq!(c.center, p);
        assert_eq!(c.basis_rank, 0);
        assert_eq!(circumcenter(std::slice::from_ref(&p)).unwrap().center, p);
    }

    #[test]
    fn collinear_distinct_is_degenerate() {
        let r = circumcenter(&[pt(&[0.0, 0.0]), pt(&[2.0, 0.0]), pt(&[4.0, 0.0])]);
        assert!(matches!(r, Err(Error::DegenerateConfiguration { .. })));
    }

    #[test]
    fn two_points_give_midpoint() {
        let c = circumcenter(&[pt(&[0.0, 0.0]), pt(&[2.0, 0.0])]).unwrap();
        assert_eq!(c.center.coords(), &[1.0, 0.0]);
    }

    #[test]
    fn repeated_reflection_collapses() {
        // {z, r, r}: the duplicate is dropped and the midpoint comes back.
        let c = circumcenter(&[pt(&[0.0, 4.0]), pt(&[2.0, 0.0]), pt(&[2.0, 0.0])]).unwrap();
        assert!(c.center.distance(&pt(&[1.0, 2.0])) < 1e-15);
        assert_eq!(c.basis_rank, 1);
    }

    #[test]
    fn empty_and_mismatched_input() {
        assert!(matches!(circumcenter(&[]), Err(Error::EmptyInput)));
        assert!(matches!(
            circumcenter(&[pt(&[0.0]), pt(&[0.0, 1.0])]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hyperplane_supports_ball() {
        let ball = ConvexSetDescriptor::ball(vec![0.0, 0.0], 1.0).unwrap();
        let z = pt(&[2.0, 1.0]);
        let Support::Hyperplane(ConvexSetDescriptor::Hyperplane(h)) =
            supporting_hyperplane(&ball, &z).unwrap()
        else {
            panic!("expected a hyperplane");
        };
        let s5 = 5f64.sqrt();
        let touch = [2.0 / s5, 1.0 / s5];
        // normal is parallel to (2, 1) and the plane passes through P_K(z)
        assert!((h.normal()[0] - 2.0 * h.normal()[1]).abs() < 1e-14);
        assert!(h.excess(&touch).abs() < 1e-14);
        assert!((h.offset() - norm(&touch) * h.normal().norm()).abs() < 1e-14);
    }

    #[test]
    fn hyperplane_of_halfspace_is_its_boundary() {
        let k = ConvexSetDescriptor::halfspace(vec![1.0, 0.0], 0.0).unwrap();
        let Support::Hyperplane(ConvexSetDescriptor::Hyperplane(h)) =
            supporting_hyperplane(&k, &pt(&[3.0, 5.0])).unwrap()
        else {
            panic!("expected a hyperplane");
        };
        assert_eq!(h.normal().coords(), &[3.0, 0.0]);
        assert_eq!(h.offset(), 0.0);
        assert!(h.excess(&[0.0, 5.0]).abs() < 1e-15);
    }

    #[test]
    fn interior_point_has_no_hyperplane() {
        let ball = ConvexSetDescriptor::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(
            supporting_hyperplane(&ball, &pt(&[0.5, 0.0])).unwrap(),
            Support::Contains
        );
    }

    #[test]
    fn oracle_ball_and_line() {
        let ball = ConvexSetDescriptor::ball(vec![0.0, 0.0], 1.0).unwrap();
        let line = AffineSubspace::new(vec![vec![0.0, 1.0]], vec![1.0]).unwrap();
        let got = crm_oracle(&ball, &line, &pt(&[2.0, 1.0])).unwrap();
        // 2x + y = sqrt(5) meets y = 1
        let expected = [(5f64.sqrt() - 1.0) / 2.0, 1.0];
        assert!(got.distance(&pt(&expected)) < 1e-14);
        assert!((got[0] - 0.6180).abs() < 1e-4);
    }

    #[test]
    fn oracle_fixed_points() {
        let k = ConvexSetDescriptor::halfspace(vec![0.0, 1.0], 0.0).unwrap();
        let axis = AffineSubspace::new(vec![vec![0.0, 1.0]], vec![0.0]).unwrap();
        let z = pt(&[3.0, 0.0]);
        assert_eq!(crm_oracle(&k, &axis, &z).unwrap(), z);
        assert!(matches!(
            crm_oracle(&k, &axis, &pt(&[3.0, 1.0])),
            Err(Error::NotInAffine { .. })
        ));
    }

    #[test]
    fn oracle_detects_empty_intersection() {
        // ball far above the x-axis: H_z is parallel to U
        let ball = ConvexSetDescriptor::ball(vec![0.0, 5.0], 1.0).unwrap();
        let axis = AffineSubspace::new(vec![vec![0.0, 1.0]], vec![0.0]).unwrap();
        assert!(matches!(
            crm_oracle(&ball, &axis, &pt(&[0.0, 0.0])),
            Err(Error::InconsistentIntersection)
        ));
    }
}
