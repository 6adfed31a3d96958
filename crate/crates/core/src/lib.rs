//! Projection methods for convex feasibility: the circumcentered-reflection
//! method (CRM), alternating projections (MAP) and Douglas–Rachford (DRM),
//! with a product-space reformulation for many-set intersections, seeded
//! instance generators and a benchmark harness.
//!
//! ```
//! use crm_core::{crm_step, AffineSubspace, ConvexSetDescriptor, Point};
//!
//! let ball = ConvexSetDescriptor::ball(vec![0.0, 0.0], 1.0).unwrap();
//! let line = AffineSubspace::new(vec![vec![0.0, 1.0]], vec![1.0]).unwrap();
//! let z = Point::new(vec![2.0, 1.0]).unwrap();
//! let next = crm_step(&ball, &line, &z).unwrap();
//! assert!((next[0] - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
//! ```

pub mod bench;
pub mod circumcenter;
pub mod error;
pub mod instances;
pub mod methods;
pub mod point;
pub mod product_space;
pub mod sets;

pub use circumcenter::{
    circumcenter, crm_oracle, supporting_hyperplane, CircumcenterResult, Support,
};
pub use error::{Error, Result};
pub use instances::{
    gen_polyhedral_instance, gen_soc_instance, gen_soc_instance_with, gen_start, read_problem,
    write_problem, ConeCertificate, InstanceKind, ProblemInstance, StartPoint,
};
pub use methods::{
    averaged_crm_step, crm_step, drm_step, gap, map_step, run, run_composite, serial_crm_step,
    IterationTrace, Method, SolverConfig, Status,
};
pub use point::Point;
pub use product_space::{
    crm_prod_step, drm_prod_step, lift, map_prod_step, prod_gap, project_d, project_w, run_prod,
    DiagonalSubspace, ProdOrdering, ProductSet,
};
pub use sets::{AffineSet, AffineSubspace, ConvexSet, ConvexSetDescriptor, FullSpace};
