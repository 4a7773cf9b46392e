//! singloc-core: singular loci, f-geodesics and Clarke differentials of
//! 1-Lipschitz "almost distance" fields on 2-D Finsler surfaces.
//!
//! The crate is organized bottom-up:
//! - [`metric`]: Finsler norms, fundamental tensors, spray coefficients;
//! - [`geodesic`]: exponential map, asymmetric distances, minimizers;
//! - [`march`]: grid fast-sweeping eikonal solver (the marching oracle);
//! - [`csg`]: closed sets with exact point-to-set distances;
//! - [`field`]: 1-Lipschitz scalar fields (distance fields, Busemann,
//!   horofunctions, sphere-limit fields, combinators);
//! - [`fgeod`]: f-geodesic certification, tracing, direction fans;
//! - [`singular`]: classification, locus extraction, intrinsic metric,
//!   local-tree verification;
//! - [`clarke`]: generalized differentials, critical values, level sets;
//! - [`scenario`]: shipped test geometries with exact oracles;
//! - [`export`]: CSV / PGM / SVG / JSON artifact writers.

pub mod clarke;
pub mod csg;
pub mod error;
pub mod export;
pub mod fgeod;
pub mod field;
pub mod geodesic;
pub mod geom;
pub mod march;
pub mod metric;
pub mod scenario;
pub mod singular;

pub use error::{Error, Result};
pub use geom::{Point2, SymMat2, Vec2, Window};
pub use metric::MetricField;
