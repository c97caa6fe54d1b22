//! Moment-SOS (Lasserre) relaxations of small polynomial optimization
//! problems.
//!
//! The crate is organised bottom-up:
//!
//! - [`poly`]: sparse multivariate polynomials over a graded monomial basis;
//! - [`conic`]: a homogeneous self-dual interior-point solver over products
//!   of PSD, nonnegative and free cones;
//! - [`relaxation`]: moment relaxations, truncated quadratic modules and
//!   their membership programs;
//! - [`exactness`]: exactness certificates, the cones of objectives with an
//!   exact relaxation, and a brute-force grid oracle;
//! - [`scan`]: angular scans and relaxation boundaries for planar problems,
//!   with CSV and SVG writers.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conic;
pub mod error;
pub mod exactness;
pub mod poly;
pub mod relaxation;
pub mod scan;

pub use error::{Error, Result};
pub use exactness::{Certifier, Classification, ExactnessCertificate, Tolerances};
pub use poly::{Monomial, Point, Polynomial};
pub use relaxation::{Constraint, MembershipResult, Pop, Sense, Verdict};
