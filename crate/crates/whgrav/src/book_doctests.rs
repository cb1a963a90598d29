//! Compiles and runs every Rust code block in the guide (`book/src`) as a
//! doctest, so the book cannot drift out of sync with the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub struct Introduction;

#[doc = include_str!("../../../book/src/contours.md")]
pub struct Contours;

#[doc = include_str!("../../../book/src/families.md")]
pub struct Families;

#[doc = include_str!("../../../book/src/factorization.md")]
pub struct Factorization;

#[doc = include_str!("../../../book/src/deformations.md")]
pub struct Deformations;

#[doc = include_str!("../../../book/src/metric.md")]
pub struct Metric;

#[doc = include_str!("../../../book/src/verification.md")]
pub struct Verification;

#[doc = include_str!("../../../book/src/cli.md")]
pub struct Cli;
