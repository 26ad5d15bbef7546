//! Rate, distortion and leakage tradeoffs for single-server lossy weakly-private
//! information retrieval.
//!
//! The crate covers finite file sizes (an LP over response functions of the
//! database) as well as the infinite-file-size limit, plus tools to build,
//! compose and simulate concrete schemes.

pub mod asymptotic;
pub mod compressor;
pub mod error;
pub mod figures;
pub mod lp;
pub mod numeric;
pub mod ratedist;
pub mod response_enum;
pub mod scheme;
pub mod source_coding;

pub use error::{Error, Result};
pub use numeric::{Rational, Scalar};
