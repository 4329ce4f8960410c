//! Density codes for grayscale images.
//!
//! An image is turned into a probability field, and a fixed Halton sequence
//! is pushed through the inverse of its cumulative mapping. The result is an
//! ordered point set whose distribution follows the image intensity. Two such
//! codes are compared point-for-point after an optimal polynomial
//! registration, so the comparison is insensitive to the transformations
//! that map one code onto the other.
//!
//! ```
//! use dcode::{encoder, image_io, matcher, quasirandom};
//!
//! let img = image_io::GrayImage::from_fn(32, 32, |r, c| ((r as f64 - 16.0).powi(2) + (c as f64 - 12.0).powi(2)).sqrt())
//!     .unwrap();
//! let seq = quasirandom::halton(256, 2).unwrap();
//! let params = encoder::EncodeParams::default();
//! let code = encoder::encode_image(&img, image_io::Polarity::DarkOnLight, &seq, &params).unwrap();
//! assert_eq!(code.len(), 256);
//! let report = matcher::delta_median(&code, &code, 3).unwrap();
//! assert!(report.delta < 1e-9);
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod codefile;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod image_io;
pub mod matcher;
pub mod quasirandom;
pub mod sweep;

pub use encoder::{DensityCode, EncodeParams};
pub use error::{Error, Result};
pub use image_io::{GrayImage, Polarity};
