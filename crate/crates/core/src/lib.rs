#![no_std]
extern crate alloc;

pub mod error;
pub mod flows;
pub mod gaussian;
pub mod hurst;
pub mod index;
pub mod intrep;
pub mod linalg;
pub mod measure;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use hurst::HurstParam;
pub use index::{LeftNeighborhood, Rect, RectUnion};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
