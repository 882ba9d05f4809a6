pub mod error;
pub mod group;
pub mod ops;
pub mod semigroup;
pub mod star;
pub mod weyl;

pub use error::{Error, Result};
