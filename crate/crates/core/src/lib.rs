pub mod elliptic;
pub mod error;
pub mod identities;
pub mod matrixalg;
pub mod painleve;
pub mod report;
pub mod rmatrix;

pub use error::{Error, Result};
