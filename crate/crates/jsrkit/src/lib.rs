//! Growth of products from a finite set of square matrices: joint spectral
//! radius bounds, extremal and Barabanov norms, finite-depth approximations
//! of the Mather set, stability of switched systems and optimal symbol ratios.

pub mod bounds;
pub mod cocycle;
pub mod error;
pub mod mather;
pub mod matrix;
pub mod norms;
pub mod ratio;
pub mod reducibility;
pub mod stability;
pub mod subadditive;
pub mod symbolic;

pub use error::{Error, ErrorKind, Result};
pub use matrix::{Matrix, MatrixSet, C64};
pub use symbolic::{PeriodicOrbit, Word, WordGraph};
