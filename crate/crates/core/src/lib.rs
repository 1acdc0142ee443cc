//! Numerical laboratory for Anosov representations of free groups in `SL(d, R)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`words`]: reduced words, spheres, Gromov products and shadow cylinders.
//! * [`functionals`]: signatures, separated pairs, the Falconer and Lyapunov
//!   functionals on the Weyl chamber, types and the entropy-gap combinatorics.
//! * [`matrixops`]: singular values, boundary maps, flags, eigen-splittings,
//!   projector metrics and the Iwasawa cocycle.
//! * [`representation`]: a representation of a free group given by generator matrices.
//! * [`flagcoords`]: compatible splittings, `Nil(V)` charts and the linearised action.
//! * [`walks`]: exact convolutions, entropy rates and Monte-Carlo Lyapunov exponents.
//! * [`dimensions`]: limit-set sampling, box counting, pressure curves and
//!   theorem-level diagnostics.

pub mod dimensions;
pub mod error;
pub mod flagcoords;
pub mod functionals;
pub mod matrixops;
pub mod representation;
pub mod rng;
pub mod walks;
pub mod words;

pub use error::{Error, Result};
pub use functionals::{SeparatedPairs, Signature, TypeOrder};
pub use matrixops::{Flag, Splitting, Subspace, UnimodularMatrix, WeylVector};
pub use representation::Representation;
pub use words::{Cylinder, GeneratorSet, Word};
