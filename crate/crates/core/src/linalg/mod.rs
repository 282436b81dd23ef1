//! Dense complex linear algebra, exact combinatorial matrix functions, and
//! the discrete Fourier transform used by the estimators and oracles.

mod combinatorics;
mod decomp;
mod dft;
mod matrix;

pub use combinatorics::{
    hafnian_exact, hafnian_exact_capped, permanent_exact, permanent_exact_capped,
    DEFAULT_MAX_HAFNIAN, DEFAULT_MAX_PERMANENT,
};
pub use decomp::{haar_random_unitary, takagi, TakagiFactors};
pub use dft::{forward_dft, inverse_dft};
pub use matrix::{require_unitary, unitarity_deviation, validate_unitary, ComplexMatrix, C64};
