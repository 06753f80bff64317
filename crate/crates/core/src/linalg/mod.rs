//! Linear-algebra kernels written against [`crate::Scalar`].

pub mod cg;
pub mod dense;
pub mod envelope;
pub mod small;
pub mod sparse;

pub use small::SmallSym;
pub use sparse::Csr;
