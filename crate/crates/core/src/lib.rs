pub mod analysis;
pub mod cli;
pub mod dressed;
pub mod error;
pub mod hamiltonian;
pub mod hilbert;
pub mod lindblad;
pub mod params;
pub mod scan;
pub mod semiclassical;

pub use error::{Error, Result};
