pub mod cache;
pub mod eigenops;
pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod models;
pub mod pauli;
pub mod scalar;
pub mod spectral;
pub mod stats;
pub mod superop;
pub mod toy;

pub use error::{Error, Result};
pub use fixtures::{RandomRealization, RealizationTable};
pub use linalg::{CMat, C64};
pub use models::{ModelInstance, ModelSpec, RealizationSource};
pub use pauli::{BasisKind, OperatorVector, PauliBasis, PauliString, PauliSum};
pub use scalar::Real;
pub use spectral::{SpectralDecomposition, SpectralShape};
pub use superop::{SuperBasis, SuperOperator};
