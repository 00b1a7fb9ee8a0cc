//! Continuous-variable telecloning.
//!
//! Gaussian phase-space simulation in the `[x, p] = i/2` convention, the
//! multiuser channel states that let one sender distribute approximate
//! clones to `M` receivers, the Bell-detection protocol (closed form and
//! Monte Carlo), and a genetic search over general Gaussian circuits for
//! the channel with the least squeezing.

pub mod error;
pub mod exec;
pub mod gaussian;
pub mod interferometer;
pub mod linalg;
pub mod montecarlo;
pub mod mqc;
pub mod optimizer;
pub mod protocol;
pub mod symplectic;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
pub use gaussian::{gaussian_fidelity, GaussianState, HomodyneOutcome, Quadrature, Readout};
pub use mqc::{MqcSpec, SymmetricMqcSpec};
pub use optimizer::{CircuitGenome, SearchConfig, SearchResult};
pub use protocol::{GaussianChannel, InputSpec, TelecloneReport, TelecloneSetup};
pub use symplectic::SymplecticTransform;

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
