//! Pulse-level simulation of molecular spin registers.
//!
//! The crate is organized in layers:
//!
//! * [`operator`] — dense complex operator algebra (products, tensor
//!   products, matrix exponentials, Hermitian eigendecomposition),
//! * [`spin`] — spin matrices for arbitrary half-integer spin, register
//!   descriptions, and tensor embedding,
//! * [`hamiltonians`] — builders that lower declarative physical terms
//!   (Zeeman, exchange, zero-field splitting, hyperfine, spin–photon,
//!   three-spin switch trimers) to operators,
//! * [`pulse`] — pulse segments and schedules, rotating-frame transforms,
//!   time-dependent propagation, and gate compilers,
//! * [`open_system`] — density matrices, Lindblad/Kraus noise dynamics,
//!   partial trace, projective measurement, bath-induced decay rates,
//! * [`qec`] — qubit and qudit error-correcting codes with
//!   Knill–Laflamme verification and memory-time experiments,
//! * [`algorithms`] — Suzuki–Trotter circuits, multilevel Grover search,
//!   spin–boson mappings, Jordan–Wigner operators, tunneling dynamics.
//!
//! # Unit conventions
//!
//! All Hamiltonians are stored in **linear-frequency** units (GHz): an
//! operator entry of 1.0 means h × 1 GHz of energy. Times are in ns, so
//! the propagator over time `t` is `U = exp(−i 2π H t)`. Magnetic fields
//! are in tesla, with the Bohr magneton fixed at
//! [`constants::MU_B`] GHz/T; wavenumber inputs convert through
//! [`constants::CM1_TO_GHZ`].
//!
//! Spin-z eigenbases are ordered by **descending** magnetic quantum
//! number, so index 0 of a spin-1/2 site is `|↑⟩ ≡ |0⟩`. Global phases
//! are preserved everywhere: a 2π rotation of a spin-1/2 really returns
//! −I, and tests rely on it.

pub mod algorithms;
pub mod constants;
pub mod hamiltonians;
pub mod open_system;
pub mod operator;
pub mod pulse;
pub mod qec;
pub mod spin;

pub use operator::Operator;
pub use spin::{SpinKind, SpinRegister, SpinSite};

/// Crate-wide error type: every fallible operation reports one of these.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A quantity violated its documented domain (spin not half-integer,
    /// negative duration, unnormalized amplitudes, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Matrix dimensions do not match the operation's requirements.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// An operation required a Hermitian operator but got something else.
    #[error("operator is not hermitian: max |A − A†| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },
    /// Site index outside the register.
    #[error("site index {index} out of range for register of {len} sites")]
    SiteOutOfRange { index: usize, len: usize },
    /// A gate compiler could not produce a schedule meeting its contract
    /// (unresolved transitions, bandwidth violations, ...).
    #[error("compilation failed: {0}")]
    Compilation(String),
    /// A numerical routine failed to converge or produced an invalid state.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Requested a measurement branch that has zero probability.
    #[error("zero-probability measurement branch: outcome {0}")]
    ZeroProbabilityBranch(usize),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
