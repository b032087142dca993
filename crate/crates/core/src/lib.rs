//! Global energy-conservative solutions of the λ-family equations
//!
//! ```text
//! u_t − u_txx + (λ+3) u^{λ+1} u_x = (λ+2) u^λ u_x u_xx + u^{λ+1} u_xxx
//! ```
//!
//! (Camassa–Holm for λ = 0, Novikov for λ = 1), computed through wave breaking
//! by integrating a semilinear system in characteristic coordinates `(T, Y)`
//! and mapping the result back to physical space.
//!
//! The pipeline is:
//!
//! 1. [`transform`] relabels the initial profile `u₀(x)` by the characteristic
//!    coordinate `Y` and builds the initial [`CharState`] `(u, v, ξ, x)`.
//! 2. [`nonlocal`] evaluates the exponential-kernel fields `P, P_x, Q, Q_x`
//!    with an O(N) two-sweep recurrence (and an O(N²) reference path).
//! 3. [`evolve`] advances the state with classical RK4.
//! 4. [`diagnostics`] monitors the conserved energy, the higher-order balance
//!    law, the `u_Y` and `x_Y` identities and the a-priori bounds.
//! 5. [`reconstruct`] maps snapshots back to `u(t, x)`, splits the energy
//!    measure into its absolutely continuous part and atoms, and measures the
//!    Hölder exponent at cusps.

pub mod config;
pub mod diagnostics;
pub mod evolve;
pub mod exec;
pub mod model;
pub mod nonlocal;
pub mod output;
pub mod reconstruct;
pub mod scenario;
pub mod study;
pub mod transform;

pub use diagnostics::DiagnosticsReport;
pub use evolve::{run, RunConfig, RunResult, Trajectory};
pub use exec::Execution;
pub use model::{CharGrid, CharState, ModelParams, NonlocalFields};
pub use nonlocal::NonlocalMethod;
pub use transform::InitialData;
