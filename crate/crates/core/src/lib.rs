//! Enumeration and classification of the periodic solutions of
//! `x'(t) = f(x(t), x(t-1))` for even-odd symmetric nonlinearities with
//! monotone delayed feedback.
//!
//! The pipeline: build a validated [`Nonlinearity`], sample the period map of
//! the associated planar system ([`periodmap`]), intersect it with the
//! realizable periods, solve for the amplitudes of the delay-equation orbits
//! and read off their Morse indices ([`orbit`]). The [`dde`] module verifies
//! the results independently by direct simulation and discretized Floquet
//! analysis.

pub mod bifurcation;
pub mod dde;
pub mod export;
pub mod expr;
pub mod nonlinearity;
pub mod ode;
pub mod orbit;
pub mod periodmap;
pub mod planar;
pub mod roots;

pub use dde::{HistorySegment, PeriodicSignal};
pub use expr::{Bindings, Expression};
pub use nonlinearity::{Builtin, Feedback, Nonlinearity, NonlinearityError, Source, SymmetryReport, ValidationGrid};
pub use ode::{DenseSolution, Tolerances};
pub use orbit::{KaplanYorkeSolution, OrbitRecord, OrbitSummary};
pub use periodmap::{Classification, PeriodMapTable, RealizablePeriod};
pub use planar::{PlanarState, ReturnTime};
