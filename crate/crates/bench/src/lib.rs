//! Shared fixtures for the benchmarks.

use kyorbit::{Builtin, Nonlinearity};

pub fn soft_spring() -> Nonlinearity {
    Nonlinearity::builtin_alpha(Builtin::TanhSoft, -2.0).expect("valid builtin")
}

pub fn hard_spring() -> Nonlinearity {
    Nonlinearity::builtin_alpha(Builtin::CubicHard, 1.0).expect("valid builtin")
}
