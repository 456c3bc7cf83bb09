use std::fmt;
use std::io;

use kyorbit::dde::DdeError;
use kyorbit::expr::ExprError;
use kyorbit::orbit::OrbitError;
use kyorbit::periodmap::PeriodMapError;
use kyorbit::planar::PlanarError;
use kyorbit::NonlinearityError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Validation,
    Numerical,
    Usage,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub module: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Usage, module: "cli", message: message.into() }
    }

    pub fn validation(module: &'static str, message: impl Into<String>) -> Self {
        CliError { kind: Kind::Validation, module, message: message.into() }
    }

    pub fn numerical(module: &'static str, message: impl Into<String>) -> Self {
        CliError { kind: Kind::Numerical, module, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Validation => 1,
            Kind::Numerical => 2,
            Kind::Usage => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.module, self.message)
    }
}

impl From<NonlinearityError> for CliError {
    fn from(e: NonlinearityError) -> Self {
        let module = match e {
            NonlinearityError::Expr(ExprError::Syntax { .. } | ExprError::UnknownFunction { .. }) => "expr",
            _ => "nonlinearity",
        };
        CliError::validation(module, e.to_string())
    }
}

impl From<ExprError> for CliError {
    fn from(e: ExprError) -> Self {
        CliError::validation("expr", e.to_string())
    }
}

impl From<PlanarError> for CliError {
    fn from(e: PlanarError) -> Self {
        CliError::numerical("planar", e.to_string())
    }
}

impl From<PeriodMapError> for CliError {
    fn from(e: PeriodMapError) -> Self {
        match e {
            PeriodMapError::LocallyConstantMap => CliError::validation("periodmap", e.to_string()),
            PeriodMapError::InvalidGrid(_) => CliError::usage(e.to_string()),
            PeriodMapError::Planar(e) => e.into(),
        }
    }
}

impl From<OrbitError> for CliError {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::PeriodMap(e) => e.into(),
            OrbitError::Planar(e) => e.into(),
            other => CliError::numerical("orbit", other.to_string()),
        }
    }
}

impl From<DdeError> for CliError {
    fn from(e: DdeError) -> Self {
        match e {
            DdeError::InvalidMesh(_) | DdeError::InvalidSpan(_) => CliError::usage(e.to_string()),
            DdeError::NonFiniteHistory(_) | DdeError::Field(_) => CliError::validation("dde", e.to_string()),
            other => CliError::numerical("dde", other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::numerical("io", e.to_string())
    }
}
