use alloc::string::String;
use core::fmt;

/// One problem found while checking a scenario, tagged with the field path
/// it concerns (e.g. `stations[3].capacity_c`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SimError {
    /// The scenario failed validation; every violation is listed.
    InvalidScenario(alloc::vec::Vec<ConfigError>),
    /// An internal invariant was breached during the run. The engine stops
    /// instead of continuing with corrupted state.
    InvariantBreach { frame: u64, detail: String },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidScenario(errors) => {
                write!(f, "invalid scenario ({} problem(s))", errors.len())?;
                for e in errors {
                    write!(f, "\n  {e}")?;
                }
                Ok(())
            }
            SimError::InvariantBreach { frame, detail } => {
                write!(f, "invariant breach in frame {frame}: {detail}")
            }
        }
    }
}
