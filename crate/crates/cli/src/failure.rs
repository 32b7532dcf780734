use std::fmt;

/// Error carried to `main`: exit code plus a `error[kind]:` line.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: "usage",
            message: message.into(),
        }
    }

    pub fn runtime(kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            kind,
            message: message.into(),
        }
    }

    /// Invalid settings are usage errors.
    pub fn from_config(e: crossprune::Error) -> Self {
        Failure {
            code: 2,
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<crossprune::Error> for Failure {
    fn from(e: crossprune::Error) -> Self {
        let code = if matches!(e, crossprune::Error::InvalidConfig { .. }) { 2 } else { 1 };
        Failure {
            code,
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.kind, self.message)
    }
}
