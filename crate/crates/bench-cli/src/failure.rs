use std::fmt;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_ORACLE: i32 = 3;

/// A failure carrying the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad input: spec, flags, dataset contents. All problems are listed.
    Validation(Vec<String>),
    /// Something went wrong while running (I/O, numerical blow-up).
    Runtime(String),
    /// An oracle suite reported failing checks.
    Oracle(usize),
}

impl Failure {
    pub fn validation(msg: impl Into<String>) -> Self {
        Failure::Validation(vec![msg.into()])
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Runtime(_) => EXIT_RUNTIME,
            Failure::Oracle(_) => EXIT_ORACLE,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(problems) if problems.len() == 1 => {
                write!(f, "validation error: {}", problems[0])
            }
            Failure::Validation(problems) => {
                writeln!(f, "validation failed with {} problems:", problems.len())?;
                for p in problems {
                    writeln!(f, "  - {p}")?;
                }
                Ok(())
            }
            Failure::Runtime(msg) => write!(f, "runtime error: {msg}"),
            Failure::Oracle(n) => write!(f, "oracle suite failed: {n} check(s) did not pass"),
        }
    }
}

impl From<dcrbm::Error> for Failure {
    fn from(e: dcrbm::Error) -> Self {
        use dcrbm::Error as E;
        match e {
            E::Io { .. } | E::NonFinite(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Validation(vec![e.to_string()]),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(format!("serialization: {e}"))
    }
}

pub type CliResult<T> = Result<T, Failure>;
