use std::fmt;

/// Error classes with distinct exit codes.
#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Model(String),
    Artifact(String),
    Verify(Vec<String>),
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Parse(_) => 2,
            Failure::Model(_) => 3,
            Failure::Artifact(_) => 4,
            Failure::Verify(_) => 5,
            Failure::Other(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Parse(m) => write!(f, "parse error: {m}"),
            Failure::Model(m) => write!(f, "model error: {m}"),
            Failure::Artifact(m) => write!(f, "artifact error: {m}"),
            Failure::Verify(fails) => {
                write!(f, "{} verification check(s) failed:", fails.len())?;
                for name in fails {
                    write!(f, "\n  FAIL {name}")?;
                }
                Ok(())
            }
            Failure::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<metastable::Error> for Failure {
    fn from(e: metastable::Error) -> Self {
        match e {
            metastable::Error::Parse(m) => Failure::Parse(m),
            e if e.is_parse() => Failure::Parse(e.to_string()),
            metastable::Error::Model(m) => Failure::Model(m),
            other => Failure::Other(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

pub type CliResult<T> = Result<T, Failure>;
