use std::fmt::Display;

/// A command failure, reported as `error: <kind>: <message>` on one line.
#[derive(Debug)]
pub struct Failure {
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn new(kind: &'static str, message: impl Display) -> Self {
        Failure {
            kind,
            message: message.to_string(),
        }
    }

    pub fn line(&self) -> String {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        format!("error: {}: {}", self.kind, flat.join(" "))
    }
}

impl From<alodsim_core::Error> for Failure {
    fn from(e: alodsim_core::Error) -> Self {
        Failure::new(e.kind(), e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new("io", e)
    }
}

pub type CmdResult = Result<(), Failure>;
