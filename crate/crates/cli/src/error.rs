use serde::Serialize;

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", config_message(.origin, .path, .message))]
    Config {
        origin: String,
        path: String,
        message: String,
    },
    #[error("{context}: {message}")]
    Runtime { context: String, message: String },
}

fn config_message(origin: &str, path: &str, message: &str) -> String {
    let mut out = String::new();
    if !origin.is_empty() {
        out.push_str(origin);
        out.push_str(": ");
    }
    if !path.is_empty() && path != "." {
        out.push('`');
        out.push_str(path);
        out.push_str("`: ");
    }
    out.push_str(message);
    out
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<&'a str>,
    message: String,
}

impl CliError {
    pub fn config(origin: &str, path: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            origin: origin.to_string(),
            path: path.to_string(),
            message: message.into(),
        }
    }

    pub fn runtime(context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        CliError::Runtime {
            context: context.into(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Runtime { .. } => 3,
        }
    }

    /// One-line machine-readable description for stderr.
    pub fn to_json(&self) -> String {
        let (kind, path) = match self {
            CliError::Config { path, .. } => ("config", Some(path.as_str()).filter(|p| !p.is_empty() && *p != ".")),
            CliError::Runtime { .. } => ("runtime", None),
        };
        let body = ErrorJson {
            error: kind,
            exit_code: self.exit_code(),
            path,
            message: self.to_string(),
        };
        serde_json::to_string(&body).unwrap_or_else(|_| format!("{{\"error\":\"{kind}\"}}"))
    }
}

/// Model validation failures are configuration errors; everything else the
/// core reports happens while running.
pub fn from_core(context: &str, err: levitwin_core::Error) -> CliError {
    use levitwin_core::Error as E;
    match err {
        E::InvalidParameter { .. } | E::MissingInertia(_) | E::UnknownMode(_) => CliError::config("", context, err.to_string()),
        _ => CliError::runtime(context, err),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(CliError::config("a", "b", "c").exit_code(), 2);
        assert_eq!(CliError::runtime("a", "b").exit_code(), 3);
    }

    #[test]
    fn json_carries_path() {
        let v: serde_json::Value = serde_json::from_str(&CliError::config("f.toml", "chain.l_tp_h", "missing").to_json()).unwrap();
        assert_eq!(v["error"], "config");
        assert_eq!(v["path"], "chain.l_tp_h");
        assert_eq!(v["exit_code"], 2);
    }
}
