use std::fmt;

use thiserror::Error;

/// Errors raised by the planning, estimation and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input failed a range or consistency check.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    /// The optimization problem has no feasible integer design.
    #[error("infeasible {constraint}: {message}")]
    Infeasible { constraint: String, message: String },

    /// A data or configuration file could not be parsed.
    #[error("{}", ParseDisplay { source_name, row, message })]
    Parse {
        source_name: String,
        row: Option<usize>,
        message: String,
    },

    /// A bounded computation ran past its wall-clock allowance.
    #[error("computation exceeded its time budget of {seconds} s")]
    TimeBudget { seconds: f64 },
}

struct ParseDisplay<'a> {
    source_name: &'a str,
    row: &'a Option<usize>,
    message: &'a str,
}

impl fmt::Display for ParseDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.row {
            Some(row) => write!(f, "{} row {}: {}", self.source_name, row, self.message),
            None => write!(f, "{}: {}", self.source_name, self.message),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn infeasible(constraint: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Infeasible {
            constraint: constraint.into(),
            message: message.into(),
        }
    }

    pub fn parse(source_name: impl Into<String>, row: Option<usize>, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            row,
            message: message.into(),
        }
    }

    /// Prefixes the field path of validation and infeasibility errors, so
    /// that an error raised for `sigma_p` inside a plot becomes `plot.sigma_p`.
    pub fn at(self, prefix: &str) -> Self {
        let join = |inner: String| {
            if inner.is_empty() {
                prefix.to_string()
            } else {
                format!("{prefix}.{inner}")
            }
        };
        match self {
            Error::Validation { field, message } => Error::Validation {
                field: join(field),
                message,
            },
            Error::Infeasible {
                constraint,
                message,
            } => Error::Infeasible {
                constraint: join(constraint),
                message,
            },
            other => other,
        }
    }

    /// Dotted path of the offending input, when the error has one.
    pub fn field_path(&self) -> Option<&str> {
        match self {
            Error::Validation { field, .. } => Some(field),
            Error::Infeasible { constraint, .. } => Some(constraint),
            _ => None,
        }
    }
}

/// Rejects NaN and infinities.
pub(crate) fn finite(field: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::validation(field, format!("must be a finite number, got {value}")))
    }
}

pub(crate) fn nonnegative(field: &str, value: f64) -> Result<f64> {
    finite(field, value)?;
    if value < 0.0 {
        return Err(Error::validation(field, format!("must be >= 0, got {value}")));
    }
    Ok(value)
}

pub(crate) fn positive(field: &str, value: f64) -> Result<f64> {
    finite(field, value)?;
    if value <= 0.0 {
        return Err(Error::validation(field, format!("must be > 0, got {value}")));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixes_nest() {
        let err = Error::validation("sigma_p", "too big").at("plot").at("request");
        assert_eq!(err.field_path(), Some("request.plot.sigma_p"));
    }

    #[test]
    fn parse_error_names_row() {
        let err = Error::parse("a.csv", Some(3), "bad number");
        assert_eq!(err.to_string(), "a.csv row 3: bad number");
    }

    #[test]
    fn rejects_non_finite() {
        assert!(finite("x", f64::NAN).is_err());
        assert!(finite("x", f64::INFINITY).is_err());
        assert!(positive("x", 0.0).is_err());
        assert!(nonnegative("x", -1e-300).is_err());
    }
}
