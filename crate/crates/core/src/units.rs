//! Unit-suffixed quantities.
//!
//! Config files may write quantities as plain numbers (already SI) or as
//! strings with a decimal suffix: `"2GB"`, `"3 GB/s"`, `"3600s"`, `"150W"`.
//! Everything is normalized to bytes, bytes/s, seconds and watts at parse
//! time. Binary prefixes (`GiB`) are rejected so a config never mixes the two
//! conventions.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};
use thiserror::Error;

/// Physical dimension of a configured quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Bytes,
    Rate,
    Seconds,
    Watts,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Bytes => "bytes",
            Dimension::Rate => "bytes/s",
            Dimension::Seconds => "seconds",
            Dimension::Watts => "watts",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("cannot parse quantity {input:?}: {reason}")]
    Malformed { input: String, reason: String },
    #[error("quantity {input:?} has units of {found}, expected {expected}")]
    ConflictingUnits {
        input: String,
        found: Dimension,
        expected: Dimension,
    },
    #[error("quantity {input:?} uses a binary prefix; only decimal prefixes (KB, MB, GB, ...) are accepted")]
    BinaryPrefix { input: String },
}

const DECIMAL_PREFIXES: &[(&str, f64)] = &[
    ("", 1.0),
    ("K", 1e3),
    ("k", 1e3),
    ("M", 1e6),
    ("G", 1e9),
    ("T", 1e12),
    ("P", 1e15),
    ("E", 1e18),
];

fn prefix_scale(prefix: &str) -> Option<f64> {
    DECIMAL_PREFIXES
        .iter()
        .find(|(p, _)| *p == prefix)
        .map(|(_, s)| *s)
}

/// Splits `"2.5 GB/s"` into `(2.5, "GB/s")`.
fn split_number(input: &str) -> Result<(f64, &str), UnitError> {
    let s = input.trim();
    let end = s
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E')
                    && s[i + 1..]
                        .chars()
                        .next()
                        .is_some_and(|n| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(end);
    let value: f64 = num.parse().map_err(|_| UnitError::Malformed {
        input: input.to_string(),
        reason: format!("{num:?} is not a number"),
    })?;
    Ok((value, unit.trim()))
}

/// Classifies a unit suffix, returning its dimension and scale to SI.
fn classify(input: &str, unit: &str) -> Result<Option<(Dimension, f64)>, UnitError> {
    if unit.is_empty() {
        return Ok(None);
    }
    if unit.contains("iB") {
        return Err(UnitError::BinaryPrefix {
            input: input.to_string(),
        });
    }
    let time = match unit {
        "s" | "sec" => Some(1.0),
        "ms" => Some(1e-3),
        "min" => Some(60.0),
        "h" => Some(3600.0),
        _ => None,
    };
    if let Some(scale) = time {
        return Ok(Some((Dimension::Seconds, scale)));
    }
    if let Some(p) = unit.strip_suffix('W') {
        if let Some(scale) = prefix_scale(p) {
            return Ok(Some((Dimension::Watts, scale)));
        }
    }
    if let Some(p) = unit.strip_suffix("B/s") {
        if let Some(scale) = prefix_scale(p) {
            return Ok(Some((Dimension::Rate, scale)));
        }
    }
    if let Some(p) = unit.strip_suffix('B') {
        if let Some(scale) = prefix_scale(p) {
            return Ok(Some((Dimension::Bytes, scale)));
        }
    }
    Err(UnitError::Malformed {
        input: input.to_string(),
        reason: format!("unknown unit {unit:?}"),
    })
}

/// Parses a quantity string into SI units of the expected dimension.
///
/// A bare number is taken as already being in SI units. `"inf"` is accepted
/// for durations.
pub fn parse_quantity(input: &str, expected: Dimension) -> Result<f64, UnitError> {
    let trimmed = input.trim();
    if expected == Dimension::Seconds && matches!(trimmed, "inf" | "infinity" | "forever") {
        return Ok(f64::INFINITY);
    }
    let (value, unit) = split_number(trimmed)?;
    match classify(input, unit)? {
        None => Ok(value),
        Some((dim, scale)) if dim == expected => Ok(value * scale),
        Some((dim, _)) => Err(UnitError::ConflictingUnits {
            input: input.to_string(),
            found: dim,
            expected,
        }),
    }
}

struct QuantityVisitor(Dimension);

impl Visitor<'_> for QuantityVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a number or a unit-suffixed string in {}", self.0)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        parse_quantity(v, self.0).map_err(E::custom)
    }
}

fn deserialize_dim<'de, D: Deserializer<'de>>(d: D, dim: Dimension) -> Result<f64, D::Error> {
    d.deserialize_any(QuantityVisitor(dim))
}

fn serialize_si<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

macro_rules! quantity_module {
    ($name:ident, $dim:expr) => {
        #[doc = concat!("Serde adapter for `", stringify!($name), "` quantities.")]
        pub mod $name {
            use super::*;

            pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
                serialize_si(v, s)
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                deserialize_dim(d, $dim)
            }
        }
    };
}

quantity_module!(bytes, Dimension::Bytes);
quantity_module!(rate, Dimension::Rate);
quantity_module!(seconds, Dimension::Seconds);
quantity_module!(watts, Dimension::Watts);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_prefixes() {
        assert_eq!(parse_quantity("2GB", Dimension::Bytes).unwrap(), 2e9);
        assert_eq!(parse_quantity("512 GB", Dimension::Bytes).unwrap(), 512e9);
        assert_eq!(parse_quantity("3GB/s", Dimension::Rate).unwrap(), 3e9);
        assert_eq!(parse_quantity("3600s", Dimension::Seconds).unwrap(), 3600.0);
        assert_eq!(parse_quantity("2h", Dimension::Seconds).unwrap(), 7200.0);
        assert_eq!(parse_quantity("150W", Dimension::Watts).unwrap(), 150.0);
        assert_eq!(parse_quantity("1e3", Dimension::Bytes).unwrap(), 1000.0);
        assert_eq!(parse_quantity("1.5e1KB", Dimension::Bytes).unwrap(), 15000.0);
        assert!(parse_quantity("inf", Dimension::Seconds).unwrap().is_infinite());
    }

    #[test]
    fn rejects_binary_and_mismatched_units() {
        assert!(matches!(
            parse_quantity("4GiB", Dimension::Bytes),
            Err(UnitError::BinaryPrefix { .. })
        ));
        assert!(matches!(
            parse_quantity("2GB", Dimension::Rate),
            Err(UnitError::ConflictingUnits { .. })
        ));
        assert!(matches!(
            parse_quantity("10 parsecs", Dimension::Seconds),
            Err(UnitError::Malformed { .. })
        ));
        assert!(parse_quantity("GB", Dimension::Bytes).is_err());
    }
}
