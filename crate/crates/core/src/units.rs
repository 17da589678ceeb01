//! Unit-suffixed quantities as accepted by the config file and CLI flags.
//!
//! Every quantity is converted to SI on parse. Bare numbers are taken as SI
//! already. Frequencies written in Hz are cyclic; [`Dimension::AngularFrequency`]
//! multiplies them by 2π, while an explicit `rad/s` suffix is taken literally.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Atomic mass unit in kg.
pub const DALTON: f64 = 1.660_539_066_60e-27;
/// Elementary charge in C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity in F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    /// Cyclic rate in Hz (dark counts, signal rates).
    Rate,
    /// Angular frequency in rad/s, written in the file as cyclic Hz.
    AngularFrequency,
    Angle,
    Mass,
    Charge,
    Dimensionless,
}

impl Dimension {
    fn name(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Rate => "rate",
            Dimension::AngularFrequency => "frequency",
            Dimension::Angle => "angle",
            Dimension::Mass => "mass",
            Dimension::Charge => "charge",
            Dimension::Dimensionless => "dimensionless number",
        }
    }

    fn unit_scale(self, unit: &str) -> Option<f64> {
        let s = match (self, unit) {
            (Dimension::Length, "m") => 1.0,
            (Dimension::Length, "mm") => 1e-3,
            (Dimension::Length, "um" | "µm" | "μm") => 1e-6,
            (Dimension::Length, "nm") => 1e-9,
            (Dimension::Time, "s") => 1.0,
            (Dimension::Time, "ms") => 1e-3,
            (Dimension::Time, "us" | "µs" | "μs") => 1e-6,
            (Dimension::Time, "ns") => 1e-9,
            (Dimension::Time, "ps") => 1e-12,
            (Dimension::Rate, "Hz") => 1.0,
            (Dimension::Rate, "kHz") => 1e3,
            (Dimension::Rate, "MHz") => 1e6,
            (Dimension::AngularFrequency, "Hz") => TAU,
            (Dimension::AngularFrequency, "kHz") => TAU * 1e3,
            (Dimension::AngularFrequency, "MHz") => TAU * 1e6,
            (Dimension::AngularFrequency, "rad/s") => 1.0,
            (Dimension::Angle, "rad") => 1.0,
            (Dimension::Angle, "deg") => PI / 180.0,
            (Dimension::Angle, "pi") => PI,
            (Dimension::Mass, "kg") => 1.0,
            (Dimension::Mass, "u" | "Da") => DALTON,
            (Dimension::Charge, "C") => 1.0,
            (Dimension::Charge, "e") => ELEMENTARY_CHARGE,
            _ => return None,
        };
        Some(s)
    }
}

/// Raw value as written in a TOML file: a bare SI number or a string with a unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawQuantity {
    Number(f64),
    Text(String),
}

impl RawQuantity {
    pub fn to_si(&self, dim: Dimension) -> Result<f64, String> {
        match self {
            RawQuantity::Number(v) => Ok(*v),
            RawQuantity::Text(s) => parse_quantity(s, dim),
        }
    }
}

impl From<f64> for RawQuantity {
    fn from(v: f64) -> Self {
        RawQuantity::Number(v)
    }
}

impl From<&str> for RawQuantity {
    fn from(v: &str) -> Self {
        RawQuantity::Text(v.to_string())
    }
}

/// Parse `"<number> <unit>"` (space optional) into SI.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let t = text.trim();
    let split = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && i > 0 && t[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse number in {text:?}"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    dim.unit_scale(unit)
        .map(|s| value * s)
        .ok_or_else(|| format!("unit {unit:?} is not a valid {} unit", dim.name()))
}
