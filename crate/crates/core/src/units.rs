//! Unit tags and exact conversions.
//!
//! Internally every time is in ns and every frequency-like quantity is an
//! angular rate in rad/ns. Boundaries (CLI, files) speak MHz/GHz and ns/µs/ms
//! and convert exactly once.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    MHz,
    GHz,
    RadPerNs,
    Ns,
    Us,
    Ms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Frequency,
    Time,
}

impl Unit {
    fn dimension(self) -> Dimension {
        match self {
            Unit::MHz | Unit::GHz | Unit::RadPerNs => Dimension::Frequency,
            Unit::Ns | Unit::Us | Unit::Ms => Dimension::Time,
        }
    }

    // value_in_base = value * scale; base is rad/ns or ns
    fn scale(self) -> f64 {
        match self {
            Unit::MHz => TAU * 1e-3,
            Unit::GHz => TAU,
            Unit::RadPerNs => 1.0,
            Unit::Ns => 1.0,
            Unit::Us => 1e3,
            Unit::Ms => 1e6,
        }
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "MHz" | "mhz" => Ok(Unit::MHz),
            "GHz" | "ghz" => Ok(Unit::GHz),
            "rad/ns" => Ok(Unit::RadPerNs),
            "ns" => Ok(Unit::Ns),
            "us" | "µs" | "μs" => Ok(Unit::Us),
            "ms" => Ok(Unit::Ms),
            other => Err(Error::Usage(format!("unknown unit tag '{other}'"))),
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::MHz => "MHz",
            Unit::GHz => "GHz",
            Unit::RadPerNs => "rad/ns",
            Unit::Ns => "ns",
            Unit::Us => "us",
            Unit::Ms => "ms",
        };
        f.write_str(s)
    }
}

/// Convert `value` between two units of the same dimension.
pub fn convert(value: f64, from: Unit, to: Unit) -> Result<f64> {
    if from.dimension() != to.dimension() {
        return Err(Error::Usage(format!("cannot convert {from} to {to}")));
    }
    if from == to {
        return Ok(value);
    }
    Ok(value * from.scale() / to.scale())
}

/// Cyclic frequency in MHz to angular rate in rad/ns.
#[inline]
pub fn mhz_to_rad_per_ns(mhz: f64) -> f64 {
    mhz * TAU * 1e-3
}

/// Angular rate in rad/ns to cyclic frequency in MHz.
#[inline]
pub fn rad_per_ns_to_mhz(rate: f64) -> f64 {
    rate / (TAU * 1e-3)
}
