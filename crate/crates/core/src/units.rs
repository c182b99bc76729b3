//! Quantities with explicit unit suffixes, as written in config files
//! (`"796 nm"`, `"3.5 mm"`, `"2.8 GHz/(nm·mW)"`).
//!
//! Every quantity is parsed into a canonical unit per dimension:
//! length nm, time ps, frequency Hz, power mW, brightness Hz/(nm·mW),
//! efficiency Hz/mW, nonlinearity pm/V, area μm², temperature °C, angle degrees.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Frequency,
    Power,
    Brightness,
    Efficiency,
    Nonlinearity,
    Area,
    Temperature,
    Angle,
    Dimensionless,
}

impl Dimension {
    pub fn canonical(self) -> &'static str {
        match self {
            Dimension::Length => "nm",
            Dimension::Time => "ps",
            Dimension::Frequency => "Hz",
            Dimension::Power => "mW",
            Dimension::Brightness => "Hz/(nm·mW)",
            Dimension::Efficiency => "Hz/mW",
            Dimension::Nonlinearity => "pm/V",
            Dimension::Area => "um^2",
            Dimension::Temperature => "degC",
            Dimension::Angle => "deg",
            Dimension::Dimensionless => "",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Frequency => "frequency",
            Dimension::Power => "power",
            Dimension::Brightness => "spectral brightness",
            Dimension::Efficiency => "efficiency",
            Dimension::Nonlinearity => "nonlinear coefficient",
            Dimension::Area => "area",
            Dimension::Temperature => "temperature",
            Dimension::Angle => "angle",
            Dimension::Dimensionless => "dimensionless",
        };
        f.write_str(name)
    }
}

/// A value already converted to the canonical unit of its dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub dim: Dimension,
}

fn prefix(p: &str) -> Option<f64> {
    Some(match p {
        "" => 1.0,
        "T" => 1e12,
        "G" => 1e9,
        "M" => 1e6,
        "k" => 1e3,
        "m" => 1e-3,
        "u" | "μ" | "µ" => 1e-6,
        "n" => 1e-9,
        "p" => 1e-12,
        "f" => 1e-15,
        _ => return None,
    })
}

/// Factor from `unit` (prefix + base symbol) to the SI base unit.
fn scaled(unit: &str, bases: &[&str]) -> Option<f64> {
    for base in bases {
        if let Some(p) = unit.strip_suffix(base) {
            if let Some(f) = prefix(p) {
                return Some(f);
            }
        }
    }
    None
}

fn normalize(unit: &str) -> String {
    unit.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '·' | '⋅' | '*' => '.',
            '²' => '2',
            _ => c,
        })
        .collect::<String>()
        .replace("^2", "2")
        .replace("cps", "Hz")
}

/// Map a unit string to (dimension, factor into canonical unit).
fn unit_factor(raw: &str) -> Option<(Dimension, f64)> {
    let u = normalize(raw);
    if u.is_empty() || u == "1" {
        return Some((Dimension::Dimensionless, 1.0));
    }
    match u.as_str() {
        "%" => return Some((Dimension::Dimensionless, 0.01)),
        "degC" | "°C" | "C" => return Some((Dimension::Temperature, 1.0)),
        "deg" | "°" => return Some((Dimension::Angle, 1.0)),
        "rad" => return Some((Dimension::Angle, 180.0 / std::f64::consts::PI)),
        _ => {}
    }
    // brightness: X Hz / (Y m . Z W) in any order of the two denominators
    if let Some((num, den)) = u.split_once('/') {
        let den = den.trim_start_matches('(').trim_end_matches(')');
        let fnum = scaled(num, &["Hz"]);
        if let Some(fnum) = fnum {
            let parts: Vec<&str> = den.split(['.', '/']).collect();
            match parts.as_slice() {
                [w] => {
                    let fw = scaled(w, &["W"])?;
                    return Some((Dimension::Efficiency, fnum / fw * 1e-3));
                }
                [a, b] => {
                    let (fl, fw) = match (scaled(a, &["m"]), scaled(b, &["W"])) {
                        (Some(fl), Some(fw)) => (fl, fw),
                        _ => (scaled(b, &["m"])?, scaled(a, &["W"])?),
                    };
                    return Some((Dimension::Brightness, fnum / (fl * 1e9) / (fw * 1e3)));
                }
                _ => return None,
            }
        }
        if den == "V" {
            let fm = scaled(num, &["m"])?;
            return Some((Dimension::Nonlinearity, fm * 1e12));
        }
        return None;
    }
    if let Some(area) = u.strip_suffix('2') {
        let fm = scaled(area, &["m"])?;
        return Some((Dimension::Area, fm * fm * 1e12));
    }
    if let Some(f) = scaled(&u, &["Hz"]) {
        return Some((Dimension::Frequency, f));
    }
    if let Some(f) = scaled(&u, &["W"]) {
        return Some((Dimension::Power, f * 1e3));
    }
    if let Some(f) = scaled(&u, &["s"]) {
        return Some((Dimension::Time, f * 1e12));
    }
    if let Some(f) = scaled(&u, &["m"]) {
        return Some((Dimension::Length, f * 1e9));
    }
    None
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let split = s
            .char_indices()
            .find(|&(i, c)| {
                !(c.is_ascii_digit()
                    || c == '.'
                    || c == '+'
                    || c == '-'
                    || ((c == 'e' || c == 'E')
                        && s[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+')))
            })
            .map(|(i, _)| i)
            .unwrap_or(s.len());
        let (num, unit) = s.split_at(split);
        let value: f64 = num
            .parse()
            .map_err(|_| Error::Parse(format!("cannot read a number from {s:?}")))?;
        let (dim, factor) =
            unit_factor(unit).ok_or_else(|| Error::Parse(format!("unknown unit {:?} in {s:?}", unit.trim())))?;
        Ok(Quantity {
            value: value * factor,
            dim,
        })
    }
}

impl Quantity {
    pub fn expect(self, dim: Dimension) -> Result<f64> {
        if self.dim == dim {
            Ok(self.value)
        } else {
            Err(Error::invalid(
                "unit",
                format!("expected a {dim} ({}), found a {}", dim.canonical(), self.dim),
            ))
        }
    }
}

/// Parse `s` and require the given dimension, returning the canonical value.
pub fn parse(s: &str, dim: Dimension) -> Result<f64> {
    s.parse::<Quantity>()?.expect(dim)
}

macro_rules! unit_newtype {
    ($name:ident, $dim:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
        pub struct $name(pub f64);

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                parse(&s, $dim).map($name).map_err(serde::de::Error::custom)
            }
        }

        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&format!("{} {}", self.0, $dim.canonical()))
            }
        }
    };
}

unit_newtype!(Nm, Dimension::Length);
unit_newtype!(Ps, Dimension::Time);
unit_newtype!(Hz, Dimension::Frequency);
unit_newtype!(MilliWatt, Dimension::Power);
unit_newtype!(Brightness, Dimension::Brightness);
unit_newtype!(HzPerMw, Dimension::Efficiency);
unit_newtype!(PmPerV, Dimension::Nonlinearity);
unit_newtype!(Um2, Dimension::Area);
unit_newtype!(Celsius, Dimension::Temperature);
unit_newtype!(Degrees, Dimension::Angle);

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lengths() {
        assert_relative_eq!(parse("796 nm", Dimension::Length).unwrap(), 796.0);
        assert_relative_eq!(parse("3.5 mm", Dimension::Length).unwrap(), 3.5e6);
        assert_relative_eq!(parse("2.1 um", Dimension::Length).unwrap(), 2100.0, max_relative = 1e-12);
        assert_relative_eq!(parse("2.1μm", Dimension::Length).unwrap(), 2100.0, max_relative = 1e-12);
    }

    #[test]
    fn times_and_rates() {
        assert_relative_eq!(parse("90 ns", Dimension::Time).unwrap(), 90_000.0);
        assert_relative_eq!(parse("600 s", Dimension::Time).unwrap(), 6e14);
        assert_relative_eq!(parse("3e5 cps", Dimension::Frequency).unwrap(), 3e5);
        assert_relative_eq!(parse("17 kHz", Dimension::Frequency).unwrap(), 1.7e4);
    }

    #[test]
    fn compound_units() {
        assert_relative_eq!(parse("2.8 GHz/(nm·mW)", Dimension::Brightness).unwrap(), 2.8e9, max_relative = 1e-12);
        assert_relative_eq!(parse("2.8 GHz/mW/nm", Dimension::Brightness).unwrap(), 2.8e9, max_relative = 1e-12);
        assert_relative_eq!(parse("175 GHz/mW", Dimension::Efficiency).unwrap(), 1.75e11, max_relative = 1e-12);
        assert_relative_eq!(parse("524 kHz/mW", Dimension::Efficiency).unwrap(), 5.24e5, max_relative = 1e-12);
        assert_relative_eq!(parse("188 nW", Dimension::Power).unwrap(), 1.88e-4, max_relative = 1e-12);
        assert_relative_eq!(parse("14 pm/V", Dimension::Nonlinearity).unwrap(), 14.0, max_relative = 1e-12);
        assert_relative_eq!(parse("1.5 um^2", Dimension::Area).unwrap(), 1.5, max_relative = 1e-12);
        assert_relative_eq!(parse("0.9 μm²", Dimension::Area).unwrap(), 0.9, max_relative = 1e-12);
        assert_relative_eq!(parse("13.8 %", Dimension::Dimensionless).unwrap(), 0.138, max_relative = 1e-12);
        assert_relative_eq!(parse("25 degC", Dimension::Temperature).unwrap(), 25.0);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let err = parse("796 nm", Dimension::Time).unwrap_err();
        assert!(err.to_string().contains("expected a time"));
        assert!(parse("796 furlong", Dimension::Length).is_err());
        assert!(parse("nm", Dimension::Length).is_err());
    }

    #[test]
    fn exponents_are_not_units() {
        assert_relative_eq!(parse("4.4e-5", Dimension::Dimensionless).unwrap(), 4.4e-5);
        assert_relative_eq!(parse("1.88e-4 mW", Dimension::Power).unwrap(), 1.88e-4);
    }
}
