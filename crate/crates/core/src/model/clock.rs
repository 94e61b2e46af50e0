//! Serde helpers for time-of-day and duration fields.
//!
//! Accepted input forms are integer seconds or `"HH:MM"` / `"HH:MM:SS"`
//! strings. Output is always integer seconds.

use serde::de::{self, Deserializer, Visitor};
use serde::Serializer;
use std::fmt;

use super::Seconds;

/// Parses `"HH:MM"` or `"HH:MM:SS"` into seconds. Hours may exceed 23 so that
/// next-day times such as `"25:30"` are expressible.
pub fn parse_clock(text: &str) -> Option<Seconds> {
    let mut parts = text.trim().split(':');
    let h: i64 = parts.next()?.parse().ok()?;
    let m: i64 = parts.next()?.parse().ok()?;
    let s: i64 = match parts.next() {
        Some(p) => p.parse().ok()?,
        None => 0,
    };
    if parts.next().is_some() || h < 0 || !(0..60).contains(&m) || !(0..60).contains(&s) {
        return None;
    }
    Some(h * 3600 + m * 60 + s)
}

/// Formats seconds as `HH:MM:SS` (hours may exceed 23).
pub fn format_clock(t: Seconds) -> String {
    let sign = if t < 0 { "-" } else { "" };
    let t = t.abs();
    format!("{sign}{:02}:{:02}:{:02}", t / 3600, (t % 3600) / 60, t % 60)
}

struct ClockVisitor;

impl<'de> Visitor<'de> for ClockVisitor {
    type Value = Seconds;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("integer seconds or an \"HH:MM[:SS]\" string")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Seconds, E> {
        Ok(v)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Seconds, E> {
        i64::try_from(v).map_err(|_| E::custom("time value out of range"))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Seconds, E> {
        if v.fract() == 0.0 && v.is_finite() {
            Ok(v as i64)
        } else {
            Err(E::custom("time values must be whole seconds"))
        }
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Seconds, E> {
        parse_clock(v).ok_or_else(|| E::custom(format!("invalid clock string {v:?}")))
    }
}

pub fn serialize<S: Serializer>(t: &Seconds, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_i64(*t)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Seconds, D::Error> {
    d.deserialize_any(ClockVisitor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_forms() {
        assert_eq!(parse_clock("09:30"), Some(34_200));
        assert_eq!(parse_clock("14:30:15"), Some(52_215));
        assert_eq!(parse_clock("25:00"), Some(90_000));
        assert_eq!(parse_clock("9:75"), None);
        assert_eq!(parse_clock("nope"), None);
        assert_eq!(format_clock(34_200), "09:30:00");
    }
}
