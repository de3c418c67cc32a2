//! JSON formats for measures and deterministic serialization.
//!
//! Measure JSON:
//! `{"dimension": 2, "atoms": [{"point": [0, 1], "weight": 0.5}, ...]}` where
//! a weight is a number or `{"num": 1, "den": 3}`.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{json, Value};

use crate::error::{domain, Error, Result};
use crate::measures::{Atom, DiscreteMeasure};
use crate::norms::Vector;
use crate::projections::parse_vector;

/// Weight sums within this of one are accepted and renormalized.
pub const LOAD_MASS_TOL: f64 = 1e-9;

pub fn measure_from_json(text: &str) -> Result<DiscreteMeasure> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("measure: {e}")))?;
    measure_from_value(&value)
}

pub fn measure_from_value(value: &Value) -> Result<DiscreteMeasure> {
    let atoms = value
        .get("atoms")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("measure needs an \"atoms\" array".into()))?;
    if atoms.is_empty() {
        return domain("measure has no atoms");
    }
    let mut parsed = Vec::with_capacity(atoms.len());
    for a in atoms {
        let point = a
            .get("point")
            .ok_or_else(|| Error::Parse("atom needs a \"point\"".into()))
            .and_then(parse_vector)?;
        let weight = a
            .get("weight")
            .ok_or_else(|| Error::Parse("atom needs a \"weight\"".into()))
            .and_then(parse_weight)?;
        parsed.push((point, weight));
    }
    let dim = match value.get("dimension") {
        Some(d) => {
            d.as_u64()
                .ok_or_else(|| Error::Parse("\"dimension\" must be a positive integer".into()))? as usize
        }
        None => parsed[0].0.len(),
    };
    let total: f64 = parsed.iter().map(|(_, w)| *w).sum();
    if (total - 1.0).abs() > LOAD_MASS_TOL {
        return domain(format!("weights sum to {total}, not 1"));
    }
    let atoms = parsed.into_iter().map(|(x, w)| Atom::new(x, w / total)).collect();
    DiscreteMeasure::new(dim, atoms)
}

fn parse_weight(value: &Value) -> Result<f64> {
    if let Some(w) = value.as_f64() {
        return Ok(w);
    }
    let num = value.get("num").and_then(Value::as_f64);
    let den = value.get("den").and_then(Value::as_f64);
    match (num, den) {
        (Some(n), Some(d)) if d != 0.0 => Ok(n / d),
        (Some(_), Some(_)) => domain("fraction weight has a zero denominator"),
        _ => Err(Error::Parse(format!(
            "weight must be a number or {{num, den}}, got {value}"
        ))),
    }
}

pub fn measure_to_value(mu: &DiscreteMeasure) -> Value {
    let atoms: Vec<Value> = mu
        .atoms()
        .iter()
        .map(|a| json!({"point": vector_to_value(&a.point), "weight": a.weight}))
        .collect();
    json!({"dimension": mu.dim(), "atoms": atoms})
}

pub fn vector_to_value(v: &Vector) -> Value {
    Value::from(v.iter().copied().collect::<Vec<f64>>())
}

/// `%.17g` rendering of a finite float.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest.replace('.', "")),
        None => ("", mantissa.replace('.', "")),
    };
    if (-4..17).contains(&exp) {
        let s = if exp >= 0 {
            let split = exp as usize + 1;
            format!("{}.{}", &digits[..split], &digits[split..])
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        };
        let s = s.trim_end_matches('0').trim_end_matches('.');
        format!("{sign}{s}")
    } else {
        let m = format!("{}.{}", &digits[..1], &digits[1..]);
        let m = m.trim_end_matches('0').trim_end_matches('.');
        let esign = if exp < 0 { '-' } else { '+' };
        format!("{sign}{m}e{esign}{:02}", exp.abs())
    }
}

/// Pretty JSON with floats at 17 significant digits; NaN and infinities
/// become `null`.
struct Canonical(serde_json::ser::PrettyFormatter<'static>);

impl Formatter for Canonical {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(format_f64(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Deterministic text form: sorted keys, two-space indent, `%.17g` floats.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    // Going through `Value` sorts object keys (its map is ordered).
    let value = serde_json::to_value(value).expect("serializable");
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Canonical(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).expect("writing to a Vec cannot fail");
    String::from_utf8(out).expect("JSON is UTF-8")
}
