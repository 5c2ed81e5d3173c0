//! Problem-file schema, validation and the normalized echo.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use qschro::PiecewisePoly;
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// A real read from a JSON number or a decimal string.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Num(pub f64);

/// Shortest round-trip decimal text.
pub fn decimal(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    let s = format!("{x:?}");
    s.strip_suffix(".0").map(str::to_owned).unwrap_or(s)
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&decimal(self.0))
    }
}

struct NumVisitor;

impl Visitor<'_> for NumVisitor {
    type Value = Num;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a finite number or decimal string")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
        if v.is_finite() {
            Ok(Num(v))
        } else {
            Err(E::custom("number is not finite"))
        }
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
        Ok(Num(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
        Ok(Num(v as f64))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
        let x = f64::from_str(v.trim()).map_err(|_| E::custom(format!("not a decimal number: {v:?}")))?;
        self.visit_f64(x)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Num, D::Error> {
        d.deserialize_any(NumVisitor)
    }
}

/// A complex number: a real, or `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cx(pub C64);

impl Serialize for Cx {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.im == 0.0 {
            return Num(self.0.re).serialize(s);
        }
        let mut seq = s.serialize_seq(Some(2))?;
        seq.serialize_element(&Num(self.0.re))?;
        seq.serialize_element(&Num(self.0.im))?;
        seq.end()
    }
}

struct CxVisitor;

impl<'de> Visitor<'de> for CxVisitor {
    type Value = Cx;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a number or a pair [re, im]")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Cx, E> {
        NumVisitor.visit_f64(v).map(|n| Cx(C64::new(n.0, 0.0)))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Cx, E> {
        Ok(Cx(C64::new(v as f64, 0.0)))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Cx, E> {
        Ok(Cx(C64::new(v as f64, 0.0)))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Cx, E> {
        NumVisitor.visit_str(v).map(|n| Cx(C64::new(n.0, 0.0)))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Cx, A::Error> {
        let re: Num = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
        let im: Num = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
        if seq.next_element::<Num>()?.is_some() {
            return Err(de::Error::invalid_length(3, &self));
        }
        Ok(Cx(C64::new(re.0, im.0)))
    }
}

impl<'de> Deserialize<'de> for Cx {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Cx, D::Error> {
        d.deserialize_any(CxVisitor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TaskName {
    Solve,
    Eig,
    Bracket,
    Form,
    CheckA,
    CheckB,
    Probe,
    Verify,
}

impl TaskName {
    pub fn label(&self) -> &'static str {
        match self {
            TaskName::Solve => "solve",
            TaskName::Eig => "eig",
            TaskName::Bracket => "bracket",
            TaskName::Form => "form",
            TaskName::CheckA => "check-a",
            TaskName::CheckB => "check-b",
            TaskName::Probe => "probe",
            TaskName::Verify => "verify",
        }
    }
}

/// Piecewise polynomial in powers of the global `x`. Jumps follow from the
/// pieces; when listed they are checked against them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    #[serde(default)]
    pub breakpoints: Vec<Num>,
    pub pieces: Vec<Vec<Cx>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<Vec<Cx>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<PieceSpec>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<PieceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<PieceSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tols {
    pub atol: Num,
    pub rtol: Num,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideName {
    Direct,
    Adjoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    pub x: Num,
    pub y0: Cx,
    pub y1: Cx,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<SideName>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSpec {
    pub left: [Cx; 2],
    pub right: [Cx; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum SearchSpec {
    Scan { lo: Num, hi: Num, points: usize },
    Newton { seeds: Vec<Cx> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub delta: Num,
    pub intervals: Vec<(i64, Num, Num)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutoffKindName {
    #[serde(rename = "thmA")]
    ThmA,
    #[serde(rename = "thmA-rho")]
    ThmARho,
    #[serde(rename = "thmB")]
    ThmB,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub kind: CutoffKindName,
    pub n: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskName>,
    pub coefficients: Coefficients,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tols>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[Num; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Cx>,
    /// Spectral parameter of the adjoint solution in `bracket`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_v: Option<Cx>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Initial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_v: Option<Initial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<BcSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSpec>,
    /// `[center, plateau, ramp]` per test function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bumps: Option<Vec<[Num; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<PieceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<CutoffSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tmax: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<Num>>,
    /// Run the null-space probe after `check-a` or `check-b`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

pub fn parse(text: &str) -> Result<Problem, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Parse(e.to_string()))
}

pub fn validation(field: &str, msg: impl fmt::Display) -> Failure {
    Failure::Validation(format!("{field}: {msg}"))
}

impl PieceSpec {
    pub fn build(&self, field: &str) -> Result<PiecewisePoly, Failure> {
        let breaks: Vec<f64> = self.breakpoints.iter().map(|b| b.0).collect();
        if let Some(k) = breaks.windows(2).position(|w| w[0] >= w[1]) {
            return Err(validation(
                &format!("{field}.breakpoints"),
                format!("not strictly increasing at index {} ({} >= {})", k + 1, breaks[k], breaks[k + 1]),
            ));
        }
        if self.pieces.len() != breaks.len() + 1 {
            return Err(validation(
                &format!("{field}.pieces"),
                format!("{} breakpoints need {} pieces, got {}", breaks.len(), breaks.len() + 1, self.pieces.len()),
            ));
        }
        let pieces = self.pieces.iter().map(|p| p.iter().map(|c| c.0).collect()).collect();
        let f = PiecewisePoly::from_global(breaks.clone(), pieces).map_err(|e| validation(field, e))?;
        if let Some(jumps) = &self.jumps {
            if jumps.len() != breaks.len() {
                return Err(validation(
                    &format!("{field}.jumps"),
                    format!("expected {} entries, got {}", breaks.len(), jumps.len()),
                ));
            }
            for (k, (x, j)) in breaks.iter().zip(jumps).enumerate() {
                let got = f.jump_at(*x);
                if (got - j.0).norm() > 1e-12 * (1.0 + got.norm()) {
                    return Err(validation(
                        &format!("{field}.jumps[{k}]"),
                        format!("listed {} but the pieces jump by {got} at x = {x}", j.0),
                    ));
                }
            }
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_from_strings_and_pairs() {
        let c: Cx = serde_json::from_str(r#"["1.5", -2]"#).unwrap();
        assert_eq!(c.0, C64::new(1.5, -2.0));
        let c: Cx = serde_json::from_str(r#""0.1""#).unwrap();
        assert_eq!(c.0, C64::new(0.1, 0.0));
        assert!(serde_json::from_str::<Num>(r#""abc""#).is_err());
        assert_eq!(serde_json::to_string(&Num(0.1)).unwrap(), r#""0.1""#);
        assert_eq!(serde_json::to_string(&Num(-2.0)).unwrap(), r#""-2""#);
    }

    #[test]
    fn unknown_keys_rejected() {
        let r = parse(r#"{"coefficients": {}, "colour": 1}"#);
        assert!(matches!(r, Err(Failure::Parse(_))));
        let r = parse(r#"{"coefficients": {"q": {"pieces": [[]]}}}"#);
        assert!(matches!(r, Err(Failure::Parse(_))));
    }

    #[test]
    fn decreasing_breakpoints_named() {
        let p = parse(r#"{"coefficients": {"Q": {"breakpoints": [1, 0], "pieces": [[], [], []]}}}"#).unwrap();
        match p.coefficients.q.unwrap().build("coefficients.Q") {
            Err(Failure::Validation(m)) => assert!(m.starts_with("coefficients.Q.breakpoints"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn listed_jumps_checked() {
        let ok = r#"{"breakpoints": [0], "pieces": [[], [-2]], "jumps": [-2]}"#;
        let spec: PieceSpec = serde_json::from_str(ok).unwrap();
        assert!(spec.build("Q").is_ok());
        let bad = r#"{"breakpoints": [0], "pieces": [[], [-2]], "jumps": [2]}"#;
        let spec: PieceSpec = serde_json::from_str(bad).unwrap();
        assert!(matches!(spec.build("Q"), Err(Failure::Validation(_))));
    }
}
