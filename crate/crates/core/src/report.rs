//! Verdicts and residuals shared by the checkers.

use std::fmt;

/// Outcome of a numerical check. None of these is a proof: `Holds*`
/// verdicts mean no counterexample was found on the sampled data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    HoldsOnHorizon,
    HoldsOnSample,
    DivergenceConsistent,
    Fails,
    Inconclusive,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::HoldsOnHorizon => "holds-on-horizon",
            Verdict::HoldsOnSample => "holds-on-sample",
            Verdict::DivergenceConsistent => "divergence-consistent",
            Verdict::Fails => "fails",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fails)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A concrete point where a check failed.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub x: f64,
    pub value: f64,
    pub note: String,
}

/// Column-oriented numeric table, written out as CSV by the CLI.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub check: String,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    /// Estimated constants, e.g. `C`, `K`, `N0`, in insertion order.
    pub constants: Vec<(String, f64)>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn new(check: &str, verdict: Verdict) -> Self {
        ConditionReport {
            check: check.into(),
            verdict,
            witness: None,
            constants: Vec::new(),
            tables: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn set_constant(&mut self, name: &str, value: f64) {
        match self.constants.iter_mut().find(|(k, _)| k == name) {
            Some(slot) => slot.1 = value,
            None => self.constants.push((name.into(), value)),
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// Absolute residual of an identity together with the magnitude of the
/// terms that entered it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub abs: f64,
    pub scale: f64,
}

impl Residual {
    /// `abs / (1 + scale)`.
    pub fn rel(&self) -> f64 {
        self.abs / (1.0 + self.scale)
    }
}
