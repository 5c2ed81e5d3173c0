//! Structured text reports: key-value lines and CSV tables.

use std::fmt::Write;

use num_complex::Complex64 as C64;
use qschro::report::{ConditionReport, Table};

use crate::problem::decimal;

pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        decimal(x)
    } else {
        format!("{x:e}")
    }
}

pub fn cnum(z: C64) -> String {
    format!("{} {}", num(z.re), num(z.im))
}

#[derive(Default)]
pub struct Report {
    body: String,
}

impl Report {
    pub fn kv(&mut self, key: &str, value: impl AsRef<str>) {
        writeln!(self.body, "{key} = {}", value.as_ref()).unwrap();
    }

    pub fn real(&mut self, key: &str, x: f64) {
        self.kv(key, num(x));
    }

    pub fn complex(&mut self, key: &str, z: C64) {
        self.kv(key, cnum(z));
    }

    pub fn section(&mut self, name: &str) {
        writeln!(self.body, "\n[{name}]").unwrap();
    }

    pub fn table(&mut self, t: &Table) {
        self.csv(&t.name, &t.columns.iter().map(String::as_str).collect::<Vec<_>>(), &t.rows);
    }

    pub fn csv(&mut self, name: &str, columns: &[&str], rows: &[Vec<f64>]) {
        writeln!(self.body, "\n[table {name}]").unwrap();
        writeln!(self.body, "{}", columns.join(",")).unwrap();
        for r in rows {
            let cells: Vec<String> = r.iter().map(|x| num(*x)).collect();
            writeln!(self.body, "{}", cells.join(",")).unwrap();
        }
        writeln!(self.body, "[/table]").unwrap();
    }

    pub fn raw(&mut self, text: &str) {
        self.body.push_str(text);
        if !text.ends_with('\n') {
            self.body.push('\n');
        }
    }

    pub fn condition(&mut self, prefix: &str, rep: &ConditionReport) {
        self.kv(&format!("{prefix}.check"), &rep.check);
        self.kv(&format!("{prefix}.verdict"), rep.verdict.label());
        for (k, v) in &rep.constants {
            self.real(&format!("{prefix}.{k}"), *v);
        }
        if let Some(w) = &rep.witness {
            self.real(&format!("{prefix}.witness.x"), w.x);
            self.real(&format!("{prefix}.witness.value"), w.value);
            self.kv(&format!("{prefix}.witness.note"), &w.note);
        }
        for (i, n) in rep.notes.iter().enumerate() {
            self.kv(&format!("{prefix}.note.{i}"), n);
        }
        for t in &rep.tables {
            self.table(t);
        }
    }

    pub fn into_string(self) -> String {
        self.body
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(1.0), "1");
        assert_eq!(num(-0.25), "-0.25");
        assert_eq!(num(1e-12), "1e-12");
        assert_eq!(num(2.5e20), "2.5e20");
        assert_eq!(num(0.0), "0");
    }
}
