//! Input domains for exploration.

use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use crate::minic::{Program, Type, Value};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("no domain for input `{0}`")]
    MissingDomain(String),
    #[error("`{0}` is not an input of the entry function")]
    UnknownInput(String),
}

/// Interval bounds for the entry function's inputs. An array parameter may be
/// bounded as a whole (`tab`) or per element (`tab[1]`); element bounds win.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Harness {
    pub entry: Option<String>,
    pub bounds: BTreeMap<String, (i64, i64)>,
}

impl Harness {
    pub fn new() -> Self {
        Harness::default()
    }

    pub fn with(mut self, name: &str, lo: i64, hi: i64) -> Self {
        self.bounds.insert(name.to_string(), (lo, hi));
        self
    }

    /// Parses lines `name lo hi`, an optional `entry name`, and `#` comments.
    pub fn parse(text: &str) -> Result<Harness, HarnessError> {
        let mut h = Harness::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: &str| HarnessError::Syntax { line: i + 1, message: message.to_string() };
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                ["entry", name] => h.entry = Some(name.to_string()),
                [name, lo, hi] => {
                    let lo = lo.parse().map_err(|_| err("lower bound is not an integer"))?;
                    let hi = hi.parse().map_err(|_| err("upper bound is not an integer"))?;
                    h.bounds.insert(name.to_string(), (lo, hi));
                }
                _ => return Err(err("expected `name lo hi` or `entry name`")),
            }
        }
        Ok(h)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(e) = &self.entry {
            let _ = writeln!(out, "entry {e}");
        }
        for (name, (lo, hi)) in &self.bounds {
            let _ = writeln!(out, "{name} {lo} {hi}");
        }
        out
    }

    /// Resolves the bounds against the entry function of `p`.
    pub fn domain(&self, p: &Program) -> Result<Domain, HarnessError> {
        let entry = p.entry_function();
        let mut vars = Vec::new();
        for param in &entry.params {
            match param.ty {
                Type::Int => {
                    let b = self.bounds.get(&param.name).ok_or_else(|| HarnessError::MissingDomain(param.name.clone()))?;
                    vars.push((param.name.clone(), *b));
                }
                Type::IntArray(n) => {
                    for k in 0..n {
                        let name = element_name(&param.name, k);
                        let b = self
                            .bounds
                            .get(&name)
                            .or_else(|| self.bounds.get(&param.name))
                            .ok_or_else(|| HarnessError::MissingDomain(name.clone()))?;
                        vars.push((name, *b));
                    }
                }
            }
        }
        for name in self.bounds.keys() {
            let known = entry.params.iter().any(|p| &p.name == name) || vars.iter().any(|(v, _)| v == name);
            if !known && !name.starts_with("nondet_") {
                return Err(HarnessError::UnknownInput(name.clone()));
            }
        }
        vars.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Domain::new(vars))
    }
}

pub fn element_name(array: &str, k: usize) -> String {
    format!("{array}[{k}]")
}

/// Finite product of integer intervals, in ascending input-name order. Index
/// `0..product()` enumerates assignments lexicographically, each input's
/// values taken smallest magnitude first (`0, 1, -1, 2, -2, ...`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    names: Vec<String>,
    lo: Vec<i64>,
    sizes: Vec<u64>,
    product: u64,
}

impl Domain {
    fn new(vars: Vec<(String, (i64, i64))>) -> Domain {
        let mut d = Domain { names: Vec::new(), lo: Vec::new(), sizes: Vec::new(), product: 1 };
        for (name, (lo, hi)) in vars {
            let size = if hi < lo { 0 } else { (hi as i128 - lo as i128 + 1).min(u64::MAX as i128) as u64 };
            d.names.push(name);
            d.lo.push(lo);
            d.sizes.push(size);
            d.product = d.product.saturating_mul(size);
        }
        d
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn bounds(&self, i: usize) -> (i64, i64) {
        (self.lo[i], self.lo[i] + self.sizes[i] as i64 - 1)
    }

    pub fn product(&self) -> u64 {
        self.product
    }

    pub fn is_empty(&self) -> bool {
        self.product == 0
    }

    /// Values of assignment number `idx`.
    pub fn decode_into<S: Scalar>(&self, mut idx: u64, out: &mut Vec<S>) {
        out.clear();
        out.resize(self.names.len(), S::zero());
        for i in (0..self.names.len()).rev() {
            let off = idx % self.sizes[i];
            idx /= self.sizes[i];
            out[i] = S::from_int(nth_value(self.lo[i], self.sizes[i], off));
        }
    }

    pub fn decode(&self, idx: u64) -> BTreeMap<String, i64> {
        let mut vals: Vec<i64> = Vec::new();
        self.decode_into(idx, &mut vals);
        self.names.iter().cloned().zip(vals).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = BTreeMap<String, i64>> + '_ {
        (0..self.product).map(|i| self.decode(i))
    }
}

/// The `k`-th value of `[lo, lo + size)` in magnitude order, positives
/// before negatives of equal magnitude.
fn nth_value(lo: i64, size: u64, k: u64) -> i64 {
    let hi = lo as i128 + size as i128 - 1;
    let (lo, k) = (lo as i128, k as i128);
    let v = if lo >= 0 {
        lo + k
    } else if hi <= 0 {
        hi - k
    } else {
        let m = hi.min(-lo);
        if k <= 2 * m {
            if k % 2 == 1 {
                (k + 1) / 2
            } else {
                -(k / 2)
            }
        } else if hi > m {
            k - m
        } else {
            m - k
        }
    };
    v as i64
}

/// Groups a flat assignment (`tab[0]`, ...) into interpreter inputs for `p`'s
/// entry function. Names that are not entry inputs (e.g. `nondet_*`) pass
/// through as scalars.
pub fn to_inputs<S: Scalar>(p: &Program, flat: &BTreeMap<String, i64>) -> BTreeMap<String, Value<S>> {
    let mut out = BTreeMap::new();
    let entry = p.entry_function();
    for param in &entry.params {
        match param.ty {
            Type::Int => {
                if let Some(v) = flat.get(&param.name) {
                    out.insert(param.name.clone(), Value::Int(S::from_int(*v)));
                }
            }
            Type::IntArray(n) => {
                let xs: Option<Vec<S>> =
                    (0..n).map(|k| flat.get(&element_name(&param.name, k)).map(|v| S::from_int(*v))).collect();
                if let Some(xs) = xs {
                    out.insert(param.name.clone(), Value::Array(xs));
                }
            }
        }
    }
    for (k, v) in flat {
        if !k.contains('[') && !out.contains_key(k) {
            out.insert(k.clone(), Value::Int(S::from_int(*v)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minic::parse;

    #[test]
    fn parse_and_resolve() {
        let h = Harness::parse("# search\nentry search\ntab 0 1\ntab[1] 5 5\nn 0 2\nval 0 1\n").unwrap();
        assert_eq!(h.entry.as_deref(), Some("search"));
        let p = parse("int search(int tab[2], int n, int val) { return 0; }").unwrap();
        let d = h.domain(&p).unwrap();
        assert_eq!(d.names(), ["n", "tab[0]", "tab[1]", "val"]);
        assert_eq!(d.product(), 3 * 2 * 2);
        assert_eq!(d.bounds(2), (5, 5));
        let all: Vec<_> = d.iter().collect();
        assert_eq!(all[0]["n"], 0);
        assert_eq!(all[1]["val"], 1);
        assert_eq!(all[11]["n"], 2);
    }

    #[test]
    fn errors() {
        let p = parse("int f(int a, int b) { return 0; }").unwrap();
        assert_eq!(Harness::new().with("a", 0, 1).domain(&p), Err(HarnessError::MissingDomain("b".into())));
        let h = Harness::new().with("a", 0, 1).with("b", 0, 1).with("c", 0, 1);
        assert_eq!(h.domain(&p), Err(HarnessError::UnknownInput("c".into())));
        assert!(matches!(Harness::parse("a 0"), Err(HarnessError::Syntax { line: 1, .. })));
        let empty = Harness::new().with("a", 1, 0).with("b", 0, 1).domain(&p).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn magnitude_order() {
        let vals = |lo, hi| {
            let p = parse("int f(int a) { return a; }").unwrap();
            let d = Harness::new().with("a", lo, hi).domain(&p).unwrap();
            d.iter().map(|m| m["a"]).collect::<Vec<_>>()
        };
        assert_eq!(vals(-1, 3), [0, 1, -1, 2, 3]);
        assert_eq!(vals(-3, 1), [0, 1, -1, -2, -3]);
        assert_eq!(vals(2, 4), [2, 3, 4]);
        assert_eq!(vals(-4, -2), [-2, -3, -4]);
        assert_eq!(vals(i64::MIN, i64::MIN + 1), [i64::MIN + 1, i64::MIN]);
    }

    #[test]
    fn text_round_trip() {
        let h = Harness::new().with("X", -4, 4).with("N", 0, 6);
        assert_eq!(Harness::parse(&h.to_text()).unwrap(), h);
    }
}
