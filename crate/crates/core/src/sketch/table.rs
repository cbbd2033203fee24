use std::fmt::Write as _;

use super::hash::{Buckets, HashFamily, PRIME};
use crate::error::{param, Error, Result};

/// Equal-width partition of `[lo, hi)` into `k` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalMap {
    lo: f64,
    hi: f64,
    k: usize,
}

/// Where a value landed relative to the partition range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Inside,
    ClampedLow,
    ClampedHigh,
}

impl IntervalMap {
    pub fn new(lo: f64, hi: f64, k: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(param(format!("interval range [{lo}, {hi}) is empty or not finite")));
        }
        if k == 0 {
            return Err(param("need at least one interval"));
        }
        Ok(Self { lo, hi, k })
    }

    /// Range inferred from a calibration prefix: the lower end is 0 for
    /// nonnegative data and 1.5x the minimum otherwise; the upper end is 1.5x
    /// the maximum (or 0 when the maximum is not positive).
    pub fn from_calibration(values: &[f64], k: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(param("cannot infer a sketch range from no data"));
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = if min >= 0.0 { 0.0 } else { 1.5 * min };
        let mut hi = if max > 0.0 { 1.5 * max } else { 0.0 };
        if hi <= lo {
            hi = lo + 1.0;
        }
        Self::new(lo, hi, k)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.k as f64
    }

    /// Zero-based interval holding `y`, clamping outside values to the ends.
    pub fn locate(&self, y: f64) -> (usize, Placement) {
        if y < self.lo {
            return (0, Placement::ClampedLow);
        }
        if y >= self.hi {
            return (self.k - 1, Placement::ClampedHigh);
        }
        let idx = ((y - self.lo) / self.width()) as usize;
        (idx.min(self.k - 1), Placement::Inside)
    }

    /// Midpoint of zero-based interval `k`.
    pub fn midpoint(&self, k: usize) -> f64 {
        self.lo + (k as f64 + 0.5) * self.width()
    }

    /// Right edge of zero-based interval `k`.
    pub fn upper_edge(&self, k: usize) -> f64 {
        if k + 1 == self.k {
            self.hi
        } else {
            self.lo + (k + 1) as f64 * self.width()
        }
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.k).map(|k| self.midpoint(k)).collect()
    }
}

/// Count-Min sketch over interval keys `0..K_int`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMinTable {
    hashes: HashFamily,
    counts: Vec<u64>,
    n: u64,
    range: Option<IntervalMap>,
    clamped_low: u64,
    clamped_high: u64,
}

impl CountMinTable {
    /// Sketch over raw integer keys.
    pub fn new(hashes: HashFamily) -> Self {
        let cells = hashes.d() * hashes.v();
        Self {
            hashes,
            counts: vec![0; cells],
            n: 0,
            range: None,
            clamped_low: 0,
            clamped_high: 0,
        }
    }

    /// Sketch over real values discretized by `range`.
    pub fn with_range(hashes: HashFamily, range: IntervalMap) -> Result<Self> {
        if range.len() != hashes.k_int() {
            return Err(param(format!(
                "{} intervals but hash family covers {} keys",
                range.len(),
                hashes.k_int()
            )));
        }
        let mut t = Self::new(hashes);
        t.range = Some(range);
        Ok(t)
    }

    pub fn d(&self) -> usize {
        self.hashes.d()
    }

    pub fn v(&self) -> usize {
        self.hashes.v()
    }

    pub fn k_int(&self) -> usize {
        self.hashes.k_int()
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn hashes(&self) -> &HashFamily {
        &self.hashes
    }

    pub fn range(&self) -> Option<&IntervalMap> {
        self.range.as_ref()
    }

    pub fn clamp_counts(&self) -> (u64, u64) {
        (self.clamped_low, self.clamped_high)
    }

    /// Row `j` of the counter matrix.
    pub fn row(&self, j: usize) -> &[u64] {
        let v = self.v();
        &self.counts[j * v..(j + 1) * v]
    }

    /// Adds one occurrence of `key`: one cell per row.
    pub fn increment_key(&mut self, key: usize) -> Result<()> {
        if key >= self.k_int() {
            return Err(param(format!("key {key} outside 0..{}", self.k_int())));
        }
        let v = self.v();
        for j in 0..self.d() {
            let b = self.hashes.bucket(j, key);
            self.counts[j * v + b] += 1;
        }
        self.n += 1;
        Ok(())
    }

    /// Adds a real value; values outside the range go to the end intervals.
    pub fn update(&mut self, y: f64) -> Result<Placement> {
        let range = self
            .range
            .ok_or_else(|| param("sketch was built without a value range"))?;
        let (key, placement) = range.locate(y);
        match placement {
            Placement::ClampedLow => self.clamped_low += 1,
            Placement::ClampedHigh => self.clamped_high += 1,
            Placement::Inside => {}
        }
        self.increment_key(key)?;
        Ok(placement)
    }

    /// Row-wise minimum estimate of the count of `key`.
    pub fn estimate(&self, key: usize) -> u64 {
        let v = self.v();
        (0..self.d())
            .map(|j| self.counts[j * v + self.hashes.bucket(j, key)])
            .min()
            .unwrap_or(0)
    }

    pub fn estimates(&self) -> Vec<u64> {
        (0..self.k_int()).map(|k| self.estimate(k)).collect()
    }

    /// Clears counters, keeping the hash family and range.
    pub fn clear(&mut self) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        self.n = 0;
        self.clamped_low = 0;
        self.clamped_high = 0;
    }

    /// Elementwise sum with a sketch that shares hashes and range.
    pub fn merge(&mut self, other: &CountMinTable) -> Result<()> {
        if self.hashes != other.hashes || self.range != other.range {
            return Err(param("sketches differ in hash family or range"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n += other.n;
        self.clamped_low += other.clamped_low;
        self.clamped_high += other.clamped_high;
        Ok(())
    }

    /// Flat text dump: header fields, hash rows, then counter rows.
    pub fn to_text(&self) -> String {
        let mut out = String::from("countmin,1\n");
        let _ = writeln!(out, "d,{}", self.d());
        let _ = writeln!(out, "v,{}", self.v());
        let _ = writeln!(out, "k_int,{}", self.k_int());
        let _ = writeln!(out, "n,{}", self.n);
        let _ = writeln!(out, "clamped,{},{}", self.clamped_low, self.clamped_high);
        match &self.range {
            Some(r) => {
                let _ = writeln!(out, "range,{:?},{:?}", r.lo(), r.hi());
            }
            None => out.push_str("range,none\n"),
        }
        match &self.hashes.buckets {
            Buckets::Universal(c) => {
                let _ = writeln!(out, "hash,universal,{PRIME}");
                for (a, b) in c {
                    let _ = writeln!(out, "{a},{b}");
                }
            }
            Buckets::Table(t) => {
                out.push_str("hash,table\n");
                for row in t {
                    out.push_str(&join(row.iter()));
                    out.push('\n');
                }
            }
        }
        out.push_str("counts\n");
        for j in 0..self.d() {
            out.push_str(&join(self.row(j).iter()));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parameter(format!("malformed sketch dump: {what}"));
        let mut lines = text.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| bad(what));
        if next("magic")? != "countmin,1" {
            return Err(bad("magic"));
        }
        let field = |line: &str, key: &str| -> Result<Vec<String>> {
            let mut parts = line.split(',');
            if parts.next() != Some(key) {
                return Err(bad(key));
            }
            Ok(parts.map(str::to_owned).collect())
        };
        let num = |s: &str, what: &str| s.parse::<u64>().map_err(|_| bad(what));
        let d = num(&field(next("d")?, "d")?.concat(), "d")? as usize;
        let v = num(&field(next("v")?, "v")?.concat(), "v")? as usize;
        let k_int = num(&field(next("k_int")?, "k_int")?.concat(), "k_int")? as usize;
        let n = num(&field(next("n")?, "n")?.concat(), "n")?;
        let clamped = field(next("clamped")?, "clamped")?;
        if clamped.len() != 2 {
            return Err(bad("clamped"));
        }
        let (cl, ch) = (num(&clamped[0], "clamped")?, num(&clamped[1], "clamped")?);
        let range_f = field(next("range")?, "range")?;
        let range = match range_f.as_slice() {
            [none] if none == "none" => None,
            [lo, hi] => {
                let lo = lo.parse::<f64>().map_err(|_| bad("range"))?;
                let hi = hi.parse::<f64>().map_err(|_| bad("range"))?;
                Some(IntervalMap::new(lo, hi, k_int)?)
            }
            _ => return Err(bad("range")),
        };
        let kind = field(next("hash")?, "hash")?;
        let hashes = match kind.first().map(String::as_str) {
            Some("universal") => {
                if kind.get(1).map(|p| p.as_str()) != Some(&PRIME.to_string()) {
                    return Err(bad("prime"));
                }
                let mut coeffs = Vec::with_capacity(d);
                for _ in 0..d {
                    let row = parse_row(next("coefficients")?).ok_or_else(|| bad("coefficients"))?;
                    if row.len() != 2 {
                        return Err(bad("coefficients"));
                    }
                    coeffs.push((row[0], row[1]));
                }
                HashFamily::from_coefficients(v, k_int, coeffs)?
            }
            Some("table") => {
                let mut table = Vec::with_capacity(d);
                for _ in 0..d {
                    let row = parse_row(next("table")?).ok_or_else(|| bad("table"))?;
                    table.push(row.into_iter().map(|b| b as usize).collect());
                }
                HashFamily::from_table(v, table)?
            }
            _ => return Err(bad("hash kind")),
        };
        if next("counts")? != "counts" {
            return Err(bad("counts"));
        }
        let mut counts = Vec::with_capacity(d * v);
        for _ in 0..d {
            let row = parse_row(next("counter row")?).ok_or_else(|| bad("counter row"))?;
            if row.len() != v {
                return Err(bad("counter row width"));
            }
            counts.extend(row);
        }
        if hashes.k_int() != k_int {
            return Err(bad("k_int"));
        }
        Ok(Self {
            hashes,
            counts,
            n,
            range,
            clamped_low: cl,
            clamped_high: ch,
        })
    }
}

fn join<T: ToString>(it: impl Iterator<Item = T>) -> String {
    it.map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_row(line: &str) -> Option<Vec<u64>> {
    line.split(',').map(|s| s.trim().parse().ok()).collect()
}
