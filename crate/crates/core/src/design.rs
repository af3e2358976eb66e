//! Approximate and exact designs, apportionment, and design file formats.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DesignPoint;

/// Weights are renormalized on construction; the sum is then 1 within this tolerance.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// An approximate design: distinct support points with positive weights summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    points: Vec<DesignPoint>,
    weights: Vec<f64>,
}

impl Design {
    /// Validates and renormalizes. Weights must be finite and strictly positive.
    pub fn new(points: Vec<DesignPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDesign("empty design".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidDesign(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let k = points[0].k();
        if points.iter().any(|p| p.k() != k) {
            return Err(Error::InvalidDesign("points of different dimension".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidDesign(format!("weight {w} is not positive")));
        }
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if !seen.insert(p) {
                return Err(Error::InvalidDesign(format!("duplicate support point {p}")));
            }
        }
        let total: f64 = weights.iter().sum();
        let weights = if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            weights.iter().map(|w| w / total).collect()
        } else {
            weights
        };
        Ok(Self { points, weights })
    }

    /// Uniform weights on the given points.
    pub fn uniform(points: Vec<DesignPoint>) -> Result<Self> {
        let n = points.len().max(1);
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn points(&self) -> &[DesignPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn k(&self) -> usize {
        self.points[0].k()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DesignPoint, &f64)> {
        self.points.iter().zip(&self.weights)
    }

    /// Design CSV: header `i,x1,...,xk,weight`, one row per support point.
    pub fn to_csv(&self) -> String {
        let k = self.k();
        let mut s = String::from("i");
        for j in 1..=k {
            let _ = write!(s, ",x{j}");
        }
        s.push_str(",weight\n");
        for (i, (p, w)) in self.iter().enumerate() {
            let _ = write!(s, "{}", i + 1);
            for c in p.coords() {
                let _ = write!(s, ",{c}");
            }
            let _ = writeln!(s, ",{w}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidDesign(msg);
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = rdr
            .headers()
            .map_err(|e| bad(format!("bad CSV header: {e}")))?
            .clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 3 || cols[0] != "i" || cols[cols.len() - 1] != "weight" {
            return Err(bad(format!("expected header i,x1,...,xk,weight, got {cols:?}")));
        }
        for (j, c) in cols[1..cols.len() - 1].iter().enumerate() {
            if *c != format!("x{}", j + 1) {
                return Err(bad(format!("unexpected column `{c}`")));
            }
        }
        let k = cols.len() - 2;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(format!("row {}: {e}", row + 1)))?;
            let nums = rec
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row {}: {e}", row + 1)))?;
            if nums.len() != k + 2 {
                return Err(bad(format!("row {} has {} fields", row + 1, nums.len())));
            }
            points.push(DesignPoint::new(nums[1..=k].to_vec()));
            weights.push(nums[k + 1]);
        }
        Design::new(points, weights)
    }

    pub fn to_record(&self, criterion: f64, m: usize) -> DesignRecord {
        DesignRecord {
            points: self.points.iter().map(|p| p.coords().to_vec()).collect(),
            weights: self.weights.clone(),
            criterion,
            m,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: DesignRecord = serde_json::from_str(text)
            .map_err(|e| Error::InvalidDesign(format!("bad design JSON: {e}")))?;
        rec.into_design()
    }

    /// Table layout with weights to 6 decimals.
    pub fn to_table(&self) -> String {
        let k = self.k();
        let mut rows: Vec<Vec<String>> = Vec::with_capacity(self.len() + 1);
        let mut head = vec!["i".to_string()];
        head.extend((1..=k).map(|j| format!("x_i{j}")));
        head.push("weight".into());
        rows.push(head);
        for (i, (p, w)) in self.iter().enumerate() {
            let mut r = vec![(i + 1).to_string()];
            r.extend(p.coords().iter().map(|c| format!("{c}")));
            r.push(format!("{w:.6}"));
            rows.push(r);
        }
        let widths: Vec<usize> = (0..k + 2)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for r in rows {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(v, w)| format!("{v:>w$}"))
                .collect();
            s.push_str(line.join("  ").trim_end());
            s.push('\n');
        }
        s
    }
}

/// JSON form of a design: `{points, weights, criterion, m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub criterion: f64,
    pub m: usize,
}

impl DesignRecord {
    pub fn into_design(self) -> Result<Design> {
        Design::new(
            self.points.into_iter().map(DesignPoint::new).collect(),
            self.weights,
        )
    }
}

/// An exact design: integer trial counts summing to `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDesign {
    pub points: Vec<DesignPoint>,
    pub counts: Vec<u64>,
    pub n: u64,
}

/// Efficient apportionment of `n` trials to the support of `design`.
///
/// Starts from `ceil((n − s/2) ξᵢ)` and repairs the total one trial at a
/// time: decrementing the point with the largest `nᵢ/ξᵢ`, or incrementing
/// the point with the smallest `(nᵢ+1)/ξᵢ`. Ties go to the lower index.
pub fn round_to_exact(design: &Design, n: u64) -> Result<ExactDesign> {
    let s = design.len();
    if (n as usize) < s {
        return Err(Error::InvalidArgument(format!(
            "N = {n} is smaller than the support size {s}"
        )));
    }
    let w = design.weights();
    let base = n as f64 - s as f64 / 2.0;
    let mut counts: Vec<u64> = w.iter().map(|wi| (base * wi).ceil().max(0.0) as u64).collect();
    let argbest = |key: &dyn Fn(usize) -> f64, larger: bool| {
        let mut best = 0;
        for i in 1..s {
            let better = if larger {
                key(i) > key(best)
            } else {
                key(i) < key(best)
            };
            if better {
                best = i;
            }
        }
        best
    };
    loop {
        let total: u64 = counts.iter().sum();
        if total == n {
            break;
        }
        if total > n {
            let c = counts.clone();
            let j = argbest(&|i| if c[i] == 0 { f64::NEG_INFINITY } else { c[i] as f64 / w[i] }, true);
            counts[j] -= 1;
        } else {
            let c = counts.clone();
            let j = argbest(&|i| (c[i] + 1) as f64 / w[i], false);
            counts[j] += 1;
        }
    }
    Ok(ExactDesign {
        points: design.points().to_vec(),
        counts,
        n,
    })
}
