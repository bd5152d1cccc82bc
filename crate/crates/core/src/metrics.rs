//! Agreement metrics between two sets of S-parameter responses.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{NetworkResponse, Representation};

/// Location of the largest deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Argmax {
    pub example: usize,
    pub i: usize,
    pub j: usize,
    pub freq_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Mean of `|S_ref - S_test|` over examples, port pairs and frequencies.
    pub e_mean: f64,
    pub max_error: f64,
    pub argmax: Option<Argmax>,
    /// Mean per example over the same (masked) entries.
    pub per_example: Vec<f64>,
    /// `|S_ref - S_test|` indexed `[example][freq][i][j]`; entries outside
    /// the mask are zero.
    #[serde(skip)]
    pub errors: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
}

/// Mean magnitude error over all K^2 port pairs.
pub fn e_mean(reference: &[NetworkResponse], test: &[NetworkResponse]) -> Result<ErrorReport> {
    e_mean_masked(reference, test, None)
}

/// Like [`e_mean`], restricted to the `(i, j)` pairs in `mask` when given.
pub fn e_mean_masked(
    reference: &[NetworkResponse],
    test: &[NetworkResponse],
    mask: Option<&[(usize, usize)]>,
) -> Result<ErrorReport> {
    if reference.len() != test.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} reference examples but {} test examples",
            reference.len(),
            test.len()
        )));
    }
    let mut errors = Vec::with_capacity(reference.len());
    let mut per_example = Vec::with_capacity(reference.len());
    let (mut total, mut count) = (0.0, 0usize);
    let mut max_error = 0.0;
    let mut argmax = None;
    for (e, (r, t)) in reference.iter().zip(test).enumerate() {
        check_pair(e, r, t)?;
        let k = r.k();
        let pairs: Vec<(usize, usize)> = match mask {
            Some(m) => {
                if let Some(&(i, j)) = m.iter().find(|&&(i, j)| i >= k || j >= k) {
                    return Err(Error::ShapeMismatch(format!("mask pair ({i}, {j}) outside K = {k}")));
                }
                m.to_vec()
            }
            None => (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect(),
        };
        let mut tensor = vec![vec![vec![0.0; k]; k]; r.data.len()];
        let mut sum = 0.0;
        for (f, (a, b)) in r.data.iter().zip(&t.data).enumerate() {
            for &(i, j) in &pairs {
                let d = (a[(i, j)] - b[(i, j)]).norm();
                tensor[f][i][j] = d;
                sum += d;
                if argmax.is_none() || d > max_error {
                    max_error = d;
                    argmax = Some(Argmax {
                        example: e,
                        i,
                        j,
                        freq_hz: r.freqs.as_slice()[f],
                    });
                }
            }
        }
        let n = pairs.len() * r.data.len();
        per_example.push(if n == 0 { 0.0 } else { sum / n as f64 });
        total += sum;
        count += n;
        errors.push(tensor);
    }
    Ok(ErrorReport {
        e_mean: if count == 0 { 0.0 } else { total / count as f64 },
        max_error,
        argmax,
        per_example,
        errors,
    })
}

fn check_pair(e: usize, r: &NetworkResponse, t: &NetworkResponse) -> Result<()> {
    match (r.repr, t.repr) {
        (Representation::S { ref_ohms: a }, Representation::S { ref_ohms: b }) if a == b => {}
        (Representation::S { .. }, Representation::S { .. }) => {
            return Err(Error::RepresentationMismatch(format!(
                "example {e}: reference impedances differ"
            )))
        }
        _ => {
            return Err(Error::RepresentationMismatch(format!(
                "example {e}: both responses must be S-parameters"
            )))
        }
    }
    if r.k() != t.k() || r.data.iter().chain(&t.data).any(|m| m.nrows() != r.k() || m.ncols() != r.k()) {
        return Err(Error::ShapeMismatch(format!("example {e}: port counts differ")));
    }
    if r.freqs != t.freqs || r.data.len() != t.data.len() {
        return Err(Error::ShapeMismatch(format!("example {e}: frequency grids differ")));
    }
    Ok(())
}

impl ErrorReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Table => self.table(),
        }
    }

    fn table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "e_mean     {:.6e}", self.e_mean).unwrap();
        writeln!(s, "max_error  {:.6e}", self.max_error).unwrap();
        if let Some(a) = self.argmax {
            writeln!(
                s,
                "argmax     example {} S[{},{}] at {} Hz",
                a.example,
                a.i + 1,
                a.j + 1,
                a.freq_hz
            )
            .unwrap();
        }
        writeln!(s, "{:>8}  {:>14}", "example", "mean_error").unwrap();
        for (e, v) in self.per_example.iter().enumerate() {
            writeln!(s, "{e:>8}  {v:>14.6e}").unwrap();
        }
        s
    }
}

pub fn compare_report(
    reference: &[NetworkResponse],
    test: &[NetworkResponse],
    format: ReportFormat,
) -> Result<String> {
    Ok(e_mean(reference, test)?.render(format))
}
