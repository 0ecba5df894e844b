//! Serializable summary of a constants analysis.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stats::{Histogram, Summary};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub summary: Summary,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Option<Self> {
        let summary = Summary::of(&values)?;
        Some(Self { values, summary })
    }
}

/// One sampled permutation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationSample {
    pub index: usize,
    /// Regenerates the permutation via `rng::permutation(n, perm_seed, 0)`.
    pub perm_seed: u64,
    #[serde(rename = "hatL")]
    pub hat_l: f64,
    #[serde(rename = "tildeL")]
    pub tilde_l: Option<f64>,
    /// `L / L̂_π`
    pub ratio: f64,
    /// `L / L̃_π`
    pub tilde_ratio: Option<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub schema_version: u32,
    pub n: usize,
    pub d: usize,
    pub nnz: usize,
    pub batch: usize,
    pub num_perms: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    #[serde(rename = "L")]
    pub l: f64,
    /// `(1/n) Σ w_i ‖a_i‖²`
    pub mean_sq_norm: f64,
    #[serde(rename = "L_full")]
    pub l_full: f64,
    #[serde(rename = "hatL")]
    pub hat_l: SampleSet,
    #[serde(rename = "tildeL")]
    pub tilde_l: Option<SampleSet>,
    /// `L / L̂_π` per permutation (mean of ratios, not ratio of means).
    pub ratios: SampleSet,
    pub tilde_ratios: Option<SampleSet>,
    pub ratio_histogram: Histogram,
    pub sigma_star: Option<f64>,
    pub ystar_norm: Option<f64>,
    /// Power iterations that hit `max_iter`.
    pub non_converged: usize,
    /// Samples breaking `L̂_π ≤ (1/n)Σ w_i‖a_i‖² ≤ L` or `L̃_π ≤ L` beyond `10⁻⁹ L`.
    pub chain_violations: usize,
    pub samples: Vec<PermutationSample>,
}

#[derive(Serialize)]
struct CsvRow {
    perm_seed: u64,
    #[serde(rename = "hatL")]
    hat_l: f64,
    #[serde(rename = "tildeL")]
    tilde_l: Option<f64>,
    ratio: f64,
}

impl ConstantsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    /// One row per permutation: `perm_seed,hatL,tildeL,ratio`. Each entry of
    /// `comments` is written first as a `# ` line.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for line in comments {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        for s in &self.samples {
            w.serialize(CsvRow {
                perm_seed: s.perm_seed,
                hat_l: s.hat_l,
                tilde_l: s.tilde_l,
                ratio: s.ratio,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}
