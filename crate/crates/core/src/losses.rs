//! Scalar loss families `ℓ_i(z)` for linear predictors, their (sub)derivatives,
//! and the diagonal regularity matrices Λ (smoothness) and Γ (squared
//! Lipschitz constants).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::SparseDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Floor applied to regularity entries so that Λ stays invertible.
pub const MIN_REGULARITY: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossFamily {
    /// `½(z − t)²`
    Squared,
    /// `log(1 + exp(−t z))`
    Logistic,
    /// `max(0, 1 − t z)`
    Hinge,
    /// `|z − t|`
    Absolute,
}

impl LossFamily {
    pub fn is_smooth(self) -> bool {
        matches!(self, LossFamily::Squared | LossFamily::Logistic)
    }

    pub fn name(self) -> &'static str {
        match self {
            LossFamily::Squared => "squared",
            LossFamily::Logistic => "logistic",
            LossFamily::Hinge => "hinge",
            LossFamily::Absolute => "absolute",
        }
    }
}

impl fmt::Display for LossFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "squared" | "least-squares" | "ls" => Ok(LossFamily::Squared),
            "logistic" => Ok(LossFamily::Logistic),
            "hinge" => Ok(LossFamily::Hinge),
            "absolute" | "abs" => Ok(LossFamily::Absolute),
            other => Err(Error::Config(format!("unknown loss family {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularityKind {
    /// Entries are smoothness constants `L_i`.
    Smooth,
    /// Entries are squared Lipschitz constants `G_i²`.
    Lipschitz,
}

/// Diagonal of Λ or Γ. All entries are strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularityDiag<F> {
    kind: RegularityKind,
    values: Vec<F>,
}

impl<F: Scalar> RegularityDiag<F> {
    pub fn new(kind: RegularityKind, values: Vec<F>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("regularity diagonal is empty".into()));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > F::zero()))
        {
            return Err(Error::Config(format!(
                "regularity entry {i} must be positive and finite, got {v}"
            )));
        }
        Ok(Self { kind, values })
    }

    pub fn smooth(values: Vec<F>) -> Result<Self> {
        Self::new(RegularityKind::Smooth, values)
    }

    /// Λ = I.
    pub fn identity(n: usize) -> Self {
        Self {
            kind: RegularityKind::Smooth,
            values: vec![F::one(); n],
        }
    }

    pub fn kind(&self) -> RegularityKind {
        self.kind
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One loss family applied to every component, with per-component targets
/// `t_i` and positive scale multipliers `c_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossModel<F> {
    family: LossFamily,
    targets: Vec<F>,
    scales: Vec<F>,
}

impl<F: Scalar> LossModel<F> {
    pub fn new(family: LossFamily, targets: Vec<F>) -> Self {
        let n = targets.len();
        Self {
            family,
            targets,
            scales: vec![F::one(); n],
        }
    }

    /// Targets taken from the dataset labels.
    pub fn for_dataset(family: LossFamily, ds: &SparseDataset<F>) -> Self {
        Self::new(family, ds.labels().to_vec())
    }

    pub fn with_scales(mut self, scales: Vec<F>) -> Result<Self> {
        if scales.len() != self.targets.len() {
            return Err(Error::DimensionMismatch {
                expected: self.targets.len(),
                got: scales.len(),
            });
        }
        if scales.iter().any(|c| !(c.is_finite() && *c > F::zero())) {
            return Err(Error::Config("loss scales must be positive".into()));
        }
        self.scales = scales;
        Ok(self)
    }

    pub fn family(&self) -> LossFamily {
        self.family
    }

    pub fn targets(&self) -> &[F] {
        &self.targets
    }

    pub fn scales(&self) -> &[F] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// `ℓ_i(z)`.
    pub fn value(&self, i: usize, z: F) -> F {
        let t = self.targets[i];
        let base = match self.family {
            LossFamily::Squared => {
                let r = z - t;
                F::of(0.5) * r * r
            }
            LossFamily::Logistic => softplus(-t * z),
            LossFamily::Hinge => (F::one() - t * z).max(F::zero()),
            LossFamily::Absolute => (z - t).abs(),
        };
        self.scales[i] * base
    }

    /// `ℓ_i'(z)`, or a fixed subgradient for the nonsmooth families: the
    /// flat-side element 0 at the hinge kink `t z = 1` and 0 at `z = t` for
    /// the absolute loss.
    pub fn derivative(&self, i: usize, z: F) -> F {
        let t = self.targets[i];
        let base = match self.family {
            LossFamily::Squared => z - t,
            // −t / (1 + e^{tz}) = −t σ(−tz)
            LossFamily::Logistic => -t * sigmoid(-t * z),
            LossFamily::Hinge => {
                if t * z < F::one() {
                    -t
                } else {
                    F::zero()
                }
            }
            LossFamily::Absolute => {
                if z > t {
                    F::one()
                } else if z < t {
                    -F::one()
                } else {
                    F::zero()
                }
            }
        };
        self.scales[i] * base
    }

    /// Smoothness constant `L_i` (smooth families) or Lipschitz constant `G_i`
    /// (nonsmooth families) of component `i`, before flooring.
    pub fn component_constant(&self, i: usize) -> F {
        let t = self.targets[i];
        let base = match self.family {
            LossFamily::Squared => F::one(),
            LossFamily::Logistic => F::of(0.25) * t * t,
            LossFamily::Hinge => t.abs(),
            LossFamily::Absolute => F::one(),
        };
        self.scales[i] * base
    }

    /// Λ = diag(L_i) for smooth families, Γ = diag(G_i²) for nonsmooth ones.
    /// Entries are floored at [`MIN_REGULARITY`].
    pub fn regularity(&self) -> RegularityDiag<F> {
        let floor = F::of(MIN_REGULARITY);
        let (kind, values) = if self.family.is_smooth() {
            (
                RegularityKind::Smooth,
                (0..self.len()).map(|i| self.component_constant(i).max(floor)).collect(),
            )
        } else {
            (
                RegularityKind::Lipschitz,
                (0..self.len())
                    .map(|i| {
                        let g = self.component_constant(i);
                        (g * g).max(floor)
                    })
                    .collect(),
            )
        };
        RegularityDiag { kind, values }
    }
}

fn softplus<F: Scalar>(u: F) -> F {
    // log(1 + e^u) without overflow
    if u > F::zero() {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn sigmoid<F: Scalar>(u: F) -> F {
    if u >= F::zero() {
        F::one() / (F::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (F::one() + e)
    }
}

/// The conjugate pair `y_x`: `y_x^i = ℓ_i'(a_iᵀx)`.
pub fn conjugate_pair<F: Scalar>(model: &LossModel<F>, ds: &SparseDataset<F>, x: &[F]) -> Result<Vec<F>> {
    check_model(model, ds)?;
    if x.len() != ds.d() {
        return Err(Error::DimensionMismatch {
            expected: ds.d(),
            got: x.len(),
        });
    }
    Ok(ds
        .rows()
        .enumerate()
        .map(|(i, row)| model.derivative(i, row.dot(x)))
        .collect())
}

pub(crate) fn check_model<F: Scalar>(model: &LossModel<F>, ds: &SparseDataset<F>) -> Result<()> {
    if model.len() != ds.n() {
        return Err(Error::DimensionMismatch {
            expected: ds.n(),
            got: model.len(),
        });
    }
    Ok(())
}
