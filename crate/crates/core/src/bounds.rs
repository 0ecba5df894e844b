//! Theoretical step sizes, right-hand sides of the convergence bounds, and
//! gradient query complexities.
//!
//! Every right-hand side is returned already divided by `H_K = Σ_k η_k`, i.e. as
//! a bound on `f(x̂_K) − f(x*)` (in expectation for RR/SO and the nonsmooth
//! case, deterministically for IG).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Problem quantities entering the bounds. For the finite-sum variants `hat_l`
/// and `tilde_l` hold `L̂^g` and `L̃^g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs<F> {
    pub n: usize,
    pub b: usize,
    /// Number of epochs `K`.
    pub k: usize,
    pub hat_l: F,
    pub tilde_l: F,
    pub sigma_star: F,
    /// `D = ‖x_0 − x*‖`
    pub dist: F,
    /// `‖y*‖_{Λ⁻¹}` (IG only).
    pub ystar_norm: F,
    /// `Ḡ` (nonsmooth only).
    pub gbar: F,
}

impl<F: Scalar> BoundInputs<F> {
    pub fn new(n: usize, b: usize, k: usize) -> Self {
        Self {
            n,
            b,
            k,
            hat_l: F::zero(),
            tilde_l: F::zero(),
            sigma_star: F::zero(),
            dist: F::zero(),
            ystar_norm: F::zero(),
            gbar: F::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 || !self.n.is_multiple_of(self.b) {
            return Err(Error::BatchDivisibility { n: self.n, b: self.b });
        }
        if self.k == 0 {
            return Err(Error::Config("number of epochs must be at least 1".into()));
        }
        let fields = [
            ("hat_l", self.hat_l),
            ("tilde_l", self.tilde_l),
            ("sigma_star", self.sigma_star),
            ("dist", self.dist),
            ("ystar_norm", self.ystar_norm),
            ("gbar", self.gbar),
        ];
        for (name, v) in fields {
            if !(v >= F::zero() && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    fn nf(&self) -> F {
        F::of_usize(self.n)
    }

    fn bf(&self) -> F {
        F::of_usize(self.b)
    }

    fn kf(&self) -> F {
        F::of_usize(self.k)
    }

    /// `b / (n √(2 L̂ L̃))`, the largest step the smooth theorems allow.
    pub fn max_smooth_step(&self) -> Result<F> {
        if !(self.hat_l > F::zero() && self.tilde_l > F::zero()) {
            return Err(Error::UndefinedStep("hat_l and tilde_l must be positive".into()));
        }
        Ok(self.bf() / (self.nf() * (F::of(2.0) * self.hat_l * self.tilde_l).sqrt()))
    }

    /// `b D² / (2n)`
    fn initial_term(&self) -> F {
        self.bf() * self.dist * self.dist / (F::of(2.0) * self.nf())
    }

    /// `L̃ (n−b)(n+b) σ*² / (6 b² (n−1))`, zero when `b = n`.
    fn rr_variance_coeff(&self) -> F {
        if self.n == self.b {
            return F::zero();
        }
        let (n, b) = (self.nf(), self.bf());
        self.tilde_l * (n - b) * (n + b) * self.sigma_star * self.sigma_star
            / (F::of(6.0) * b * b * (n - F::one()))
    }

    /// `min{ n L̂ L̃ ‖y*‖² / b², (n−b)² L̃ σ*² / b² }`
    fn ig_variance_coeff(&self) -> F {
        let (n, b) = (self.nf(), self.bf());
        let y2 = self.ystar_norm * self.ystar_norm;
        let first = n * self.hat_l * self.tilde_l * y2 / (b * b);
        let second = (n - b) * (n - b) * self.tilde_l * self.sigma_star * self.sigma_star / (b * b);
        first.min(second)
    }
}

/// A bound value together with whether the step-size precondition of the
/// theorem held for every epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundValue<F> {
    pub value: F,
    pub precondition_ok: bool,
}

/// `(num / H_K)` with `0/0 = 0`.
fn over_step_sum<F: Scalar>(num: F, h: F) -> F {
    if h > F::zero() {
        num / h
    } else if num == F::zero() {
        F::zero()
    } else {
        F::infinity()
    }
}

fn check_steps<F: Scalar>(steps: &[F]) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::Config("at least one step size is required".into()));
    }
    if steps.iter().any(|&e| !(e >= F::zero() && e.is_finite())) {
        return Err(Error::Config("step sizes must be finite and nonnegative".into()));
    }
    Ok(())
}

fn within<F: Scalar>(steps: &[F], max: F) -> bool {
    let cap = max * (F::one() + F::of(1e-12));
    steps.iter().all(|&e| e <= cap)
}

/// `(x)^{1/3}` with a zero denominator mapped to `+∞`.
fn cube_root_ratio<F: Scalar>(num: F, den: F) -> F {
    if den > F::zero() && num > F::zero() {
        (num / den).cbrt()
    } else {
        F::infinity()
    }
}

/// RR/SO step size:
/// `min{ b/(n√(2L̂L̃)), (3b³(n−1)D² / (n(n−b)(n+b) L̃ K σ*²))^{1/3} }`.
/// The second argument is `+∞` when `(n−b)σ* = 0` or `D = 0`.
pub fn step_size_smooth_rr<F: Scalar>(inp: &BoundInputs<F>) -> Result<F> {
    inp.validate()?;
    let base = inp.max_smooth_step()?;
    let (n, b) = (inp.nf(), inp.bf());
    let num = F::of(3.0) * b * b * b * (n - F::one()) * inp.dist * inp.dist;
    let den = n * (n - b) * (n + b) * inp.tilde_l * inp.kf() * inp.sigma_star * inp.sigma_star;
    Ok(base.min(cube_root_ratio(num, den)))
}

/// RR/SO bound on `E[f(x̂_K) − f(x*)]` for the epoch steps `steps`:
/// `[bD²/(2n) + Σ_k η_k³ L̃(n−b)(n+b)σ*²/(6b²(n−1))] / H_K`.
pub fn bound_rhs_smooth_rr<F: Scalar>(inp: &BoundInputs<F>, steps: &[F]) -> Result<BoundValue<F>> {
    inp.validate()?;
    check_steps(steps)?;
    let coeff = inp.rr_variance_coeff();
    let var: F = steps.iter().map(|&e| e * e * e * coeff).sum();
    let h: F = steps.iter().copied().sum();
    Ok(BoundValue {
        value: over_step_sum(inp.initial_term() + var, h),
        precondition_ok: inp.max_smooth_step().is_ok_and(|m| within(steps, m)),
    })
}

/// IG step size, choosing the branch by comparing `L̂‖y*‖²` with
/// `((n−b)²/n) σ*²`.
pub fn step_size_ig<F: Scalar>(inp: &BoundInputs<F>) -> Result<F> {
    inp.validate()?;
    let base = inp.max_smooth_step()?;
    let (n, b) = (inp.nf(), inp.bf());
    let y2 = inp.ystar_norm * inp.ystar_norm;
    let s2 = inp.sigma_star * inp.sigma_star;
    let d2 = inp.dist * inp.dist;
    let b3 = b * b * b;
    let second = if inp.hat_l * y2 <= (n - b) * (n - b) / n * s2 {
        cube_root_ratio(b3 * d2, F::of(2.0) * n * n * inp.hat_l * inp.tilde_l * inp.kf() * y2)
    } else {
        cube_root_ratio(b3 * d2, F::of(2.0) * n * (n - b) * (n - b) * inp.tilde_l * inp.kf() * s2)
    };
    Ok(base.min(second))
}

/// IG bound on `f(x̂_K) − f(x*)`:
/// `[bD²/(2n) + Σ_k η_k³ min{n L̂L̃‖y*‖²/b², (n−b)² L̃ σ*²/b²}] / H_K`.
pub fn bound_rhs_ig<F: Scalar>(inp: &BoundInputs<F>, steps: &[F]) -> Result<BoundValue<F>> {
    inp.validate()?;
    check_steps(steps)?;
    let coeff = inp.ig_variance_coeff();
    let var: F = steps.iter().map(|&e| e * e * e * coeff).sum();
    let h: F = steps.iter().copied().sum();
    Ok(BoundValue {
        value: over_step_sum(inp.initial_term() + var, h),
        precondition_ok: inp.max_smooth_step().is_ok_and(|m| within(steps, m)),
    })
}

/// Nonsmooth step size `η = bD / (2n√(KḠ))`; zero when `D = 0`.
pub fn step_size_nonsmooth<F: Scalar>(inp: &BoundInputs<F>) -> Result<F> {
    inp.validate()?;
    if inp.dist == F::zero() {
        return Ok(F::zero());
    }
    if inp.gbar <= F::zero() {
        return Err(Error::UndefinedStep("Gbar must be positive when D > 0".into()));
    }
    Ok(inp.bf() * inp.dist / (F::of(2.0) * inp.nf() * (inp.kf() * inp.gbar).sqrt()))
}

/// Nonsmooth bound on `E[f(x̂_K) − f(x*)]`:
/// `[bD²/(2n) + Σ_k 2η_k² n Ḡ / b] / H_K`.
pub fn bound_rhs_nonsmooth<F: Scalar>(inp: &BoundInputs<F>, steps: &[F]) -> Result<BoundValue<F>> {
    inp.validate()?;
    check_steps(steps)?;
    let coeff = F::of(2.0) * inp.nf() * inp.gbar / inp.bf();
    let var: F = steps.iter().map(|&e| e * e * coeff).sum();
    let h: F = steps.iter().copied().sum();
    Ok(BoundValue {
        value: over_step_sum(inp.initial_term() + var, h),
        precondition_ok: true,
    })
}

/// General finite sums under RR/SO: the RR formula with `(L̂^g, L̃^g)`.
pub fn step_size_general_rr<F: Scalar>(inp: &BoundInputs<F>) -> Result<F> {
    step_size_smooth_rr(inp)
}

pub fn bound_rhs_general_rr<F: Scalar>(inp: &BoundInputs<F>, steps: &[F]) -> Result<BoundValue<F>> {
    bound_rhs_smooth_rr(inp, steps)
}

/// General finite sums under a fixed permutation: the IG formula with
/// `(L̂^g_0, L̃^g_0)`.
pub fn step_size_general_ig<F: Scalar>(inp: &BoundInputs<F>) -> Result<F> {
    step_size_ig(inp)
}

pub fn bound_rhs_general_ig<F: Scalar>(inp: &BoundInputs<F>, steps: &[F]) -> Result<BoundValue<F>> {
    bound_rhs_ig(inp, steps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComplexityKind {
    SmoothRr,
    SmoothIg,
    Nonsmooth,
    GeneralRr,
    GeneralIg,
}

/// Number of individual gradient evaluations `nK` sufficient for accuracy `ε`.
pub fn gradient_query_complexity<F: Scalar>(kind: ComplexityKind, eps: F, inp: &BoundInputs<F>) -> Result<u64> {
    inp.validate()?;
    if !(eps > F::zero() && eps.is_finite()) {
        return Err(Error::Config(format!("accuracy must be positive, got {eps}")));
    }
    let (n, b) = (inp.nf(), inp.bf());
    let d2 = inp.dist * inp.dist;
    let eps32 = eps * eps.sqrt();
    let two = F::of(2.0);
    let deterministic = || n * (two * inp.hat_l * inp.tilde_l).sqrt() * d2 / eps;
    let count = match kind {
        ComplexityKind::SmoothRr | ComplexityKind::GeneralRr => {
            let stochastic = if inp.n == inp.b {
                F::zero()
            } else {
                ((n - b) * (n + b) / (n - F::one())).sqrt() * two * two.sqrt() * inp.tilde_l.sqrt() * inp.sigma_star * d2
                    / (F::of(3.0).sqrt() * eps32)
            };
            deterministic().max(stochastic)
        }
        ComplexityKind::SmoothIg | ComplexityKind::GeneralIg => {
            let four = F::of(4.0);
            let via_y = four * n.sqrt() * (inp.hat_l * inp.tilde_l).sqrt() * inp.ystar_norm * d2 / eps32;
            let via_sigma = four * (n - b) * inp.tilde_l.sqrt() * inp.sigma_star * d2 / eps32;
            deterministic() + via_y.min(via_sigma)
        }
        ComplexityKind::Nonsmooth => F::of(4.0) * n * inp.gbar * d2 / (eps * eps),
    };
    let c = count.ceil().as_f64();
    Ok(if c >= u64::MAX as f64 { u64::MAX } else { c as u64 })
}

/// Which summary of the per-permutation constants feeds a constant step size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantProxy {
    /// Sampled maximum, the worst-case stand-in.
    Max,
    Mean,
    /// Empirical quantile in `[0, 1]`.
    Quantile(f64),
}

impl ConstantProxy {
    pub fn apply(self, samples: &[f64]) -> Option<f64> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(match self {
            ConstantProxy::Max => sorted[sorted.len() - 1],
            ConstantProxy::Mean => sorted.iter().sum::<f64>() / sorted.len() as f64,
            ConstantProxy::Quantile(q) => crate::stats::quantile_sorted(&sorted, q),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn inputs(n: usize, b: usize, k: usize) -> BoundInputs<f64> {
        BoundInputs::new(n, b, k)
    }

    #[test]
    fn rr_step_examples() {
        let mut i = inputs(2, 1, 10);
        i.hat_l = 0.5;
        i.tilde_l = 0.5;
        i.dist = 1.0;
        assert_relative_eq!(step_size_smooth_rr(&i).unwrap(), 1.0 / (2.0 * 0.5f64.sqrt()));

        i.sigma_star = 100.0;
        let eta = step_size_smooth_rr(&i).unwrap();
        let cube = (3.0f64 * 1.0 / (2.0 * 1.0 * 3.0 * 0.5 * 10.0 * 1e4)).cbrt();
        assert_relative_eq!(eta, cube, max_relative = 1e-14);

        let mut full = inputs(4, 4, 3);
        full.hat_l = 1.0;
        full.tilde_l = 2.0;
        full.sigma_star = 5.0;
        full.dist = 1.0;
        assert_relative_eq!(step_size_smooth_rr(&full).unwrap(), 1.0 / 2.0);

        let zero = inputs(4, 2, 1);
        assert!(matches!(step_size_smooth_rr(&zero), Err(Error::UndefinedStep(_))));
    }

    #[test]
    fn rr_bound_examples() {
        let mut i = inputs(2, 1, 1);
        i.tilde_l = 1.0;
        i.hat_l = 1.0;
        i.sigma_star = 1.0;
        i.dist = 1.0;
        let v = bound_rhs_smooth_rr(&i, &[0.1]).unwrap();
        assert_relative_eq!(v.value, (0.25 + 0.001 * 3.0 / 6.0) / 0.1, max_relative = 1e-14);
        assert!(v.precondition_ok);
        assert!(!bound_rhs_smooth_rr(&i, &[10.0]).unwrap().precondition_ok);

        i.sigma_star = 0.0;
        assert_relative_eq!(bound_rhs_smooth_rr(&i, &[0.1, 0.2]).unwrap().value, 0.25 / 0.3);

        let mut full = inputs(3, 3, 2);
        full.tilde_l = 1.0;
        full.hat_l = 1.0;
        full.sigma_star = 9.0;
        full.dist = 2.0;
        assert_relative_eq!(bound_rhs_smooth_rr(&full, &[0.1, 0.1]).unwrap().value, 4.0 / (2.0 * 0.2));
    }

    #[test]
    fn ig_examples() {
        let mut i = inputs(2, 1, 1);
        i.hat_l = 0.5;
        i.tilde_l = 0.5;
        i.ystar_norm = 2f64.sqrt();
        i.sigma_star = 1.0;
        i.dist = 1.0;
        assert_relative_eq!(bound_rhs_ig(&i, &[0.1]).unwrap().value, 2.505, max_relative = 1e-12);

        let mut interp = i.clone();
        interp.ystar_norm = 0.0;
        interp.sigma_star = 0.0;
        assert_relative_eq!(bound_rhs_ig(&interp, &[0.1]).unwrap().value, 2.5, max_relative = 1e-14);
        assert_relative_eq!(step_size_ig(&interp).unwrap(), interp.max_smooth_step().unwrap());

        let mut full = i.clone();
        full.n = 2;
        full.b = 2;
        assert_relative_eq!(bound_rhs_ig(&full, &[0.1]).unwrap().value, 1.0 / (2.0 * 0.1), max_relative = 1e-14);
    }

    #[test]
    fn ig_step_branches() {
        let mut i = inputs(10, 1, 50);
        i.hat_l = 1.0;
        i.tilde_l = 2.0;
        i.dist = 1.0;
        i.ystar_norm = 1.0;
        i.sigma_star = 10.0;
        // L̂‖y‖² = 1 ≤ 81/10 · 100: the ‖y*‖ branch
        let y_branch = (1.0f64 / (2.0 * 100.0 * 2.0 * 50.0)).cbrt();
        assert_relative_eq!(step_size_ig(&i).unwrap(), y_branch.min(i.max_smooth_step().unwrap()));
        i.sigma_star = 0.01;
        let s_branch = (1.0f64 / (2.0 * 10.0 * 81.0 * 2.0 * 50.0 * 1e-4)).cbrt();
        assert_relative_eq!(step_size_ig(&i).unwrap(), s_branch.min(i.max_smooth_step().unwrap()));
    }

    #[test]
    fn nonsmooth_examples() {
        let mut i = inputs(2, 1, 4);
        i.gbar = 1.0;
        i.dist = 1.0;
        let eta = step_size_nonsmooth(&i).unwrap();
        assert_relative_eq!(eta, 0.125);
        assert_relative_eq!(bound_rhs_nonsmooth(&i, &[eta; 4]).unwrap().value, 1.0, max_relative = 1e-14);

        let mut zero = i.clone();
        zero.dist = 0.0;
        assert_eq!(step_size_nonsmooth(&zero).unwrap(), 0.0);
        assert_eq!(bound_rhs_nonsmooth(&zero, &[0.0; 4]).unwrap().value, 0.0);

        i.gbar = 0.0;
        assert!(matches!(step_size_nonsmooth(&i), Err(Error::UndefinedStep(_))));
    }

    #[test]
    fn general_examples() {
        let mut i = inputs(4, 2, 1);
        i.hat_l = 1.0;
        i.tilde_l = 2.0;
        i.sigma_star = 1.0;
        i.dist = 1.0;
        let expect = (0.25 + 0.05f64.powi(3) * 2.0 * 2.0 * 6.0 / (6.0 * 4.0 * 3.0)) / 0.05;
        assert_relative_eq!(bound_rhs_general_rr(&i, &[0.05]).unwrap().value, expect, max_relative = 1e-14);
        assert_relative_eq!(expect, 5.000_833_333_333_333, max_relative = 1e-12);
        i.sigma_star = 0.0;
        assert_relative_eq!(bound_rhs_general_rr(&i, &[0.05]).unwrap().value, 0.25 / 0.05);
    }

    #[test]
    fn complexity_examples() {
        let mut i = inputs(2, 1, 1);
        i.hat_l = 0.5;
        i.tilde_l = 0.5;
        i.dist = 1.0;
        assert_eq!(gradient_query_complexity(ComplexityKind::SmoothRr, 0.1, &i).unwrap(), 15);
        let a = gradient_query_complexity(ComplexityKind::SmoothRr, 0.01, &i).unwrap();
        let b = gradient_query_complexity(ComplexityKind::SmoothRr, 0.005, &i).unwrap();
        assert!((b as f64 / a as f64 - 2.0).abs() < 0.01);
        assert_eq!(gradient_query_complexity(ComplexityKind::SmoothIg, 0.1, &i).unwrap(), 15);

        i.gbar = 1.0;
        assert_eq!(gradient_query_complexity(ComplexityKind::Nonsmooth, 0.5, &i).unwrap(), 32);
        assert!(gradient_query_complexity(ComplexityKind::Nonsmooth, 0.0, &i).is_err());

        i.sigma_star = 1.0;
        let stochastic = (3.0f64).sqrt() * 2f64.powf(1.5) * 0.5f64.sqrt() / (3f64.sqrt() * 1e-3f64.powf(1.5));
        assert_eq!(
            gradient_query_complexity(ComplexityKind::SmoothRr, 1e-3, &i).unwrap(),
            stochastic.ceil() as u64
        );
    }

    #[test]
    fn proxies() {
        let s = [3.0, 1.0, 2.0];
        assert_eq!(ConstantProxy::Max.apply(&s), Some(3.0));
        assert_eq!(ConstantProxy::Mean.apply(&s), Some(2.0));
        assert_eq!(ConstantProxy::Quantile(0.5).apply(&s), Some(2.0));
        assert_eq!(ConstantProxy::Max.apply(&[]), None);
    }

    fn arb_inputs() -> impl Strategy<Value = BoundInputs<f64>> {
        (1usize..6, 1usize..6, 1usize..50, 0.01f64..5.0, 0.01f64..5.0, 0.0f64..3.0, 0.0f64..3.0, 0.0f64..3.0).prop_map(
            |(b, m, k, h, t, s, d, y)| {
                let mut i = BoundInputs::new(b * m, b, k);
                i.hat_l = h;
                i.tilde_l = t;
                i.sigma_star = s;
                i.dist = d;
                i.ystar_norm = y;
                i.gbar = h;
                i
            },
        )
    }

    proptest! {
        #[test]
        fn steps_respect_precondition(i in arb_inputs()) {
            let cap = i.max_smooth_step().unwrap();
            let rr = step_size_smooth_rr(&i).unwrap();
            let ig = step_size_ig(&i).unwrap();
            prop_assert!(rr > 0.0 && rr <= cap);
            prop_assert!(ig > 0.0 && ig <= cap);
            prop_assert!(bound_rhs_smooth_rr(&i, &vec![rr; i.k]).unwrap().precondition_ok);
            prop_assert!(bound_rhs_ig(&i, &vec![ig; i.k]).unwrap().precondition_ok);
        }

        #[test]
        fn bounds_nonincreasing_in_k(i in arb_inputs(), eta in 0.001f64..1.0) {
            let mut prev = [f64::INFINITY; 3];
            for k in 1..20 {
                let steps = vec![eta; k];
                let now = [
                    bound_rhs_smooth_rr(&i, &steps).unwrap().value,
                    bound_rhs_ig(&i, &steps).unwrap().value,
                    bound_rhs_nonsmooth(&i, &steps).unwrap().value,
                ];
                for (a, p) in now.iter().zip(&prev) {
                    prop_assert!(*a <= p * (1.0 + 1e-12));
                }
                prev = now;
            }
        }
    }
}
