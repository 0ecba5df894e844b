//! Data-dependent smoothness and Lipschitz constants.
//!
//! With scaled permuted rows `b_i = √w_{π_i} a_{π_i}`, batch size `b` and
//! `m = n/b` blocks:
//!
//! * `L = max_i w_i ‖a_i‖²`
//! * `L_full = (1/n) ‖B Bᵀ‖`
//! * `L̂_π = (1/(mn)) ‖Σ_j I_{b(j−1)↑} B Bᵀ I_{b(j−1)↑}‖` (prefix-masked Gram)
//! * `L̃_π = (1/b) max_j ‖B_j B_jᵀ‖` (diagonal blocks)
//!
//! With `w = Λ` these are smoothness constants; with `w = Γ` (squared
//! Lipschitz constants) the same operators give `Ĝ_π` and `G̃_π`.

pub mod gram;
pub mod report;
pub mod spectral;

use rayon::prelude::*;

use crate::dataset::{is_permutation, SparseDataset};
use crate::engine::{gradient, objective};
use crate::error::{Error, Result};
use crate::losses::{check_model, LossModel, RegularityDiag};
use crate::rng;
use crate::scalar::{sq_norm, Scalar};
use crate::stats::Histogram;

use gram::{check_batch, GramMode, MaskedGramOperator};
pub use report::{ConstantsReport, PermutationSample, SampleSet, SCHEMA_VERSION};
use spectral::{operator_norm, NormEstimate, PowerIteration};

fn check_reg<F: Scalar>(ds: &SparseDataset<F>, reg: &RegularityDiag<F>) -> Result<()> {
    if reg.len() != ds.n() {
        return Err(Error::DimensionMismatch {
            expected: ds.n(),
            got: reg.len(),
        });
    }
    Ok(())
}

fn check_perm(perm: &[usize], n: usize) -> Result<()> {
    if !is_permutation(perm, n) {
        return Err(Error::Config(format!("not a permutation of 0..{n}")));
    }
    Ok(())
}

fn weighted_sq_norms<F: Scalar>(ds: &SparseDataset<F>, reg: &RegularityDiag<F>) -> Vec<F> {
    ds.rows().zip(reg.values()).map(|(row, &w)| w * row.sq_norm()).collect()
}

/// `L = max_i w_i ‖a_i‖²`.
pub fn classical_l<F: Scalar>(ds: &SparseDataset<F>, reg: &RegularityDiag<F>) -> Result<F> {
    check_reg(ds, reg)?;
    Ok(weighted_sq_norms(ds, reg).into_iter().fold(F::zero(), F::max))
}

/// `(1/n) Σ_i w_i ‖a_i‖²`, the middle term of the relaxation chain.
pub fn mean_weighted_sq_norm<F: Scalar>(ds: &SparseDataset<F>, reg: &RegularityDiag<F>) -> Result<F> {
    check_reg(ds, reg)?;
    Ok(weighted_sq_norms(ds, reg).into_iter().sum::<F>() / F::of_usize(ds.n()))
}

/// `(1/n) ‖Λ^{1/2} A Aᵀ Λ^{1/2}‖`, the smoothness constant of the full gradient.
pub fn full_gradient_l<F: Scalar>(ds: &SparseDataset<F>, reg: &RegularityDiag<F>, power: &PowerIteration) -> Result<F> {
    full_gradient_l_estimate(ds, reg, power).map(|e| e.value)
}

pub fn full_gradient_l_estimate<F: Scalar>(
    ds: &SparseDataset<F>,
    reg: &RegularityDiag<F>,
    power: &PowerIteration,
) -> Result<NormEstimate<F>> {
    let perm: Vec<usize> = (0..ds.n()).collect();
    hat_constant_estimate(ds, reg, &perm, ds.n(), power)
}

/// `L̂_π` (or `Ĝ_π` when `reg` holds squared Lipschitz constants).
pub fn hat_constant<F: Scalar>(
    ds: &SparseDataset<F>,
    reg: &RegularityDiag<F>,
    perm: &[usize],
    b: usize,
    power: &PowerIteration,
) -> Result<F> {
    hat_constant_estimate(ds, reg, perm, b, power).map(|e| e.value)
}

pub fn hat_constant_estimate<F: Scalar>(
    ds: &SparseDataset<F>,
    reg: &RegularityDiag<F>,
    perm: &[usize],
    b: usize,
    power: &PowerIteration,
) -> Result<NormEstimate<F>> {
    check_reg(ds, reg)?;
    let op = MaskedGramOperator::new(ds, reg.values(), perm, b, GramMode::Prefix)?;
    let n = ds.n();
    let mn = F::of_usize(n / b) * F::of_usize(n);
    Ok(operator_norm(&op, power).scaled(F::one() / mn))
}

/// `L̃_π` (or `G̃_π`).
pub fn tilde_constant<F: Scalar>(
    ds: &SparseDataset<F>,
    reg: &RegularityDiag<F>,
    perm: &[usize],
    b: usize,
    power: &PowerIteration,
) -> Result<F> {
    tilde_constant_estimate(ds, reg, perm, b, power).map(|e| e.value)
}

pub fn tilde_constant_estimate<F: Scalar>(
    ds: &SparseDataset<F>,
    reg: &RegularityDiag<F>,
    perm: &[usize],
    b: usize,
    power: &PowerIteration,
) -> Result<NormEstimate<F>> {
    check_reg(ds, reg)?;
    check_perm(perm, ds.n())?;
    check_batch(ds.n(), b)?;
    if b == 1 {
        let value = perm
            .iter()
            .map(|&p| reg.values()[p] * ds.row(p).sq_norm())
            .fold(F::zero(), F::max);
        return Ok(NormEstimate {
            value,
            iterations: 0,
            converged: true,
        });
    }
    let op = MaskedGramOperator::new(ds, reg.values(), perm, b, GramMode::BlockDiagonal)?;
    // ‖B_j B_jᵀ‖ ≤ tr(B_j B_jᵀ), so blocks are visited by decreasing trace
    // and the scan stops once no remaining block can beat the best norm.
    let mut order: Vec<(usize, F)> = (0..op.blocks()).map(|j| (j, op.block_trace(j))).collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let mut best = F::zero();
    let mut iterations = 0;
    let mut converged = true;
    for (j, trace) in order {
        if trace <= best {
            break;
        }
        let est = operator_norm(&op.block(j), power);
        iterations += est.iterations;
        converged &= est.converged;
        best = best.max(est.value);
    }
    Ok(NormEstimate {
        value: best / F::of_usize(b),
        iterations,
        converged,
    })
}

/// `L̂^g_π = (1/(mn)) ‖Σ_j I_{b(j−1)↑} l lᵀ I_{b(j−1)↑}‖` with `l_i = √L_{π_i}`.
pub fn general_hat_l<F: Scalar>(l_values: &[F], perm: &[usize], b: usize, power: &PowerIteration) -> Result<F> {
    let n = l_values.len();
    if n == 0 {
        return Err(Error::Config("no smoothness constants given".into()));
    }
    if l_values.iter().any(|&l| !(l >= F::zero() && l.is_finite())) {
        return Err(Error::Config("smoothness constants must be nonnegative".into()));
    }
    let rows = l_values.iter().map(|&l| vec![(0, l.sqrt())]).collect();
    let ds = SparseDataset::from_rows(1, rows, vec![F::zero(); n])?;
    hat_constant(&ds, &RegularityDiag::identity(n), perm, b, power)
}

/// `L̃^g_π = max_j (1/b) Σ_{i ∈ block j} L_{π_i}`.
pub fn general_tilde_l<F: Scalar>(l_values: &[F], perm: &[usize], b: usize) -> Result<F> {
    let n = l_values.len();
    check_perm(perm, n)?;
    check_batch(n, b)?;
    Ok(perm
        .chunks(b)
        .map(|blk| blk.iter().map(|&p| l_values[p]).sum::<F>() / F::of_usize(b))
        .fold(F::zero(), F::max))
}

/// Seed of the `index`-th sampled permutation under master `seed`.
pub fn permutation_seed(seed: u64, index: usize) -> u64 {
    rng::mix(seed, index as u64)
}

/// The `index`-th sampled permutation of `0..n` under master `seed`.
pub fn sampled_permutation(n: usize, seed: u64, index: usize) -> Vec<usize> {
    rng::permutation(n, permutation_seed(seed, index), 0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioConfig {
    pub batch: usize,
    pub num_perms: usize,
    pub seed: u64,
    pub power: PowerIteration,
    pub with_tilde: bool,
    pub bins: usize,
}

impl Default for RatioConfig {
    fn default() -> Self {
        Self {
            batch: 1,
            num_perms: 1000,
            seed: 0,
            power: PowerIteration::default(),
            with_tilde: true,
            bins: 20,
        }
    }
}

/// Samples permutations and computes `L̂_π`, optionally `L̃_π`, and the
/// ratios `L/L̂_π` (and `L/L̃_π`). Permutations are evaluated in parallel; the
/// result does not depend on the thread count.
pub fn ratio_stats<F: Scalar>(ds: &SparseDataset<F>, reg: &RegularityDiag<F>, cfg: &RatioConfig) -> Result<ConstantsReport> {
    check_reg(ds, reg)?;
    check_batch(ds.n(), cfg.batch)?;
    if cfg.num_perms == 0 {
        return Err(Error::Config("at least one permutation is required".into()));
    }
    let n = ds.n();
    let l = classical_l(ds, reg)?;
    let mean_sq = mean_weighted_sq_norm(ds, reg)?;
    let full = full_gradient_l_estimate(ds, reg, &cfg.power)?;

    let samples: Vec<Result<PermutationSample>> = (0..cfg.num_perms)
        .into_par_iter()
        .map(|index| {
            let perm_seed = permutation_seed(cfg.seed, index);
            let perm = rng::permutation(n, perm_seed, 0);
            let hat = hat_constant_estimate(ds, reg, &perm, cfg.batch, &cfg.power)?;
            let tilde = if cfg.with_tilde {
                Some(tilde_constant_estimate(ds, reg, &perm, cfg.batch, &cfg.power)?)
            } else {
                None
            };
            Ok(PermutationSample {
                index,
                perm_seed,
                hat_l: hat.value.as_f64(),
                tilde_l: tilde.map(|t| t.value.as_f64()),
                ratio: (l / hat.value).as_f64(),
                tilde_ratio: tilde.map(|t| (l / t.value).as_f64()),
                converged: hat.converged && tilde.is_none_or(|t| t.converged),
            })
        })
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;

    let l64 = l.as_f64();
    let slack = 1e-9 * l64;
    let chain_violations = samples
        .iter()
        .filter(|s| {
            s.hat_l > mean_sq.as_f64() + slack || s.tilde_l.is_some_and(|t| t > l64 + slack)
        })
        .count();

    let collect = |f: &dyn Fn(&PermutationSample) -> Option<f64>| -> Option<SampleSet> {
        let values: Vec<f64> = samples.iter().filter_map(f).collect();
        (values.len() == samples.len()).then(|| SampleSet::new(values)).flatten()
    };
    let hat_set = collect(&|s| Some(s.hat_l)).expect("nonempty");
    let ratios = collect(&|s| Some(s.ratio)).expect("nonempty");
    let histogram = Histogram::new(&ratios.values, cfg.bins.max(1)).expect("nonempty");

    Ok(ConstantsReport {
        schema_version: SCHEMA_VERSION,
        n,
        d: ds.d(),
        nnz: ds.nnz(),
        batch: cfg.batch,
        num_perms: cfg.num_perms,
        seed: cfg.seed,
        tol: cfg.power.tol,
        max_iter: cfg.power.max_iter,
        l: l64,
        mean_sq_norm: mean_sq.as_f64(),
        l_full: full.value.as_f64(),
        hat_l: hat_set,
        tilde_l: collect(&|s| s.tilde_l),
        ratios,
        tilde_ratios: collect(&|s| s.tilde_ratio),
        ratio_histogram: histogram,
        sigma_star: None,
        ystar_norm: None,
        non_converged: samples.iter().filter(|s| !s.converged).count() + usize::from(!full.converged),
        chain_violations,
        samples,
    })
}

/// `Ḡ`, the sample mean of `√(Ĝ_π G̃_π)` over `num_perms` permutations, with
/// `gamma` holding squared Lipschitz constants.
pub fn lipschitz_gbar<F: Scalar>(
    ds: &SparseDataset<F>,
    gamma: &RegularityDiag<F>,
    b: usize,
    num_perms: usize,
    seed: u64,
    power: &PowerIteration,
) -> Result<F> {
    check_reg(ds, gamma)?;
    if num_perms == 0 {
        return Err(Error::Config("at least one permutation is required".into()));
    }
    let n = ds.n();
    let terms = (0..num_perms)
        .into_par_iter()
        .map(|index| {
            let perm = sampled_permutation(n, seed, index);
            let hat = hat_constant(ds, gamma, &perm, b, power)?;
            let tilde = tilde_constant(ds, gamma, &perm, b, power)?;
            Ok((hat * tilde).sqrt())
        })
        .collect::<Result<Vec<F>>>()?;
    Ok(terms.into_iter().sum::<F>() / F::of_usize(num_perms))
}

fn check_stationary<F: Scalar>(ds: &SparseDataset<F>, model: &LossModel<F>, x: &[F], grad_tol: f64) -> Result<()> {
    check_model(model, ds)?;
    if x.len() != ds.d() {
        return Err(Error::DimensionMismatch {
            expected: ds.d(),
            got: x.len(),
        });
    }
    let grad_norm = sq_norm(&gradient(ds, model, x)).sqrt().as_f64();
    if !(grad_norm <= grad_tol) {
        return Err(Error::NotStationary { grad_norm, tol: grad_tol });
    }
    Ok(())
}

/// `σ* = √((1/n) Σ_i ℓ'_i(a_iᵀx*)² ‖a_i‖²)`, after checking `‖∇f(x*)‖ ≤ grad_tol`.
pub fn sigma_star<F: Scalar>(ds: &SparseDataset<F>, model: &LossModel<F>, x_star: &[F], grad_tol: f64) -> Result<F> {
    check_stationary(ds, model, x_star, grad_tol)?;
    let total: F = ds
        .rows()
        .enumerate()
        .map(|(i, row)| {
            let y = model.derivative(i, row.dot(x_star));
            y * y * row.sq_norm()
        })
        .sum();
    Ok((total / F::of_usize(ds.n())).sqrt())
}

/// `‖y*‖_{Λ⁻¹} = √(Σ_i (y*_i)² / L_i)` with `y*` the conjugate pair of `x*`.
pub fn ystar_weighted_norm<F: Scalar>(
    ds: &SparseDataset<F>,
    model: &LossModel<F>,
    x_star: &[F],
    grad_tol: f64,
) -> Result<F> {
    if !model.family().is_smooth() {
        return Err(Error::Config(format!(
            "the Λ⁻¹-norm needs a smooth loss, got {}",
            model.family()
        )));
    }
    check_stationary(ds, model, x_star, grad_tol)?;
    let reg = model.regularity();
    Ok(ds
        .rows()
        .enumerate()
        .map(|(i, row)| {
            let y = model.derivative(i, row.dot(x_star));
            y * y / reg.values()[i]
        })
        .sum::<F>()
        .sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizerConfig {
    /// Stop once `‖∇f(x)‖ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub power: PowerIteration,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1_000_000,
            power: PowerIteration::default().with_tol(1e-10),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimizer<F> {
    pub x: Vec<F>,
    pub grad_norm: F,
    pub iterations: usize,
    pub converged: bool,
}

/// Full gradient descent from `x0` with step `1/L_full`, halved while the
/// sufficient-decrease test fails.
pub fn reference_minimizer<F: Scalar>(
    ds: &SparseDataset<F>,
    model: &LossModel<F>,
    x0: Option<&[F]>,
    cfg: &MinimizerConfig,
) -> Result<Minimizer<F>> {
    check_model(model, ds)?;
    if !model.family().is_smooth() {
        return Err(Error::Config(format!(
            "reference minimizer needs a smooth loss, got {}",
            model.family()
        )));
    }
    let mut x = match x0 {
        Some(x0) if x0.len() != ds.d() => {
            return Err(Error::DimensionMismatch {
                expected: ds.d(),
                got: x0.len(),
            })
        }
        Some(x0) => x0.to_vec(),
        None => vec![F::zero(); ds.d()],
    };
    let l_full = full_gradient_l(ds, &model.regularity(), &cfg.power)?;
    let base_step = if l_full > F::zero() { F::one() / l_full } else { F::one() };
    let tol = F::of(cfg.tol);
    let half = F::of(0.5);
    // objective comparisons carry a few ulps of rounding
    let slack = F::of(16.0) * F::epsilon();

    let mut fx = objective(ds, model, &x);
    let mut g = gradient(ds, model, &x);
    let mut gnorm2 = sq_norm(&g);
    let mut trial = vec![F::zero(); x.len()];
    for it in 0..cfg.max_iter {
        if gnorm2.sqrt() <= tol {
            return Ok(Minimizer {
                x,
                grad_norm: gnorm2.sqrt(),
                iterations: it,
                converged: true,
            });
        }
        let mut t = base_step;
        let mut ft;
        let mut halvings = 0;
        loop {
            for ((xt, &xv), &gv) in trial.iter_mut().zip(&x).zip(&g) {
                *xt = xv - t * gv;
            }
            ft = objective(ds, model, &trial);
            if ft <= fx - half * t * gnorm2 + slack * fx.abs() || halvings >= 60 {
                break;
            }
            t *= half;
            halvings += 1;
        }
        std::mem::swap(&mut x, &mut trial);
        fx = ft;
        g = gradient(ds, model, &x);
        gnorm2 = sq_norm(&g);
        if !fx.is_finite() {
            break;
        }
    }
    let grad_norm = gnorm2.sqrt();
    Ok(Minimizer {
        converged: grad_norm <= tol,
        x,
        grad_norm,
        iterations: cfg.max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossFamily;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn tight() -> PowerIteration {
        PowerIteration::default().with_tol(1e-13).with_max_iter(100_000)
    }

    fn ds(rows: &[Vec<f64>]) -> SparseDataset<f64> {
        SparseDataset::from_dense(rows, vec![0.0; rows.len()]).unwrap()
    }

    fn id(n: usize) -> SparseDataset<f64> {
        ds(&(0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect::<Vec<_>>())
    }

    fn reg(w: &[f64]) -> RegularityDiag<f64> {
        RegularityDiag::smooth(w.to_vec()).unwrap()
    }

    #[test]
    fn classical_examples() {
        assert_eq!(classical_l(&id(2), &reg(&[1.0, 1.0])).unwrap(), 1.0);
        let a = ds(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert_eq!(classical_l(&a, &reg(&[1.0, 1.0])).unwrap(), 4.0);
        assert_eq!(classical_l(&id(2), &reg(&[4.0, 1.0])).unwrap(), 4.0);
    }

    #[test]
    fn full_gradient_examples() {
        let p = tight();
        assert_relative_eq!(full_gradient_l(&id(2), &reg(&[1.0; 2]), &p).unwrap(), 0.5, max_relative = 1e-10);
        let e1 = ds(&[vec![1.0], vec![1.0]]);
        assert_relative_eq!(full_gradient_l(&e1, &reg(&[1.0; 2]), &p).unwrap(), 1.0, max_relative = 1e-10);
        let zero = SparseDataset::from_rows(3, vec![vec![], vec![]], vec![0.0; 2]).unwrap();
        assert_eq!(full_gradient_l(&zero, &reg(&[1.0; 2]), &p).unwrap(), 0.0);
    }

    #[test]
    fn hat_examples() {
        let p = tight();
        assert_relative_eq!(hat_constant(&id(2), &reg(&[1.0; 2]), &[0, 1], 1, &p).unwrap(), 0.5, max_relative = 1e-10);
        for n in [3, 5, 16] {
            let perm = sampled_permutation(n, 4, 0);
            let hat = hat_constant(&id(n), &reg(&vec![1.0; n]), &perm, 1, &p).unwrap();
            assert_relative_eq!(hat, 1.0 / n as f64, max_relative = 1e-10);
        }
        let e1 = ds(&[vec![1.0], vec![1.0]]);
        assert_relative_eq!(
            hat_constant(&e1, &reg(&[1.0; 2]), &[1, 0], 1, &p).unwrap(),
            (3.0 + 5f64.sqrt()) / 8.0,
            max_relative = 1e-10
        );
        assert!(matches!(
            hat_constant(&e1, &reg(&[1.0; 2]), &[1, 0], 3, &p),
            Err(Error::BatchDivisibility { n: 2, b: 3 })
        ));
    }

    #[test]
    fn tilde_examples() {
        let p = tight();
        let a = ds(&[vec![1.0, 0.5], vec![0.0, 2.0], vec![3.0, 0.0], vec![0.1, 0.1]]);
        let w = reg(&[1.0, 2.0, 0.5, 3.0]);
        assert_eq!(tilde_constant(&a, &w, &[2, 0, 3, 1], 1, &p).unwrap(), classical_l(&a, &w).unwrap());
        assert_relative_eq!(tilde_constant(&id(2), &reg(&[1.0; 2]), &[0, 1], 2, &p).unwrap(), 0.5, max_relative = 1e-10);
        let e1 = ds(&[vec![1.0], vec![1.0]]);
        assert_relative_eq!(tilde_constant(&e1, &reg(&[1.0; 2]), &[0, 1], 2, &p).unwrap(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn general_examples() {
        let p = tight();
        assert_relative_eq!(
            general_hat_l(&[1.0, 1.0], &[0, 1], 1, &p).unwrap(),
            (3.0 + 5f64.sqrt()) / 8.0,
            max_relative = 1e-10
        );
        assert_relative_eq!(general_hat_l(&[2.5], &[0], 1, &p).unwrap(), 2.5, max_relative = 1e-12);
        assert_eq!(general_tilde_l(&[1.0, 3.0], &[0, 1], 1).unwrap(), 3.0);
        assert_eq!(general_tilde_l(&[1.0, 3.0], &[0, 1], 2).unwrap(), 2.0);
        assert_relative_eq!(general_tilde_l(&[4.0, 2.0, 6.0, 0.1], &[0, 1, 2, 3], 2).unwrap(), 3.05);
        assert!(general_tilde_l(&[1.0, 3.0, 2.0], &[0, 1, 2], 2).is_err());
    }

    #[test]
    fn sigma_and_ystar_examples() {
        let a = id(2);
        let m = LossModel::new(LossFamily::Squared, vec![1.0, 2.0]);
        assert_eq!(sigma_star(&a, &m, &[1.0, 2.0], 1e-10).unwrap(), 0.0);
        assert_eq!(ystar_weighted_norm(&a, &m, &[1.0, 2.0], 1e-10).unwrap(), 0.0);

        let col = ds(&[vec![1.0], vec![1.0]]);
        let m = LossModel::new(LossFamily::Squared, vec![0.0, 2.0]);
        assert_relative_eq!(sigma_star(&col, &m, &[1.0], 1e-10).unwrap(), 1.0);
        assert_relative_eq!(ystar_weighted_norm(&col, &m, &[1.0], 1e-10).unwrap(), 2f64.sqrt());
        assert!(matches!(
            sigma_star(&col, &m, &[0.0], 1e-10),
            Err(Error::NotStationary { .. })
        ));

        // rows scaled by 2: x* halves, residuals stay ±1, ‖a_i‖² quadruples
        let col2 = col.scaled(2.0);
        assert_relative_eq!(sigma_star(&col2, &m, &[0.5], 1e-10).unwrap(), 2.0);

        // Λ = (4, 4), y* = (2, 0)
        let m = LossModel::new(LossFamily::Squared, vec![-0.5, 0.0]).with_scales(vec![4.0, 4.0]).unwrap();
        assert_relative_eq!(ystar_weighted_norm(&a, &m, &[0.0, 0.0], f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn minimizer_examples() {
        let cfg = MinimizerConfig::default();
        let m = LossModel::new(LossFamily::Squared, vec![1.0, 2.0]);
        let r = reference_minimizer(&id(2), &m, None, &cfg).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-9 && (r.x[1] - 2.0).abs() < 1e-9);

        let col = ds(&[vec![1.0], vec![1.0]]);
        let m = LossModel::new(LossFamily::Squared, vec![0.0, 2.0]);
        let r = reference_minimizer(&col, &m, None, &cfg).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-9);

        let zero = SparseDataset::from_rows(2, vec![vec![], vec![]], vec![0.0; 2]).unwrap();
        let m = LossModel::for_dataset(LossFamily::Squared, &zero);
        let r = reference_minimizer(&zero, &m, Some(&[0.3, -0.1]), &cfg).unwrap();
        assert_eq!((r.x.clone(), r.iterations), (vec![0.3, -0.1], 0));

        let hinge = LossModel::new(LossFamily::Hinge, vec![1.0, 1.0]);
        assert!(reference_minimizer(&col, &hinge, None, &cfg).is_err());
    }

    #[test]
    fn logistic_minimizer_is_stationary() {
        let a = ds(&[vec![1.0, 0.2], vec![-0.5, 1.0], vec![0.3, -1.0], vec![-1.0, -0.4]]);
        let m = LossModel::new(LossFamily::Logistic, vec![1.0, 1.0, -1.0, 1.0]);
        let r = reference_minimizer(&a, &m, None, &MinimizerConfig::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert!(sigma_star(&a, &m, &r.x, 1e-9).unwrap() > 0.0);
    }

    #[test]
    fn ratio_stats_identity() {
        let n = 8;
        let cfg = RatioConfig {
            num_perms: 5,
            power: tight(),
            ..RatioConfig::default()
        };
        let rep = ratio_stats(&id(n), &RegularityDiag::identity(n), &cfg).unwrap();
        for r in &rep.ratios.values {
            assert_relative_eq!(*r, n as f64, max_relative = 1e-9);
        }
        assert_eq!(rep.chain_violations, 0);
        assert_eq!(rep.samples.len(), 5);
        assert!(rep.tilde_ratios.unwrap().values.iter().all(|&r| r == 1.0));
    }

    fn dense_norm(m: DMatrix<f64>) -> f64 {
        m.symmetric_eigenvalues().max().max(0.0)
    }

    /// `(G ∘ C)` and its block-diagonal part built densely.
    fn dense_constants(rows: &[Vec<f64>], w: &[f64], perm: &[usize], b: usize) -> (f64, f64) {
        let n = rows.len();
        let d = rows[0].len();
        let bm = DMatrix::from_fn(n, d, |k, j| w[perm[k]].sqrt() * rows[perm[k]][j]);
        let g = &bm * bm.transpose();
        let c = DMatrix::from_fn(n, n, |k, l| (k / b + 1).min(l / b + 1) as f64);
        let hat = dense_norm(g.component_mul(&c)) / ((n / b) * n) as f64;
        let tilde = (0..n / b)
            .map(|j| dense_norm(g.view((j * b, j * b), (b, b)).into_owned()))
            .fold(0.0, f64::max)
            / b as f64;
        (hat, tilde)
    }

    fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<usize>, usize)> {
        (1usize..4, 1usize..6, 1usize..5).prop_flat_map(|(b, m, d)| {
            let n = b * m;
            (
                prop::collection::vec(prop::collection::vec(prop_oneof![Just(0.0), -2.0f64..2.0], d), n),
                prop::collection::vec(0.1f64..10.0, n),
                Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
                Just(b),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_dense_oracle((rows, w, perm, b) in instance()) {
            let a = ds(&rows);
            let r = reg(&w);
            let (hat, tilde) = dense_constants(&rows, &w, &perm, b);
            let got_hat = hat_constant(&a, &r, &perm, b, &tight()).unwrap();
            let got_tilde = tilde_constant(&a, &r, &perm, b, &tight()).unwrap();
            prop_assert!((got_hat - hat).abs() <= 1e-6 * hat.max(1e-300));
            prop_assert!((got_tilde - tilde).abs() <= 1e-6 * tilde.max(1e-300));
        }

        #[test]
        fn chain_and_reductions((rows, w, perm, b) in instance()) {
            let a = ds(&rows);
            let r = reg(&w);
            let p = tight();
            let l = classical_l(&a, &r).unwrap();
            let mean = mean_weighted_sq_norm(&a, &r).unwrap();
            let hat = hat_constant(&a, &r, &perm, b, &p).unwrap();
            prop_assert!(hat <= mean + 1e-9 * l);
            prop_assert!(mean <= l);
            prop_assert!(tilde_constant(&a, &r, &perm, b, &p).unwrap() <= l + 1e-9 * l);
            prop_assert_eq!(tilde_constant(&a, &r, &perm, 1, &p).unwrap(), l);
            let n = rows.len();
            let full = full_gradient_l(&a, &r, &p).unwrap();
            let hat_n = hat_constant(&a, &r, &perm, n, &p).unwrap();
            prop_assert!((hat_n - full).abs() <= 1e-8 * full.max(1e-300));
        }

        #[test]
        fn general_constants_are_relaxed(
            l in prop::collection::vec(0.01f64..10.0, 1..13),
            seed in any::<u64>(),
        ) {
            let n = l.len();
            let perm = rng::permutation(n, seed, 0);
            let max = l.iter().copied().fold(0.0, f64::max);
            let mean = l.iter().sum::<f64>() / n as f64;
            for b in (1..=n).filter(|b| n % b == 0) {
                prop_assert!(general_tilde_l(&l, &perm, b).unwrap() <= max);
                prop_assert!(general_hat_l(&l, &perm, b, &tight()).unwrap() <= mean * (1.0 + 1e-9));
            }
        }
    }
}
