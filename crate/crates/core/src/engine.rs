//! Mini-batch shuffled SGD in its primal-dual form: each inner step computes a
//! dual block `y_j = ℓ'_j(a_jᵀx)` over the batch and then takes the primal step
//! `x ← x − (η/b) Σ_j y_j a_j`. General finite sums are run through
//! [`ComponentOracle`].

use crate::dataset::{PermutedView, SparseDataset};
use crate::error::{Error, Result};
use crate::losses::{check_model, LossModel};
use crate::scalar::{dot, sq_dist, Scalar};
use crate::shuffle::ShufflePlan;

#[derive(Clone, Debug, PartialEq)]
pub enum StepSchedule<F> {
    Constant(F),
    /// `η_k` for epochs `1..=K`.
    PerEpoch(Vec<F>),
}

impl<F: Scalar> StepSchedule<F> {
    /// `η_k` for the 1-based epoch `k`.
    pub fn step(&self, k: usize) -> F {
        match self {
            StepSchedule::Constant(eta) => *eta,
            StepSchedule::PerEpoch(steps) => steps[k - 1],
        }
    }

    pub fn steps(&self, epochs: usize) -> Vec<F> {
        (1..=epochs).map(|k| self.step(k)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig<F> {
    pub batch: usize,
    pub epochs: usize,
    pub steps: StepSchedule<F>,
    pub x0: Vec<F>,
    /// Keep inner iterates and dual blocks, and evaluate the retraction term.
    pub record_inner: bool,
    /// Evaluate `f(x_k)` and `f(x̂_k)` once per epoch.
    pub evaluate_objective: bool,
}

impl<F: Scalar> RunConfig<F> {
    pub fn new(batch: usize, epochs: usize, step: F, x0: Vec<F>) -> Self {
        Self {
            batch,
            epochs,
            steps: StepSchedule::Constant(step),
            x0,
            record_inner: false,
            evaluate_objective: true,
        }
    }

    pub fn with_schedule(mut self, steps: Vec<F>) -> Self {
        self.steps = StepSchedule::PerEpoch(steps);
        self
    }

    pub fn record_inner(mut self, on: bool) -> Self {
        self.record_inner = on;
        self
    }

    pub fn evaluate_objective(mut self, on: bool) -> Self {
        self.evaluate_objective = on;
        self
    }

    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.batch == 0 || !n.is_multiple_of(self.batch) {
            return Err(Error::BatchDivisibility { n, b: self.batch });
        }
        if self.epochs == 0 {
            return Err(Error::Config("number of epochs must be at least 1".into()));
        }
        if self.x0.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.x0.len(),
            });
        }
        if let StepSchedule::PerEpoch(steps) = &self.steps {
            if steps.len() < self.epochs {
                return Err(Error::Config(format!(
                    "step schedule has {} entries for {} epochs",
                    steps.len(),
                    self.epochs
                )));
            }
        }
        for k in 1..=self.epochs {
            let eta = self.steps.step(k);
            if !(eta.is_finite() && eta > F::zero()) {
                return Err(Error::Config(format!("step size in epoch {k} must be positive, got {eta}")));
            }
        }
        Ok(())
    }
}

/// Diagnostics of one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochTrace<F> {
    pub epoch: usize,
    pub step: F,
    pub permutation: Vec<usize>,
    /// `x_{k−1,1}, …, x_{k−1,m+1}` when recorded.
    pub inner_iterates: Option<Vec<Vec<F>>>,
    /// `y_k^{(1)}, …, y_k^{(m)}` when recorded (linear-predictor runs only).
    pub dual_blocks: Option<Vec<Vec<F>>>,
    /// `Σ_i ‖x_{k−1,i} − x_{k−1,i+1}‖²`
    pub squared_steps: F,
    /// `‖x_{k−1} − x_k‖²`
    pub epoch_displacement_sq: F,
    /// `(η/n) Σ_i g_iᵀ(x_k − x_{k−1,i+1})` with `g_i` the batch gradient sum,
    /// when recorded.
    pub t1: Option<F>,
}

/// Objective values recorded once per epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveTrace<F> {
    /// `f(x_0)`
    pub initial: F,
    /// `f(x_k)` for `k = 1..=K`
    pub iterates: Vec<F>,
    /// `f(x̂_k)` for `k = 1..=K`
    pub averaged: Vec<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult<F> {
    pub batch: usize,
    pub steps: Vec<F>,
    /// `x_1, …, x_K`
    pub iterates: Vec<Vec<F>>,
    /// `x̂_K = Σ η_k x_k / Σ η_k`
    pub averaged: Vec<F>,
    pub traces: Vec<EpochTrace<F>>,
    pub objectives: Option<ObjectiveTrace<F>>,
}

impl<F: Scalar> RunResult<F> {
    /// `H_K = Σ η_k`.
    pub fn step_sum(&self) -> F {
        self.steps.iter().copied().sum()
    }

    pub fn last(&self) -> &[F] {
        self.iterates.last().expect("a run has at least one epoch")
    }
}

/// Dual block `(ℓ'_{π_j}(a_{π_j}ᵀx))_j` for the 0-based block `block`.
pub fn dual_block_update<F: Scalar>(
    model: &LossModel<F>,
    view: &PermutedView<'_, F>,
    block: usize,
    x: &[F],
    b: usize,
) -> Vec<F> {
    (block * b..(block + 1) * b)
        .map(|pos| model.derivative(view.source(pos), view.row(pos).dot(x)))
        .collect()
}

/// `x ← x − (η/b) Σ_j y_j a_{π_j}` over the 0-based block `block`.
pub fn primal_block_step<F: Scalar>(
    x: &mut [F],
    view: &PermutedView<'_, F>,
    block: usize,
    y_block: &[F],
    eta: F,
    b: usize,
) {
    let scale = eta / F::of_usize(b);
    for (j, &y) in y_block.iter().enumerate() {
        if y != F::zero() {
            view.row(block * b + j).axpy(-(scale * y), x);
        }
    }
}

/// `f(x) = (1/n) Σ ℓ_i(a_iᵀx)`.
pub fn objective<F: Scalar>(ds: &SparseDataset<F>, model: &LossModel<F>, x: &[F]) -> F {
    let total: F = ds.rows().enumerate().map(|(i, row)| model.value(i, row.dot(x))).sum();
    total / F::of_usize(ds.n())
}

/// `∇f(x) = (1/n) Σ ℓ'_i(a_iᵀx) a_i`.
pub fn gradient<F: Scalar>(ds: &SparseDataset<F>, model: &LossModel<F>, x: &[F]) -> Vec<F> {
    let mut g = vec![F::zero(); ds.d()];
    let inv_n = F::one() / F::of_usize(ds.n());
    for (i, row) in ds.rows().enumerate() {
        let y = model.derivative(i, row.dot(x));
        if y != F::zero() {
            row.axpy(y * inv_n, &mut g);
        }
    }
    g
}

/// Component gradients of a general finite sum `f = (1/n) Σ f_i`.
pub trait ComponentOracle<F: Scalar> {
    fn n(&self) -> usize;
    fn d(&self) -> usize;
    /// `out += alpha · ∇f_i(x)`
    fn add_gradient(&self, i: usize, x: &[F], alpha: F, out: &mut [F]);
    /// `f_i(x)`, if available.
    fn value(&self, _i: usize, _x: &[F]) -> Option<F> {
        None
    }
}

/// `f_i(x) = ℓ_i(a_iᵀx)`.
pub struct GlmOracle<'a, F> {
    ds: &'a SparseDataset<F>,
    model: &'a LossModel<F>,
}

impl<'a, F: Scalar> GlmOracle<'a, F> {
    pub fn new(ds: &'a SparseDataset<F>, model: &'a LossModel<F>) -> Result<Self> {
        check_model(model, ds)?;
        Ok(Self { ds, model })
    }
}

impl<F: Scalar> ComponentOracle<F> for GlmOracle<'_, F> {
    fn n(&self) -> usize {
        self.ds.n()
    }

    fn d(&self) -> usize {
        self.ds.d()
    }

    fn add_gradient(&self, i: usize, x: &[F], alpha: F, out: &mut [F]) {
        let row = self.ds.row(i);
        let y = self.model.derivative(i, row.dot(x));
        if y != F::zero() {
            row.axpy(alpha * y, out);
        }
    }

    fn value(&self, i: usize, x: &[F]) -> Option<F> {
        Some(self.model.value(i, self.ds.row(i).dot(x)))
    }
}

/// Oracle from a closure returning `∇f_i(x)`.
pub struct FnOracle<G> {
    n: usize,
    d: usize,
    grad: G,
}

impl<G> FnOracle<G> {
    pub fn new(n: usize, d: usize, grad: G) -> Self {
        Self { n, d, grad }
    }
}

impl<F: Scalar, G: Fn(usize, &[F]) -> Vec<F>> ComponentOracle<F> for FnOracle<G> {
    fn n(&self) -> usize {
        self.n
    }

    fn d(&self) -> usize {
        self.d
    }

    fn add_gradient(&self, i: usize, x: &[F], alpha: F, out: &mut [F]) {
        for (o, g) in out.iter_mut().zip((self.grad)(i, x)) {
            *o += alpha * g;
        }
    }
}

/// Bookkeeping shared by both drivers.
struct Driver<F> {
    d: usize,
    iterates: Vec<Vec<F>>,
    weighted_sum: Vec<F>,
    step_sum: F,
    steps: Vec<F>,
    traces: Vec<EpochTrace<F>>,
    objectives: Option<ObjectiveTrace<F>>,
}

impl<F: Scalar> Driver<F> {
    fn new(d: usize, initial_objective: Option<F>) -> Self {
        Self {
            d,
            iterates: Vec::new(),
            weighted_sum: vec![F::zero(); d],
            step_sum: F::zero(),
            steps: Vec::new(),
            traces: Vec::new(),
            objectives: initial_objective.map(|initial| ObjectiveTrace {
                initial,
                iterates: Vec::new(),
                averaged: Vec::new(),
            }),
        }
    }

    fn averaged(&self) -> Vec<F> {
        self.weighted_sum.iter().map(|&s| s / self.step_sum).collect()
    }

    /// Closes epoch `k`; `f` evaluates the objective if enabled.
    fn finish_epoch(
        &mut self,
        k: usize,
        eta: F,
        x: &[F],
        mut trace: EpochTrace<F>,
        batch_grads: Option<Vec<Vec<F>>>,
        n: usize,
        f: impl Fn(&[F]) -> F,
    ) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch: k });
        }
        if let (Some(inner), Some(grads)) = (&trace.inner_iterates, &batch_grads) {
            let mut t1 = F::zero();
            let mut diff = vec![F::zero(); self.d];
            for (i, g) in grads.iter().enumerate() {
                for ((dv, &xk), &xi) in diff.iter_mut().zip(x).zip(&inner[i + 1]) {
                    *dv = xk - xi;
                }
                t1 += dot(g, &diff);
            }
            trace.t1 = Some(eta / F::of_usize(n) * t1);
        }
        self.traces.push(trace);
        for (s, &v) in self.weighted_sum.iter_mut().zip(x) {
            *s += eta * v;
        }
        self.step_sum += eta;
        self.steps.push(eta);
        self.iterates.push(x.to_vec());
        if self.objectives.is_some() {
            let fx = f(x);
            let fa = f(&self.averaged());
            let obj = self.objectives.as_mut().expect("checked above");
            obj.iterates.push(fx);
            obj.averaged.push(fa);
        }
        Ok(())
    }

    fn into_result(self, batch: usize) -> RunResult<F> {
        let averaged = self.averaged();
        RunResult {
            batch,
            steps: self.steps,
            iterates: self.iterates,
            averaged,
            traces: self.traces,
            objectives: self.objectives,
        }
    }
}

fn check_plan(plan: &ShufflePlan, n: usize, epochs: usize) -> Result<()> {
    if plan.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: plan.n(),
        });
    }
    if plan.epochs() < epochs {
        return Err(Error::Config(format!(
            "shuffle plan covers {} epochs, run needs {epochs}",
            plan.epochs()
        )));
    }
    Ok(())
}

fn new_trace<F: Scalar>(k: usize, eta: F, permutation: Vec<usize>, x: &[F], record: bool) -> EpochTrace<F> {
    EpochTrace {
        epoch: k,
        step: eta,
        permutation,
        inner_iterates: record.then(|| vec![x.to_vec()]),
        dual_blocks: record.then(Vec::new),
        squared_steps: F::zero(),
        epoch_displacement_sq: F::zero(),
        t1: None,
    }
}

/// Runs `K` epochs of shuffled SGD on `f(x) = (1/n) Σ ℓ_i(a_iᵀx)`.
pub fn run<F: Scalar>(
    ds: &SparseDataset<F>,
    model: &LossModel<F>,
    plan: &ShufflePlan,
    cfg: &RunConfig<F>,
) -> Result<RunResult<F>> {
    check_model(model, ds)?;
    let (n, d, b) = (ds.n(), ds.d(), cfg.batch);
    cfg.validate(n, d)?;
    check_plan(plan, n, cfg.epochs)?;
    let m = n / b;

    let mut x = cfg.x0.clone();
    let f = |z: &[F]| objective(ds, model, z);
    let mut driver = Driver::new(d, cfg.evaluate_objective.then(|| f(&x)));

    for k in 1..=cfg.epochs {
        let eta = cfg.steps.step(k);
        let perm = plan.permutation_for(k)?;
        let view = PermutedView::new(ds, &perm)?;
        let start = x.clone();
        let mut trace = new_trace(k, eta, perm.clone(), &x, cfg.record_inner);
        let mut grads = cfg.record_inner.then(|| Vec::with_capacity(m));
        let mut prev = x.clone();

        for block in 0..m {
            let y = dual_block_update(model, &view, block, &x, b);
            primal_block_step(&mut x, &view, block, &y, eta, b);
            trace.squared_steps += sq_dist(&prev, &x);
            prev.copy_from_slice(&x);
            if let Some(grads) = grads.as_mut() {
                let mut g = vec![F::zero(); d];
                for (j, &yj) in y.iter().enumerate() {
                    view.row(block * b + j).axpy(yj, &mut g);
                }
                grads.push(g);
                trace.inner_iterates.as_mut().expect("recorded").push(x.clone());
                trace.dual_blocks.as_mut().expect("recorded").push(y);
            }
        }
        trace.epoch_displacement_sq = sq_dist(&start, &x);
        driver.finish_epoch(k, eta, &x, trace, grads, n, f)?;
    }
    Ok(driver.into_result(b))
}

/// Runs `K` epochs of shuffled SGD on a general finite sum: each inner step is
/// `x ← x − (η/b) Σ_{j ∈ batch} ∇f_{π_j}(x)`.
pub fn run_general<F: Scalar, O: ComponentOracle<F> + ?Sized>(
    oracle: &O,
    plan: &ShufflePlan,
    cfg: &RunConfig<F>,
) -> Result<RunResult<F>> {
    let (n, d, b) = (oracle.n(), oracle.d(), cfg.batch);
    if n == 0 {
        return Err(Error::Config("oracle has no components".into()));
    }
    cfg.validate(n, d)?;
    check_plan(plan, n, cfg.epochs)?;
    let m = n / b;

    let f = |z: &[F]| -> F {
        let total = (0..n).map(|i| oracle.value(i, z).unwrap_or_else(F::nan)).sum::<F>();
        total / F::of_usize(n)
    };
    let has_values = oracle.value(0, &cfg.x0).is_some();
    let evaluate = cfg.evaluate_objective && has_values;

    let mut x = cfg.x0.clone();
    let mut driver = Driver::new(d, evaluate.then(|| f(&x)));
    let mut delta = vec![F::zero(); d];

    for k in 1..=cfg.epochs {
        let eta = cfg.steps.step(k);
        let perm = plan.permutation_for(k)?;
        let start = x.clone();
        let mut trace = new_trace(k, eta, perm.clone(), &x, cfg.record_inner);
        trace.dual_blocks = None;
        let mut grads = cfg.record_inner.then(|| Vec::with_capacity(m));
        let scale = eta / F::of_usize(b);

        for block in 0..m {
            delta.iter_mut().for_each(|v| *v = F::zero());
            for &i in &perm[block * b..(block + 1) * b] {
                oracle.add_gradient(i, &x, -scale, &mut delta);
            }
            for (xv, &dv) in x.iter_mut().zip(&delta) {
                *xv += dv;
            }
            trace.squared_steps += dot(&delta, &delta);
            if let (Some(grads), Some(inner)) = (grads.as_mut(), trace.inner_iterates.as_mut()) {
                let before = inner.last().expect("starts with x_{k-1}");
                let mut g = vec![F::zero(); d];
                for &i in &perm[block * b..(block + 1) * b] {
                    oracle.add_gradient(i, before, F::one(), &mut g);
                }
                grads.push(g);
                inner.push(x.clone());
            }
        }
        trace.epoch_displacement_sq = sq_dist(&start, &x);
        driver.finish_epoch(k, eta, &x, trace, grads, n, f)?;
    }
    Ok(driver.into_result(b))
}

/// `|T₁ − (b/2n)(Σ_i ‖x_{k−1,i} − x_{k−1,i+1}‖² − ‖x_{k−1} − x_k‖²)|` for a
/// recorded epoch.
pub fn lemma2_residual<F: Scalar>(trace: &EpochTrace<F>, b: usize, n: usize) -> Result<F> {
    let t1 = trace.t1.ok_or(Error::MissingTrace)?;
    let c = F::of_usize(b) / (F::of(2.0) * F::of_usize(n));
    Ok((t1 - c * (trace.squared_steps - trace.epoch_displacement_sq)).abs())
}

/// Magnitude scale `1 + |T₁| + (b/2n)(Σ‖·‖² + ‖·‖²)` against which the Lemma 2
/// residual is judged.
pub fn lemma2_scale<F: Scalar>(trace: &EpochTrace<F>, b: usize, n: usize) -> F {
    let c = F::of_usize(b) / (F::of(2.0) * F::of_usize(n));
    F::one() + trace.t1.unwrap_or_else(F::zero).abs() + c * (trace.squared_steps + trace.epoch_displacement_sq)
}
