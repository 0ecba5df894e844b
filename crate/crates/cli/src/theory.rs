use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use shuffled_sgd::bounds::{
    bound_rhs_ig, bound_rhs_nonsmooth, bound_rhs_smooth_rr, step_size_ig, step_size_nonsmooth, step_size_smooth_rr,
};
use shuffled_sgd::constants::{
    hat_constant, lipschitz_gbar, reference_minimizer, sampled_permutation, sigma_star, tilde_constant,
    ystar_weighted_norm,
};
use shuffled_sgd::engine::{lemma2_residual, objective};
use shuffled_sgd::stats::Summary;
use shuffled_sgd::{
    run, Bounds, BoundValue, ConstantProxy, Error, MinimizerConfig, PowerIteration, RunConfig, Scheme, ShufflePlan,
};

use crate::args::{OptimizeArgs, Proxy, StepMode, Theorem, TheoryArgs, VerifyArgs};
use crate::output::{with_output, write_csv, write_json, Header};
use crate::problem::{self, Problem};
use crate::{CliError, Status};

/// Where `x*` came from, or why it is unavailable.
enum Optimum {
    Found { x: Vec<f64>, grad_tol: f64 },
    Missing(String),
}

fn find_optimum(p: &Problem, t: &TheoryArgs) -> Result<Optimum, CliError> {
    if let Some(x) = &p.x_star {
        return Ok(Optimum::Found {
            x: x.clone(),
            grad_tol: t.opt_tol,
        });
    }
    if !p.model.family().is_smooth() {
        return Ok(Optimum::Missing(format!(
            "no known minimizer for the {} loss on this problem",
            p.model.family()
        )));
    }
    let cfg = MinimizerConfig {
        tol: t.opt_tol,
        max_iter: t.opt_max_iter,
        ..MinimizerConfig::default()
    };
    let m = reference_minimizer(&p.ds, &p.model, None, &cfg)?;
    Ok(if m.converged {
        Optimum::Found {
            x: m.x,
            grad_tol: t.opt_tol,
        }
    } else {
        Optimum::Missing(format!(
            "reference minimizer stopped at gradient norm {:e} after {} iterations",
            m.grad_norm, m.iterations
        ))
    })
}

fn spectral() -> PowerIteration {
    PowerIteration::default().with_tol(1e-10).with_max_iter(100_000)
}

/// `(L̂, L̃)` for the order the scheme uses: the identity for IG, a proxy over
/// sampled permutations otherwise.
fn smooth_constants(p: &Problem, scheme: Scheme, b: usize, t: &TheoryArgs, seed: u64) -> Result<(f64, f64), CliError> {
    let reg = p.model.regularity();
    let n = p.ds.n();
    let pw = spectral();
    if scheme == Scheme::Ig {
        let perm: Vec<usize> = (0..n).collect();
        return Ok((
            hat_constant(&p.ds, &reg, &perm, b, &pw)?,
            tilde_constant(&p.ds, &reg, &perm, b, &pw)?,
        ));
    }
    if t.proxy_perms == 0 {
        return Err(CliError::Usage("--proxy-perms must be positive".into()));
    }
    let samples = (0..t.proxy_perms)
        .into_par_iter()
        .map(|i| {
            let perm = sampled_permutation(n, seed, i);
            Ok((
                hat_constant(&p.ds, &reg, &perm, b, &pw)?,
                tilde_constant(&p.ds, &reg, &perm, b, &pw)?,
            ))
        })
        .collect::<Result<Vec<(f64, f64)>, Error>>()?;
    let proxy = match t.proxy {
        Proxy::Max => ConstantProxy::Max,
        Proxy::Mean => ConstantProxy::Mean,
    };
    let hats: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let tildes: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok((
        proxy.apply(&hats).expect("nonempty"),
        proxy.apply(&tildes).expect("nonempty"),
    ))
}

/// Inputs, step size and the bound for one theorem.
struct Theory {
    theorem: Theorem,
    inputs: Bounds,
    step: f64,
    f_star: f64,
}

impl Theory {
    fn rhs(&self) -> Result<BoundValue<f64>, CliError> {
        let steps = vec![self.step; self.inputs.k];
        Ok(match self.theorem {
            Theorem::Rr => bound_rhs_smooth_rr(&self.inputs, &steps)?,
            Theorem::Ig => bound_rhs_ig(&self.inputs, &steps)?,
            Theorem::Nonsmooth => bound_rhs_nonsmooth(&self.inputs, &steps)?,
        })
    }

    fn scheme(&self) -> Scheme {
        if self.theorem == Theorem::Ig {
            Scheme::Ig
        } else {
            Scheme::Rr
        }
    }
}

fn theory_for(
    p: &Problem,
    theorem: Theorem,
    b: usize,
    k: usize,
    t: &TheoryArgs,
    seed: u64,
    x_star: &[f64],
    grad_tol: f64,
    x0: &[f64],
) -> Result<Theory, CliError> {
    let n = p.ds.n();
    if !n.is_multiple_of(b) || b == 0 {
        return Err(CliError::Lib(Error::BatchDivisibility { n, b }));
    }
    let smooth = p.model.family().is_smooth();
    match (theorem, smooth) {
        (Theorem::Nonsmooth, true) => {
            return Err(CliError::Usage(format!(
                "the nonsmooth theorem needs a Lipschitz loss (hinge or absolute), got {}",
                p.model.family()
            )))
        }
        (Theorem::Rr | Theorem::Ig, false) => {
            return Err(CliError::Usage(format!(
                "the smooth theorems need a smooth loss (squared or logistic), got {}",
                p.model.family()
            )))
        }
        _ => {}
    }
    let mut inputs = Bounds::new(n, b, k);
    inputs.dist = x0.iter().zip(x_star).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
    let step = match theorem {
        Theorem::Rr | Theorem::Ig => {
            let scheme = if theorem == Theorem::Ig { Scheme::Ig } else { Scheme::Rr };
            (inputs.hat_l, inputs.tilde_l) = smooth_constants(p, scheme, b, t, seed)?;
            inputs.sigma_star = sigma_star(&p.ds, &p.model, x_star, grad_tol)?;
            if theorem == Theorem::Ig {
                inputs.ystar_norm = ystar_weighted_norm(&p.ds, &p.model, x_star, grad_tol)?;
                step_size_ig(&inputs)?
            } else {
                step_size_smooth_rr(&inputs)?
            }
        }
        Theorem::Nonsmooth => {
            inputs.gbar = lipschitz_gbar(&p.ds, &p.model.regularity(), b, t.proxy_perms.max(1), seed, &spectral())?;
            step_size_nonsmooth(&inputs)?
        }
    };
    Ok(Theory {
        theorem,
        inputs,
        step,
        f_star: objective(&p.ds, &p.model, x_star),
    })
}

fn theorem_label(t: Theorem) -> &'static str {
    match t {
        Theorem::Rr => "rr",
        Theorem::Ig => "ig",
        Theorem::Nonsmooth => "nonsmooth",
    }
}

struct SeedRun {
    seed: u64,
    /// `(epoch, step, f(x_k), f(x̂_k), residual)`
    epochs: Vec<(usize, f64, f64, f64, Option<f64>)>,
    diverged_at: Option<usize>,
}

fn run_seed(p: &Problem, scheme: Scheme, b: usize, k: usize, step: f64, seed: u64, residual: bool) -> Result<SeedRun, CliError> {
    let n = p.ds.n();
    let plan = ShufflePlan::new(scheme, n, k, seed);
    let cfg = RunConfig::new(b, k, step, vec![0.0; p.ds.d()]).record_inner(residual);
    match run(&p.ds, &p.model, &plan, &cfg) {
        Ok(res) => {
            let obj = res.objectives.as_ref().expect("objectives evaluated");
            let mut epochs = Vec::with_capacity(k);
            for (i, tr) in res.traces.iter().enumerate() {
                let r = if residual { Some(lemma2_residual(tr, b, n)?) } else { None };
                epochs.push((tr.epoch, tr.step, obj.iterates[i], obj.averaged[i], r));
            }
            Ok(SeedRun {
                seed,
                epochs,
                diverged_at: None,
            })
        }
        Err(Error::Divergence { epoch }) => Ok(SeedRun {
            seed,
            epochs: Vec::new(),
            diverged_at: Some(epoch),
        }),
        Err(e) => Err(e.into()),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

pub fn optimize(a: &OptimizeArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<Status, CliError> {
    let p = problem::from_args(&a.problem)?;
    let (n, d) = (p.ds.n(), p.ds.d());
    if a.batch == 0 || n % a.batch != 0 {
        return Err(CliError::Lib(Error::BatchDivisibility { n, b: a.batch }));
    }
    if a.seeds == 0 || a.epochs == 0 {
        return Err(CliError::Usage("--seeds and --epochs must be positive".into()));
    }
    let x0 = vec![0.0; d];
    let smooth = p.model.family().is_smooth();
    let theorem = match (smooth, a.scheme) {
        (false, _) => Theorem::Nonsmooth,
        (true, Scheme::Ig) => Theorem::Ig,
        (true, _) => Theorem::Rr,
    };

    let optimum = find_optimum(&p, &a.theory)?;
    let theory = match (&optimum, a.step) {
        (Optimum::Found { x, grad_tol }, _) => {
            Some(theory_for(&p, theorem, a.batch, a.epochs, &a.theory, a.seed, x, *grad_tol, &x0)?)
        }
        (Optimum::Missing(_), StepMode::Theoretical) if theorem == Theorem::Nonsmooth && a.dist.is_some() => {
            let mut inputs = Bounds::new(n, a.batch, a.epochs);
            inputs.dist = a.dist.expect("checked");
            inputs.gbar = lipschitz_gbar(&p.ds, &p.model.regularity(), a.batch, a.theory.proxy_perms.max(1), a.seed, &spectral())?;
            let step = step_size_nonsmooth(&inputs)?;
            Some(Theory {
                theorem,
                inputs,
                step,
                f_star: f64::NAN,
            })
        }
        (Optimum::Missing(why), StepMode::Theoretical) => {
            return Err(CliError::Usage(format!(
                "theoretical step needs x*: {why}; pass --dist (nonsmooth) or a fixed --step"
            )))
        }
        (Optimum::Missing(_), StepMode::Fixed(_)) => None,
    };
    let step = match a.step {
        StepMode::Fixed(v) => v,
        StepMode::Theoretical => theory.as_ref().expect("theoretical step").step,
    };
    let f_star = theory.as_ref().map(|t| t.f_star).filter(|f| f.is_finite());

    let runs = (0..a.seeds)
        .into_par_iter()
        .map(|s| run_seed(&p, a.scheme, a.batch, a.epochs, step, a.seed + s, !a.no_residual))
        .collect::<Result<Vec<SeedRun>, CliError>>()?;

    let mut rows = Vec::new();
    for r in &runs {
        for &(epoch, eta, fx, fa, res) in &r.epochs {
            rows.push(vec![
                r.seed.to_string(),
                epoch.to_string(),
                eta.to_string(),
                fx.to_string(),
                fa.to_string(),
                fmt_opt(res),
            ]);
        }
    }
    let mut header = Header::new("optimize")
        .set("problem", problem_label(&a.problem))
        .set("n", n)
        .set("d", d)
        .set("loss", p.model.family())
        .set("scheme", a.scheme)
        .set("batch", a.batch)
        .set("epochs", a.epochs)
        .set("step_mode", a.step)
        .set("step", step)
        .set("seed", a.seed)
        .set("seeds", a.seeds)
        .set("x0", "zero");
    if a.step == StepMode::Theoretical {
        header.push("proxy", format!("{:?}", a.theory.proxy).to_lowercase());
        header.push("proxy_perms", a.theory.proxy_perms);
    }
    with_output(a.out.as_deref(), stdout, |w| {
        write_csv(w, &header, &["seed", "epoch", "step", "f_x", "f_avg", "lemma2_residual"], &rows)
    })?;

    let finals: Vec<(u64, Option<(f64, f64)>)> = runs
        .iter()
        .map(|r| (r.seed, r.epochs.last().map(|e| (e.2, e.3))))
        .collect();
    if let Some(path) = &a.summary {
        let rows: Vec<Vec<String>> = runs
            .iter()
            .zip(&finals)
            .map(|(r, (seed, fin))| {
                vec![
                    seed.to_string(),
                    fmt_opt(fin.map(|f| f.0)),
                    fmt_opt(fin.map(|f| f.1)),
                    fmt_opt(fin.and_then(|f| f_star.map(|s| f.1 - s))),
                    match r.diverged_at {
                        Some(e) => format!("diverged at epoch {e}"),
                        None => "ok".to_string(),
                    },
                ]
            })
            .collect();
        with_output(Some(path), stdout, |w| {
            write_csv(w, &header, &["seed", "final_f_x", "final_f_avg", "final_gap", "status"], &rows)
        })?;
    }

    let diverged = runs.iter().filter(|r| r.diverged_at.is_some()).count();
    writeln!(stderr, "step = {step:e}, {} seeds, {diverged} diverged", runs.len())?;
    let gaps: Vec<f64> = finals.iter().filter_map(|(_, f)| f.and_then(|f| f_star.map(|s| f.1 - s))).collect();
    if let Some(s) = Summary::of(&gaps) {
        writeln!(stderr, "mean final gap f(x_hat_K) - f* = {:e} (standard error {:e})", s.mean, s.standard_error())?;
        if let (Some(th), StepMode::Theoretical) = (&theory, a.step) {
            let rhs = th.rhs()?;
            let holds = s.mean <= rhs.value && rhs.precondition_ok;
            writeln!(
                stderr,
                "{} bound {:e}: {}",
                theorem_label(th.theorem),
                rhs.value,
                if holds { "holds" } else { "violated" }
            )?;
        }
    }
    if diverged == runs.len() {
        writeln!(stderr, "every seed diverged")?;
        return Ok(Status::VerdictFailure);
    }
    Ok(Status::Success)
}

fn problem_label(p: &crate::args::ProblemArgs) -> String {
    match (&p.synthetic, &p.input) {
        (Some(s), _) => format!("{s} (data_seed {})", p.data_seed),
        (None, Some(path)) => path.display().to_string(),
        (None, None) => String::new(),
    }
}

#[derive(Serialize)]
struct Verdict {
    verdict: &'static str,
    reason: Option<String>,
    theorem: &'static str,
    n: usize,
    d: usize,
    batch: usize,
    epochs: usize,
    seeds: u64,
    step: Option<f64>,
    inputs: Option<Bounds>,
    f_star: Option<f64>,
    mean_gap: Option<f64>,
    std_error: Option<f64>,
    max_gap: Option<f64>,
    bound: Option<f64>,
    precondition_ok: Option<bool>,
    /// `bound − mean_gap`
    margin: Option<f64>,
}

pub fn verify_bound(a: &VerifyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<Status, CliError> {
    let p = problem::from_args(&a.problem)?;
    let (n, d) = (p.ds.n(), p.ds.d());
    if a.seeds == 0 || a.epochs == 0 {
        return Err(CliError::Usage("--seeds and --epochs must be positive".into()));
    }
    if a.theorem == Theorem::Nonsmooth && p.x_star.is_none() {
        return Err(CliError::Usage(
            "the nonsmooth check needs a problem with a known minimizer, e.g. --synthetic hinge:N,D".into(),
        ));
    }
    let header = Header::new("verify-bound")
        .set("problem", problem_label(&a.problem))
        .set("loss", p.model.family())
        .set("theorem", theorem_label(a.theorem))
        .set("batch", a.batch)
        .set("epochs", a.epochs)
        .set("seeds", a.seeds)
        .set("seed", a.seed)
        .set("proxy", format!("{:?}", a.theory.proxy).to_lowercase())
        .set("proxy_perms", a.theory.proxy_perms)
        .set("opt_tol", a.theory.opt_tol);
    let mut verdict = Verdict {
        verdict: "inconclusive",
        reason: None,
        theorem: theorem_label(a.theorem),
        n,
        d,
        batch: a.batch,
        epochs: a.epochs,
        seeds: a.seeds,
        step: None,
        inputs: None,
        f_star: None,
        mean_gap: None,
        std_error: None,
        max_gap: None,
        bound: None,
        precondition_ok: None,
        margin: None,
    };

    let x0 = vec![0.0; d];
    match find_optimum(&p, &a.theory)? {
        Optimum::Missing(why) => verdict.reason = Some(why),
        Optimum::Found { x, grad_tol } => {
            let th = theory_for(&p, a.theorem, a.batch, a.epochs, &a.theory, a.seed, &x, grad_tol, &x0)?;
            let rhs = th.rhs()?;
            // IG is deterministic: one run covers every seed
            let seeds = if th.scheme() == Scheme::Ig { 1 } else { a.seeds };
            let gaps = (0..seeds)
                .into_par_iter()
                .map(|s| {
                    let plan = ShufflePlan::new(th.scheme(), n, a.epochs, a.seed + s);
                    let cfg = RunConfig::new(a.batch, a.epochs, th.step, x0.clone()).evaluate_objective(false);
                    let out = run(&p.ds, &p.model, &plan, &cfg)?;
                    Ok(objective(&p.ds, &p.model, &out.averaged) - th.f_star)
                })
                .collect::<Result<Vec<f64>, Error>>()?;
            let s = Summary::of(&gaps).expect("nonempty");
            let holds = s.mean <= rhs.value && rhs.precondition_ok;
            verdict.verdict = if holds { "pass" } else { "fail" };
            verdict.seeds = seeds;
            verdict.step = Some(th.step);
            verdict.f_star = Some(th.f_star);
            verdict.mean_gap = Some(s.mean);
            verdict.std_error = Some(if seeds > 1 { s.standard_error() } else { 0.0 });
            verdict.max_gap = Some(s.max);
            verdict.bound = Some(rhs.value);
            verdict.precondition_ok = Some(rhs.precondition_ok);
            verdict.margin = Some(rhs.value - s.mean);
            verdict.inputs = Some(th.inputs);
        }
    }

    let mut json = header.json();
    json["schema_version"] = serde_json::json!(1);
    json["result"] = serde_json::to_value(&verdict)?;
    with_output(a.out.as_deref(), stdout, |w| write_json(w, &json))?;
    match (&verdict.mean_gap, &verdict.bound, &verdict.margin) {
        (Some(g), Some(b), Some(m)) => writeln!(
            stderr,
            "verdict: {} (mean gap {g:e} vs bound {b:e}, margin {m:e})",
            verdict.verdict
        )?,
        _ => writeln!(
            stderr,
            "verdict: inconclusive ({})",
            verdict.reason.as_deref().unwrap_or("no minimizer")
        )?,
    }
    Ok(if verdict.verdict == "pass" {
        Status::Success
    } else {
        Status::VerdictFailure
    })
}
