use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use shuffled_sgd::constants::{
    classical_l, reference_minimizer, sampled_permutation, sigma_star, tilde_constant, ystar_weighted_norm,
};
use shuffled_sgd::rng;
use shuffled_sgd::stats::{loglog_slope, Summary};
use shuffled_sgd::{gen_gaussian, Dataset, Loss, MinimizerConfig, PowerIteration, RatioConfig, Regularity};

use crate::args::{AnalyzeArgs, Axis, BatchSweepArgs, GaussianSweepArgs, HistogramArgs, PowerArgs};
use crate::output::{check_budget, spectral_cost, with_output, write_csv, write_json, Header};
use crate::problem::load;
use crate::{CliError, Status};

fn power(p: &PowerArgs) -> PowerIteration {
    PowerIteration::default().with_tol(p.tol).with_max_iter(p.max_iter)
}

fn ratio_config(batch: usize, num_perms: usize, seed: u64, p: &PowerArgs, with_tilde: bool, bins: usize) -> RatioConfig {
    RatioConfig {
        batch,
        num_perms,
        seed,
        power: power(p),
        with_tilde,
        bins,
    }
}

fn check_batch(n: usize, b: usize) -> Result<(), CliError> {
    if b == 0 || !n.is_multiple_of(b) {
        return Err(CliError::Usage(format!(
            "batch size {b} does not divide n = {n}; valid batch sizes: {}",
            divisors(n).iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(())
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|b| n.is_multiple_of(*b)).collect()
}

fn mean_std_rows(prefix: &[String], s: &Summary) -> [Vec<String>; 2] {
    let row = |tag: &str, v: f64| {
        let mut r = prefix.to_vec();
        r.push(tag.to_string());
        r.push(v.to_string());
        r
    };
    [row("mean", s.mean), row("std", s.std)]
}

pub fn analyze(a: &AnalyzeArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<Status, CliError> {
    let start = Instant::now();
    let ds = load(&a.input, a.features)?;
    check_batch(ds.n(), a.batch)?;
    let evaluations = a.num_perms * if a.no_tilde { 1 } else { 2 };
    check_budget(spectral_cost(ds.nnz(), ds.n(), evaluations), a.budget.force, a.budget.max_cost)?;

    let model = a.loss.map(|f| Loss::for_dataset(f, &ds));
    let reg = match &model {
        Some(m) => m.regularity(),
        None => Regularity::identity(ds.n()),
    };
    let cfg = ratio_config(a.batch, a.num_perms, a.seed, &a.power, !a.no_tilde, a.bins.max(1));
    let mut report = shuffled_sgd::constants::ratio_stats(&ds, &reg, &cfg)?;

    if let (true, Some(model)) = (a.with_optimum, &model) {
        let mcfg = MinimizerConfig::default();
        let opt = reference_minimizer(&ds, model, None, &mcfg)?;
        if opt.converged {
            report.sigma_star = Some(sigma_star(&ds, model, &opt.x, mcfg.tol)?);
            report.ystar_norm = Some(ystar_weighted_norm(&ds, model, &opt.x, mcfg.tol)?);
        } else {
            writeln!(
                stderr,
                "warning: reference minimizer stopped at gradient norm {:e}; sigma* omitted",
                opt.grad_norm
            )?;
        }
    }

    let header = Header::new("analyze")
        .set("input", a.input.display())
        .set("n", ds.n())
        .set("d", ds.d())
        .set("batch", a.batch)
        .set("num_perms", a.num_perms)
        .set("seed", a.seed)
        .set("tol", a.power.tol)
        .set("max_iter", a.power.max_iter)
        .set("weights", a.loss.map_or("identity".to_string(), |f| f.to_string()));

    let mut json = header.json();
    json["report"] = serde_json::to_value(&report)?;
    if a.json.is_some() || a.csv.is_none() {
        with_output(a.json.as_deref(), stdout, |w| write_json(w, &json))?;
    }
    if let Some(path) = &a.csv {
        with_output(Some(path), stdout, |w| Ok(report.write_csv(w, &header.comments())?))?;
    }

    let s = &report.ratios.summary;
    writeln!(stderr, "n = {}, d = {}, nnz = {}", report.n, report.d, report.nnz)?;
    writeln!(stderr, "L = {}", report.l)?;
    writeln!(stderr, "mean L/hatL = {:.4} (std {:.4}, {} permutations)", s.mean, s.std, s.count)?;
    if let Some(t) = &report.tilde_ratios {
        writeln!(stderr, "mean L/tildeL = {:.4} (std {:.4})", t.summary.mean, t.summary.std)?;
    }
    if report.non_converged > 0 {
        writeln!(stderr, "warning: {} power iterations hit max_iter", report.non_converged)?;
    }
    writeln!(stderr, "runtime {:.2}s", start.elapsed().as_secs_f64())?;
    Ok(Status::Success)
}

pub fn gaussian_sweep(a: &GaussianSweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<Status, CliError> {
    if a.grid.is_empty() || a.grid.contains(&0) || a.fixed_value == 0 {
        return Err(CliError::Usage("grid values and --fixed-value must be positive".into()));
    }
    if a.perms == 0 {
        return Err(CliError::Usage("--perms must be positive".into()));
    }
    let points: Vec<(usize, usize)> = a
        .grid
        .iter()
        .map(|&g| match a.fix {
            Axis::N => (a.fixed_value, g),
            Axis::D => (g, a.fixed_value),
        })
        .collect();
    let cost: f64 = points.iter().map(|&(n, d)| spectral_cost(n * d, n, a.perms)).sum();
    check_budget(cost, a.budget.force, a.budget.max_cost)?;

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &(n, d) in &points {
        // data depend on (seed, n, d) only, not on the rest of the grid
        let data_seed = rng::mix(rng::mix(a.seed, n as u64), d as u64);
        let ds: Dataset = gen_gaussian(n, d, data_seed)?;
        let cfg = ratio_config(1, a.perms, a.seed, &a.power, false, 1);
        let report = shuffled_sgd::constants::ratio_stats(&ds, &Regularity::identity(n), &cfg)?;
        for (i, r) in report.ratios.values.iter().enumerate() {
            rows.push(vec![n.to_string(), d.to_string(), i.to_string(), r.to_string()]);
        }
        summaries.push(((n, d), report.ratios.summary));
    }
    for ((n, d), s) in &summaries {
        rows.extend(mean_std_rows(&[n.to_string(), d.to_string()], s));
    }

    let header = Header::new("gaussian-sweep")
        .set("fix", if a.fix == Axis::N { "n" } else { "d" })
        .set("fixed_value", a.fixed_value)
        .set("grid", join(&a.grid))
        .set("perms", a.perms)
        .set("seed", a.seed)
        .set("tol", a.power.tol)
        .set("max_iter", a.power.max_iter);
    with_output(a.out.as_deref(), stdout, |w| write_csv(w, &header, &["n", "d", "perm_index", "ratio"], &rows))?;
    for ((n, d), s) in &summaries {
        writeln!(stderr, "n = {n}, d = {d}: mean L/hatL = {:.4} (std {:.4})", s.mean, s.std)?;
    }
    Ok(Status::Success)
}

fn join(values: &[usize]) -> String {
    values.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn batch_sweep(a: &BatchSweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<Status, CliError> {
    let (ds, source): (Dataset, String) = match (&a.input, a.gaussian) {
        (_, Some((n, d))) => (gen_gaussian(n, d, a.seed)?, format!("gaussian:{n},{d}")),
        (Some(path), None) => (load(path, a.features)?, path.display().to_string()),
        (None, None) => return Err(CliError::Usage("either an input file or --gaussian is required".into())),
    };
    let n = ds.n();
    let batches: Vec<usize> = if a.batches.is_empty() {
        (0..usize::BITS).map(|p| 1usize << p).take_while(|&b| b <= n).filter(|b| n % b == 0).collect()
    } else {
        a.batches.clone()
    };
    let bad: Vec<usize> = batches.iter().copied().filter(|&b| b == 0 || n % b != 0).collect();
    if !bad.is_empty() {
        return Err(CliError::Usage(format!(
            "batch sizes {} do not divide n = {n}; valid batch sizes: {}",
            join(&bad),
            join(&divisors(n))
        )));
    }
    if a.perms == 0 {
        return Err(CliError::Usage("--perms must be positive".into()));
    }
    check_budget(
        spectral_cost(ds.nnz(), n, a.perms * batches.len()),
        a.budget.force,
        a.budget.max_cost,
    )?;

    let reg = Regularity::identity(n);
    let l = classical_l(&ds, &reg)?;
    let pw = power(&a.power);
    let jobs: Vec<(usize, usize)> = batches.iter().flat_map(|&b| (0..a.perms).map(move |p| (b, p))).collect();
    let ratios = jobs
        .par_iter()
        .map(|&(b, p)| Ok(l / tilde_constant(&ds, &reg, &sampled_permutation(n, a.seed, p), b, &pw)?))
        .collect::<Result<Vec<f64>, CliError>>()?;

    let mut rows: Vec<Vec<String>> = jobs
        .iter()
        .zip(&ratios)
        .map(|(&(b, p), r)| vec![b.to_string(), p.to_string(), r.to_string()])
        .collect();
    let summaries: Vec<(usize, Summary)> = batches
        .iter()
        .zip(ratios.chunks(a.perms))
        .map(|(&b, chunk)| (b, Summary::of(chunk).expect("nonempty")))
        .collect();
    for (b, s) in &summaries {
        rows.extend(mean_std_rows(&[b.to_string()], s));
    }
    let lo = a.fit_min.unwrap_or(1);
    let hi = a.fit_max.unwrap_or(n);
    let (xs, ys): (Vec<f64>, Vec<f64>) = summaries
        .iter()
        .filter(|(b, _)| (lo..=hi).contains(b))
        .map(|(b, s)| (*b as f64, s.mean))
        .unzip();
    let alpha = loglog_slope(&xs, &ys);

    let header = Header::new("batch-sweep")
        .set("data", &source)
        .set("n", n)
        .set("d", ds.d())
        .set("batches", join(&batches))
        .set("perms", a.perms)
        .set("seed", a.seed)
        .set("tol", a.power.tol)
        .set("max_iter", a.power.max_iter)
        .set("fit_range", format!("{lo}..={hi}"))
        .set("alpha", alpha.map_or("undefined".to_string(), |v| v.to_string()));
    with_output(a.out.as_deref(), stdout, |w| write_csv(w, &header, &["b", "perm_index", "ratio"], &rows))?;
    for (b, s) in &summaries {
        writeln!(stderr, "b = {b}: mean L/tildeL = {:.4} (std {:.4})", s.mean, s.std)?;
    }
    match alpha {
        Some(v) => writeln!(stderr, "log-log slope alpha = {v:.4} over {lo} <= b <= {hi}")?,
        None => writeln!(stderr, "log-log slope undefined (fewer than two batch sizes in range)")?,
    }
    Ok(Status::Success)
}

pub fn histogram(a: &HistogramArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<Status, CliError> {
    if a.bins == 0 {
        return Err(CliError::Usage("--bins must be at least 1".into()));
    }
    let ds = load(&a.input, a.features)?;
    check_batch(ds.n(), a.batch)?;
    check_budget(spectral_cost(ds.nnz(), ds.n(), a.num_perms), a.budget.force, a.budget.max_cost)?;
    let cfg = ratio_config(a.batch, a.num_perms, a.seed, &a.power, false, a.bins);
    let report = shuffled_sgd::constants::ratio_stats(&ds, &Regularity::identity(ds.n()), &cfg)?;
    let h = &report.ratio_histogram;
    let rows: Vec<Vec<String>> = (0..h.counts.len())
        .map(|i| {
            vec![
                h.edges[i].to_string(),
                h.edges[i + 1].to_string(),
                h.counts[i].to_string(),
                h.density[i].to_string(),
            ]
        })
        .collect();
    let s = &report.ratios.summary;
    let header = Header::new("histogram")
        .set("input", a.input.display())
        .set("batch", a.batch)
        .set("num_perms", a.num_perms)
        .set("bins", a.bins)
        .set("seed", a.seed)
        .set("tol", a.power.tol)
        .set("max_iter", a.power.max_iter)
        .set("mean", s.mean)
        .set("coefficient_of_variation", s.coefficient_of_variation());
    with_output(a.out.as_deref(), stdout, |w| {
        write_csv(w, &header, &["bin_lo", "bin_hi", "count", "density"], &rows)
    })?;
    writeln!(
        stderr,
        "mean L/hatL = {:.4}, std {:.4}, coefficient of variation {:.4}",
        s.mean,
        s.std,
        s.coefficient_of_variation()
    )?;
    Ok(Status::Success)
}
