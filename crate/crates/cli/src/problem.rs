use std::fmt;
use std::path::Path;
use std::str::FromStr;

use shuffled_sgd::rng::{self, Rng64};
use shuffled_sgd::{load_libsvm, Dataset, Error, Loss, LossFamily};

use crate::args::ProblemArgs;
use crate::CliError;

/// Synthetic test problems with Gaussian rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Synthetic {
    /// `t = A x_true + noise·N(0, 1)`, squared loss.
    LeastSquares { n: usize, d: usize, noise: f64 },
    /// `t = A x*` exactly, squared loss; `σ* = 0`.
    Interpolation { n: usize, d: usize },
    /// Linearly separable labels with margin, hinge loss; `f(x*) = 0`.
    Hinge { n: usize, d: usize },
}

impl FromStr for Synthetic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("expected KIND:N,D, got {s:?}"))?;
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        let dim = |i: usize| -> Result<usize, String> {
            let v: usize = parts
                .get(i)
                .ok_or_else(|| format!("missing dimension in {s:?}"))?
                .parse()
                .map_err(|e| format!("{s:?}: {e}"))?;
            if v == 0 {
                return Err(format!("dimensions must be positive in {s:?}"));
            }
            Ok(v)
        };
        let (n, d) = (dim(0)?, dim(1)?);
        let arity = |max: usize| {
            if parts.len() > max {
                Err(format!("too many fields in {s:?}"))
            } else {
                Ok(())
            }
        };
        match kind {
            "ls" => {
                arity(3)?;
                let noise = match parts.get(2) {
                    Some(v) => v.parse().map_err(|e| format!("{s:?}: {e}"))?,
                    None => 0.5,
                };
                Ok(Synthetic::LeastSquares { n, d, noise })
            }
            "interp" => arity(2).map(|_| Synthetic::Interpolation { n, d }),
            "hinge" => arity(2).map(|_| Synthetic::Hinge { n, d }),
            other => Err(format!("unknown synthetic problem {other:?} (expected ls, interp or hinge)")),
        }
    }
}

impl fmt::Display for Synthetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Synthetic::LeastSquares { n, d, noise } => write!(f, "ls:{n},{d},{noise}"),
            Synthetic::Interpolation { n, d } => write!(f, "interp:{n},{d}"),
            Synthetic::Hinge { n, d } => write!(f, "hinge:{n},{d}"),
        }
    }
}

pub struct Problem {
    pub ds: Dataset,
    pub model: Loss,
    /// Known minimizer, when the construction provides one.
    pub x_star: Option<Vec<f64>>,
}

fn normal(r: &mut Rng64) -> f64 {
    rng::box_muller(r).0
}

fn gaussian_rows(r: &mut Rng64, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| normal(r)).collect()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

impl Synthetic {
    pub fn build(self, seed: u64) -> Result<Problem, CliError> {
        let mut r = rng::stream(seed, 0x5e_ed);
        let (rows, labels, family, x_star) = match self {
            Synthetic::LeastSquares { n, d, noise } => {
                let rows = gaussian_rows(&mut r, n, d);
                let xt: Vec<f64> = (0..d).map(|_| normal(&mut r)).collect();
                let t = rows.iter().map(|a| dot(a, &xt) + noise * normal(&mut r)).collect();
                (rows, t, LossFamily::Squared, None)
            }
            Synthetic::Interpolation { n, d } => {
                let rows = gaussian_rows(&mut r, n, d);
                let xs: Vec<f64> = (0..d).map(|_| normal(&mut r)).collect();
                (rows, vec![0.0; n], LossFamily::Squared, Some(xs))
            }
            Synthetic::Hinge { n, d } => {
                let mut dir: Vec<f64> = (0..d).map(|_| normal(&mut r)).collect();
                let norm = dot(&dir, &dir).sqrt();
                dir.iter_mut().for_each(|v| *v /= norm);
                // keep rows with |aᵀdir| ≥ 1/2; then x* = 2·dir has every margin ≥ 1
                let mut rows = Vec::with_capacity(n);
                while rows.len() < n {
                    let a: Vec<f64> = (0..d).map(|_| normal(&mut r)).collect();
                    if dot(&a, &dir).abs() >= 0.5 {
                        rows.push(a);
                    }
                }
                let xs: Vec<f64> = dir.iter().map(|v| 2.0 * v).collect();
                let t = rows.iter().map(|a| if dot(a, &xs) > 0.0 { 1.0 } else { -1.0 }).collect();
                (rows, t, LossFamily::Hinge, Some(xs))
            }
        };
        let mut ds = Dataset::from_dense(&rows, labels)?;
        if let (Synthetic::Interpolation { .. }, Some(xs)) = (self, &x_star) {
            // targets from the stored rows so residuals at x* are exactly zero
            let t: Vec<f64> = ds.rows().map(|row| row.dot(xs)).collect();
            ds = Dataset::from_dense(&rows, t)?;
        }
        let model = Loss::for_dataset(family, &ds);
        Ok(Problem { ds, model, x_star })
    }
}

/// Loads a LIBSVM file, attaching the path to parse and I/O errors.
pub fn load(path: &Path, features: Option<usize>) -> Result<Dataset, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("{}: no such file", path.display())));
    }
    load_libsvm(path, features).map_err(|e| match e {
        Error::Parse { line, msg } => CliError::Usage(format!("{}:{line}: {msg}", path.display())),
        other => CliError::Usage(format!("{}: {other}", path.display())),
    })
}

pub fn from_args(args: &ProblemArgs) -> Result<Problem, CliError> {
    match (&args.input, args.synthetic) {
        (_, Some(s)) => s.build(args.data_seed),
        (Some(path), None) => {
            let ds = load(path, args.features)?;
            let model = Loss::for_dataset(args.loss, &ds);
            Ok(Problem { ds, model, x_star: None })
        }
        (None, None) => Err(CliError::Usage("either an input file or --synthetic is required".into())),
    }
}
