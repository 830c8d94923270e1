//! Weight-family sweeps, log-log exponent regression against the A2
//! characteristic, and CSV emission.
//!
//! Rows are deterministic functions of (family, parameter, depth, dim, seed):
//! the per-row seed is the sweep seed plus the row index, all randomness is
//! seeded, and the CSV is byte-identical across runs. Wall-clock timing is
//! off by default for exactly that reason; `timing` opts in and fills
//! `runtime_ms` with measured values.
// Negated float guards are deliberate: NaN parameters must be rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]


use crate::bounds::{self, Method, OperatorKind};
use crate::dyadic::VectorField;
use crate::error::{Error, Result};
use crate::operators::MultiplierSymbol;
use crate::weights::{self, AveragesTree, WeightFamily};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One parameterized family sweep.
#[derive(Debug, Clone)]
pub struct FamilySpec {
    pub family: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub geometric: bool,
    pub depth: u32,
    pub dim: usize,
    pub seed: u64,
}

impl FamilySpec {
    /// The parameter grid, linear or geometric.
    pub fn grid(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::InvalidParameter(
                "parameter grid needs at least one point".to_string(),
            ));
        }
        if self.count == 1 {
            return Ok(vec![self.start]);
        }
        if self.geometric && (self.start <= 0.0 || self.stop <= 0.0) {
            return Err(Error::InvalidParameter(
                "geometric grids need positive endpoints".to_string(),
            ));
        }
        let n = self.count as f64 - 1.0;
        Ok((0..self.count)
            .map(|i| {
                let t = i as f64 / n;
                if self.geometric {
                    self.start * (self.stop / self.start).powf(t)
                } else {
                    self.start + (self.stop - self.start) * t
                }
            })
            .collect())
    }
}

/// Which quantities a sweep computes per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    A2,
    Square,
    Shift,
    Multiplier,
    Embedding,
    Testing,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::A2,
        Measure::Square,
        Measure::Shift,
        Measure::Multiplier,
        Measure::Embedding,
        Measure::Testing,
    ];

    pub fn parse_list(s: &str) -> Result<Vec<Measure>> {
        if s == "all" {
            return Ok(Measure::ALL.to_vec());
        }
        s.split(',')
            .map(|tok| match tok.trim() {
                "a2" => Ok(Measure::A2),
                "square" => Ok(Measure::Square),
                "shift" => Ok(Measure::Shift),
                "multiplier" => Ok(Measure::Multiplier),
                "embedding" => Ok(Measure::Embedding),
                "testing" => Ok(Measure::Testing),
                other => Err(Error::InvalidParameter(format!(
                    "unknown measurement '{other}'"
                ))),
            })
            .collect()
    }
}

/// One sweep row; measurements that were not requested stay `None` and emit
/// as empty CSV cells.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub family: String,
    pub param: f64,
    pub depth: u32,
    pub dim: usize,
    pub a2: f64,
    pub c_up: Option<f64>,
    pub c_low: Option<f64>,
    pub shift_norm: Option<f64>,
    pub tsigma_norm: Option<f64>,
    pub tv_ratio: Option<f64>,
    pub testing_ratio: Option<f64>,
    pub runtime_ms: u64,
}

/// A parameter whose row could not be produced.
#[derive(Debug, Clone)]
pub struct SweepFailure {
    pub param: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

pub const CSV_HEADER: &str =
    "family,param,depth,dim,a2,c_up,c_low,shift_norm,tsigma_norm,tv_ratio,testing_ratio,runtime_ms";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Renders rows under the fixed header; deterministic for deterministic rows.
pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:?},{},{},{:?},{},{},{},{},{},{},{}\n",
            r.family,
            r.param,
            r.depth,
            r.dim,
            r.a2,
            fmt_opt(r.c_up),
            fmt_opt(r.c_low),
            fmt_opt(r.shift_norm),
            fmt_opt(r.tsigma_norm),
            fmt_opt(r.tv_ratio),
            fmt_opt(r.testing_ratio),
            r.runtime_ms,
        ));
    }
    out
}

fn row_for_param(
    spec: &FamilySpec,
    param: f64,
    row_seed: u64,
    measures: &[Measure],
) -> Result<SweepRow> {
    let family = WeightFamily::parse(&spec.family, param)?;
    let w = weights::generate(&family, spec.dim, spec.depth, row_seed)?;
    let tree = AveragesTree::build(&w)?;
    let a2 = weights::a2_characteristic(&tree)?;
    let mut row = SweepRow {
        family: spec.family.clone(),
        param,
        depth: spec.depth,
        dim: spec.dim,
        a2,
        c_up: None,
        c_low: None,
        shift_norm: None,
        tsigma_norm: None,
        tv_ratio: None,
        testing_ratio: None,
        runtime_ms: 0,
    };
    for m in measures {
        match m {
            Measure::A2 => {}
            Measure::Square => {
                let (c_up, c_low) = bounds::square_constants(&tree, false, Method::Auto)?;
                row.c_up = Some(c_up);
                row.c_low = Some(c_low);
            }
            Measure::Shift => {
                let norm = bounds::weighted_op_norm(&tree, OperatorKind::Shift, Method::Auto)?;
                row.shift_norm = Some(norm.value());
            }
            Measure::Multiplier => {
                let sigma = MultiplierSymbol::random_signs(spec.dim, spec.depth, row_seed);
                let norm = bounds::weighted_op_norm(
                    &tree,
                    OperatorKind::Multiplier(&sigma),
                    Method::Auto,
                )?;
                row.tsigma_norm = Some(norm.value());
            }
            Measure::Embedding => {
                let f = seeded_field(spec.dim, spec.depth, row_seed ^ 0x00F1_E1D0);
                let (_, ratio) = bounds::tv_embedding_ratio(&tree, &f)?;
                row.tv_ratio = Some(ratio);
            }
            Measure::Testing => {
                row.testing_ratio = Some(bounds::testing_ratio(&tree)?);
            }
        }
    }
    Ok(row)
}

fn seeded_field(dim: usize, depth: u32, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..(1usize << depth) * dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    VectorField::new(dim, depth, values).expect("generated values are finite")
}

/// Runs the sweep; one row per grid point, rows ordered by parameter.
/// Failed rows are collected, never dropped silently.
pub fn run_sweep(spec: &FamilySpec, measures: &[Measure], timing: bool) -> Result<SweepOutcome> {
    let grid = spec.grid()?;
    let mut outcome = SweepOutcome::default();
    for (i, &param) in grid.iter().enumerate() {
        let row_seed = spec.seed.wrapping_add(i as u64);
        let started = std::time::Instant::now();
        match row_for_param(spec, param, row_seed, measures) {
            Ok(mut row) => {
                if timing {
                    row.runtime_ms = started.elapsed().as_millis() as u64;
                }
                outcome.rows.push(row);
            }
            Err(e) => outcome.failures.push(SweepFailure {
                param,
                message: e.to_string(),
            }),
        }
    }
    Ok(outcome)
}

/// Least-squares power-law fit in log-log space.
#[derive(Debug, Clone, Copy)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Result<ExponentFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateRegression(format!(
            "need at least 2 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateRegression(
            "log-log regression needs positive finite values".to_string(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 1e-24 * n {
        return Err(Error::DegenerateRegression(
            "all parameters coincide in log space".to_string(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r_squared = if syy <= 1e-24 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(ExponentFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Raw power-law fit plus the fits of the residuals y / (x^{s0} max(1, log x))
/// for the candidate exponents s0 in {1, 3/2, 2}. A residual slope near zero
/// means the data matches the shape x^{s0} log x.
#[derive(Debug, Clone)]
pub struct RegressionReport {
    pub raw: ExponentFit,
    pub residuals: Vec<(f64, ExponentFit)>,
    pub points: usize,
    pub excluded: usize,
}

pub fn regression_report(xs: &[f64], ys: &[f64], excluded: usize) -> Result<RegressionReport> {
    let raw = fit_exponent(xs, ys)?;
    let mut residuals = Vec::new();
    for s0 in [1.0, 1.5, 2.0] {
        let resid: Vec<f64> = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| y / (x.powf(s0) * x.ln().max(1.0)))
            .collect();
        residuals.push((s0, fit_exponent(xs, &resid)?));
    }
    Ok(RegressionReport {
        raw,
        residuals,
        points: xs.len(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        let mut spec = FamilySpec {
            family: "two_value".to_string(),
            start: 1.0,
            stop: 16.0,
            count: 5,
            geometric: true,
            depth: 3,
            dim: 1,
            seed: 0,
        };
        let g = spec.grid().unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1.0).abs() <= 1e-15);
        assert!((g[4] - 16.0).abs() <= 1e-12);
        assert!((g[2] - 4.0).abs() <= 1e-12);

        spec.geometric = false;
        let g = spec.grid().unwrap();
        assert!((g[2] - 8.5).abs() <= 1e-12);
    }

    #[test]
    fn fit_recovers_exact_power() {
        let xs = [1.5, 2.0, 3.0, 5.0, 10.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let fit = fit_exponent(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() <= 1e-12);
        assert!((fit.r_squared - 1.0).abs() <= 1e-12);

        let ys: Vec<f64> = xs.iter().map(|x| 7.25 * x).collect();
        let fit = fit_exponent(&xs, &ys).unwrap();
        assert!((fit.slope - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn fit_scale_invariant_slope() {
        let xs = [2.0, 3.0, 4.5, 8.0];
        let ys = [1.1, 2.3, 4.0, 9.5];
        let a = fit_exponent(&xs, &ys).unwrap();
        let scaled: Vec<f64> = ys.iter().map(|y| 123.456 * y).collect();
        let b = fit_exponent(&xs, &scaled).unwrap();
        assert!((a.slope - b.slope).abs() <= 1e-12);
    }

    #[test]
    fn fit_rejects_degenerate() {
        assert!(matches!(
            fit_exponent(&[2.0], &[4.0]),
            Err(Error::DegenerateRegression(_))
        ));
        assert!(matches!(
            fit_exponent(&[2.0, 2.0], &[4.0, 5.0]),
            Err(Error::DegenerateRegression(_))
        ));
        assert!(matches!(
            fit_exponent(&[2.0, -1.0], &[4.0, 5.0]),
            Err(Error::DegenerateRegression(_))
        ));
    }

    #[test]
    fn constant_family_rows() {
        let spec = FamilySpec {
            family: "constant".to_string(),
            start: 2.0,
            stop: 8.0,
            count: 3,
            geometric: false,
            depth: 3,
            dim: 1,
            seed: 1,
        };
        let out = run_sweep(&spec, &[Measure::A2, Measure::Square], false).unwrap();
        assert_eq!(out.rows.len(), 3);
        assert!(out.failures.is_empty());
        for row in &out.rows {
            assert!((row.a2 - 1.0).abs() <= 1e-10);
            assert!((row.c_up.unwrap() - 1.0).abs() <= 1e-9);
            assert!((row.c_low.unwrap() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn two_value_a2_monotone() {
        let spec = FamilySpec {
            family: "two_value".to_string(),
            start: 1.1,
            stop: 16.0,
            count: 8,
            geometric: true,
            depth: 6,
            dim: 1,
            seed: 3,
        };
        let out = run_sweep(&spec, &[Measure::A2], false).unwrap();
        assert_eq!(out.rows.len(), 8);
        for pair in out.rows.windows(2) {
            assert!(pair[1].a2 >= pair[0].a2 - 1e-12);
        }
    }

    #[test]
    fn single_point_regression_refused() {
        let spec = FamilySpec {
            family: "two_value".to_string(),
            start: 1.0,
            stop: 1.0,
            count: 1,
            geometric: false,
            depth: 3,
            dim: 1,
            seed: 0,
        };
        let out = run_sweep(&spec, &[Measure::A2], false).unwrap();
        assert_eq!(out.rows.len(), 1);
        let xs: Vec<f64> = out.rows.iter().map(|r| r.a2).collect();
        assert!(fit_exponent(&xs, &xs).is_err());
    }

    #[test]
    fn csv_deterministic() {
        let spec = FamilySpec {
            family: "random_martingale".to_string(),
            start: 0.2,
            stop: 0.6,
            count: 3,
            geometric: false,
            depth: 3,
            dim: 2,
            seed: 11,
        };
        let a = to_csv(&run_sweep(&spec, &Measure::ALL, false).unwrap().rows);
        let b = to_csv(&run_sweep(&spec, &Measure::ALL, false).unwrap().rows);
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
    }
}
