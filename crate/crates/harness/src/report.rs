//! Per-point tables, summary metrics and the files written for a cell.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pinnuq::problems::Problem;
use pinnuq::vi::PredictiveBand;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{Artifacts, Seeds};

/// Half-width of the reported band in standard deviations.
pub const BAND_SIGMAS: f64 = 3.0;

pub const TABLE_HEADER: &str = "x,u_true,u_det,mean,sd_total,sigma_P,bound,covered_3sigma";

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub x: f64,
    /// Time coordinate on space-time grids.
    pub t: Option<f64>,
    /// NaN where no exact solution exists.
    pub u_true: f64,
    pub u_det: f64,
    pub mean: f64,
    pub sd_total: f64,
    /// σ_P folded into the band (zero for methods that ignore it).
    pub sigma_p: f64,
    /// Error bound of the deterministic model.
    pub bound: f64,
    pub covered: Option<bool>,
}

/// Fraction of points with `|truth - mean| <= k sd_total` and the mean band
/// width `2k sd_total`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// `None` when no point has a defined truth.
    pub fraction: Option<f64>,
    pub mean_width: f64,
    /// Points with a defined truth.
    pub counted: usize,
}

/// Coverage of `band` against `truth`; NaN truths are skipped, the width
/// averages over every point.
pub fn coverage_metrics(band: &PredictiveBand<f64>, truth: &[f64], k: f64) -> Result<Coverage> {
    if truth.len() != band.len() {
        return Err(HarnessError::Stage {
            stage: "coverage",
            source: pinnuq::Error::Shape { expected: band.len(), got: truth.len() },
        });
    }
    let sd = band.sd_total();
    let (mut hit, mut counted) = (0usize, 0usize);
    for ((&u, &m), &s) in truth.iter().zip(&band.mean).zip(&sd) {
        if u.is_nan() {
            continue;
        }
        counted += 1;
        if (u - m).abs() <= k * s {
            hit += 1;
        }
    }
    let mean_width = if sd.is_empty() { 0.0 } else { sd.iter().map(|s| 2.0 * k * s).sum::<f64>() / sd.len() as f64 };
    Ok(Coverage { fraction: (counted > 0).then(|| hit as f64 / counted as f64), mean_width, counted })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `max |u_det - u_true|` over points with a truth.
    pub max_abs_error_det: Option<f64>,
    pub max_abs_error_mean: Option<f64>,
    /// Mean `6 sd_total`; absent when some sd is infinite.
    pub mean_band_width: Option<f64>,
    pub coverage_train: Option<f64>,
    pub coverage_extrapolation: Option<f64>,
    pub coverage_all: Option<f64>,
    pub points_without_truth: usize,
    /// Points where `|u_det - u_true|` exceeds the bound.
    pub bound_violations: Option<usize>,
    pub nlm_prior_sigma: Option<f64>,
    pub nlm_prior_feasible: Option<bool>,
    pub final_elbo: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical JSON of the configuration.
    pub config_hash: String,
    pub seeds: Seeds,
    pub problem: String,
    pub version: String,
}

/// The JSON document written next to the table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub metrics: Metrics,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub summary: Summary,
    pub rows: Vec<ReportRow>,
    pub artifacts: Artifacts,
}

pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_string(config)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn max_abs(pairs: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    pairs.filter(|(u, _)| !u.is_nan()).map(|(u, v)| (u - v).abs()).fold(None, |acc, e| Some(acc.map_or(e, |a: f64| a.max(e))))
}

pub(crate) fn build_report(config: &ExperimentConfig, problem: &Problem<f64>, artifacts: Artifacts) -> Result<ExperimentReport> {
    use pinnuq::problems::PinnProblem;
    let band = &artifacts.band;
    let grid = &band.grid;
    let truth: Vec<f64> = grid
        .iter()
        .map(|p| match problem.as_ode() {
            Some(ode) => ode.analytic_solution(p[0]).unwrap_or(f64::NAN),
            None => f64::NAN,
        })
        .collect();
    let u_det = grid
        .iter()
        .map(|p| problem.surrogate(&artifacts.trained.params, p))
        .collect::<pinnuq::Result<Vec<_>>>()
        .map_err(HarnessError::stage("evaluation"))?;
    let sd = band.sd_total();

    let mut rows: Vec<ReportRow> = (0..grid.len())
        .map(|i| {
            let covered = (!truth[i].is_nan()).then(|| (truth[i] - band.mean[i]).abs() <= BAND_SIGMAS * sd[i]);
            ReportRow {
                x: grid[i][0],
                t: grid[i].get(1).copied(),
                u_true: truth[i],
                u_det: u_det[i],
                mean: band.mean[i],
                sd_total: sd[i],
                sigma_p: band.sigma_p2[i].sqrt(),
                bound: artifacts.bound.sigma_p[i],
                covered,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.t.unwrap_or(0.0).total_cmp(&b.t.unwrap_or(0.0))));

    // a point is in-sample when every coordinate lies in the training region
    let train = problem.train_region();
    let in_train = |p: &[f64]| p.iter().zip(&train).all(|(v, (a, b))| *v >= *a && *v <= *b);
    let split = |keep: &dyn Fn(&[f64]) -> bool| -> Result<Option<f64>> {
        let idx: Vec<usize> = (0..grid.len()).filter(|&i| keep(&grid[i])).collect();
        let sub = PredictiveBand::new(
            idx.iter().map(|&i| grid[i].clone()).collect(),
            idx.iter().map(|&i| band.mean[i]).collect(),
            idx.iter().map(|&i| band.epistemic_var[i]).collect(),
            idx.iter().map(|&i| band.sigma_p2[i]).collect(),
        )
        .map_err(HarnessError::stage("coverage"))?;
        let t: Vec<f64> = idx.iter().map(|&i| truth[i]).collect();
        Ok(coverage_metrics(&sub, &t, BAND_SIGMAS)?.fraction)
    };
    let all = coverage_metrics(band, &truth, BAND_SIGMAS)?;
    let violations = problem.as_ode().map(|_| {
        (0..grid.len())
            .filter(|&i| !truth[i].is_nan() && (truth[i] - u_det[i]).abs() > artifacts.bound.sigma_p[i])
            .count()
    });
    let metrics = Metrics {
        max_abs_error_det: max_abs(truth.iter().copied().zip(u_det.iter().copied())),
        max_abs_error_mean: max_abs(truth.iter().copied().zip(band.mean.iter().copied())),
        mean_band_width: finite(all.mean_width),
        coverage_train: split(&|p| in_train(p))?,
        coverage_extrapolation: split(&|p| !in_train(p))?,
        coverage_all: all.fraction,
        points_without_truth: grid.len() - all.counted,
        bound_violations: violations,
        nlm_prior_sigma: artifacts.posterior.as_ref().map(|p| p.prior_sigma),
        nlm_prior_feasible: artifacts.posterior.as_ref().map(|p| p.feasible),
        final_elbo: artifacts.elbo_trace.as_ref().and_then(|t| t.last().copied()).and_then(finite),
    };
    let provenance = Provenance {
        config_hash: config_hash(config)?,
        seeds: Seeds::from_master(config.seed),
        problem: problem.describe(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(ExperimentReport { summary: Summary { config: config.clone(), provenance, metrics }, rows, artifacts })
}

fn num(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("NaN");
    } else {
        let _ = write!(out, "{v:e}");
    }
}

impl ExperimentReport {
    pub fn metrics(&self) -> &Metrics {
        &self.summary.metrics
    }

    /// The per-point table; a `t` column follows `x` on space-time grids.
    pub fn table_csv(&self) -> String {
        let space_time = self.rows.first().is_some_and(|r| r.t.is_some());
        let mut out = if space_time { TABLE_HEADER.replacen("x,", "x,t,", 1) } else { TABLE_HEADER.to_string() };
        out.push('\n');
        for r in &self.rows {
            num(&mut out, r.x);
            if let Some(t) = r.t {
                out.push(',');
                num(&mut out, t);
            }
            for v in [r.u_true, r.u_det, r.mean, r.sd_total, r.sigma_p, r.bound] {
                out.push(',');
                num(&mut out, v);
            }
            out.push_str(match r.covered {
                Some(true) => ",1\n",
                Some(false) => ",0\n",
                None => ",NaN\n",
            });
        }
        out
    }

    /// Whitespace-separated columns for gnuplot: x, mean, lower, upper, truth.
    pub fn gnuplot_band(&self) -> String {
        let space_time = self.rows.first().is_some_and(|r| r.t.is_some());
        let mut out = String::from(if space_time { "# x t mean lower upper truth\n" } else { "# x mean lower upper truth\n" });
        for r in &self.rows {
            let half = BAND_SIGMAS * r.sd_total;
            let mut cols = vec![r.x];
            cols.extend(r.t);
            cols.extend([r.mean, r.mean - half, r.mean + half, r.u_true]);
            let line: Vec<String> = cols.iter().map(|v| if v.is_nan() { "NaN".into() } else { format!("{v:e}") }).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }
}

/// Writes the table, summary, gnuplot band and the intermediate artifacts of
/// one cell into `dir`; returns the paths written.
pub fn emit_outputs(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    let stem = report.summary.config.stem();
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(HarnessError::io(&path))?;
        written.push(path);
        Ok(())
    };
    put(format!("{stem}.csv"), report.table_csv())?;
    put(format!("{stem}.json"), report.summary_json()?)?;
    put(format!("{stem}.band.dat"), report.gnuplot_band())?;
    put(format!("{stem}.sigma_p.csv"), report.artifacts.bound.to_csv())?;
    put(format!("{stem}.predictive.csv"), report.artifacts.band.to_csv())?;
    if let Some(post) = &report.artifacts.posterior {
        put(format!("{stem}.posterior.json"), serde_json::to_string_pretty(post)?)?;
    }
    if let Some(trace) = &report.artifacts.elbo_trace {
        let mut body = String::from("step,elbo\n");
        for (i, v) in trace.iter().enumerate() {
            let _ = writeln!(body, "{i},{v:e}");
        }
        put(format!("{stem}.elbo.csv"), body)?;
    }
    let model = format!("{stem}.model");
    report.artifacts.trained.save(dir, &model).map_err(HarnessError::stage("writing outputs"))?;
    written.push(dir.join(format!("{model}.weights")));
    written.push(dir.join(format!("{model}.json")));
    Ok(written)
}


#[cfg(test)]
mod run_tests {
    use super::*;
    use crate::config::{Method, Scale};
    use crate::experiment::run_experiment;

    fn quick(id: &str, method: Method) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(id, method, Scale::Desk).unwrap();
        cfg.det_epochs = 20;
        cfg.vi_epochs = 10;
        cfg.grid_points = 21;
        cfg.posterior_samples = 50;
        cfg
    }

    #[test]
    fn summary_round_trips_through_json() {
        let report = run_experiment(&quick("ode1.cos", Method::ErrorAwareVi)).unwrap();
        let back: Summary = serde_json::from_str(&report.summary_json().unwrap()).unwrap();
        assert_eq!(back, report.summary);
    }

    #[test]
    fn deterministic_rows_have_no_spread() {
        let report = run_experiment(&quick("ode1.log", Method::Deterministic)).unwrap();
        assert!(report.rows.iter().all(|r| r.sd_total == 0.0 && r.mean == r.u_det));
        assert!(report.rows.windows(2).all(|w| w[0].x < w[1].x));
        // no solution past the pole
        assert!(report.rows.iter().filter(|r| r.x > 1.0).all(|r| r.u_true.is_nan() && r.covered.is_none()));
        assert!(report.metrics().points_without_truth > 0);
        assert!(report.table_csv().contains(",NaN,"));
    }

    #[test]
    fn burgers_tables_carry_time() {
        let mut cfg = quick("burgers", Method::ErrorAwareNlm);
        cfg.burgers_grid = (8, 8);
        cfg.grid_points = 5;
        cfg.time_points = 3;
        let report = run_experiment(&cfg).unwrap();
        let csv = report.table_csv();
        assert!(csv.starts_with("x,t,u_true,"));
        assert_eq!(csv.lines().count(), 16);
        assert_eq!(report.metrics().coverage_all, None);
        assert!(report.rows.iter().filter(|r| r.t == Some(0.0)).all(|r| r.bound == 0.0));
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let trained = crate::experiment::train_stage(&quick("ode1.exp", Method::Deterministic)).unwrap();
        let err = crate::experiment::run_with_trained(&quick("ode1.cos", Method::Deterministic), trained).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
