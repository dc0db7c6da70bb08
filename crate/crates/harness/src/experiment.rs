//! Monte Carlo replications over a grid of sample sizes.

use std::collections::BTreeMap;

use hoif::estimators::{exact_bias, EstimateReport, Estimator};
use hoif::mar::{Observation, PreliminaryFit, Sampler, TripletModel};
use hoif::rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, PreliminaryMode, Resolved};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub n: usize,
    pub estimator: String,
    pub order: usize,
    pub k: usize,
    pub cutoff: Option<usize>,
    pub replication: usize,
    pub estimate: f64,
    pub truth: f64,
    pub linear: f64,
    /// Terms of orders `2..=order`.
    pub terms: Vec<f64>,
}

impl ResultRow {
    pub fn error(&self) -> f64 {
        self.estimate - self.truth
    }
}

/// Bias, standard deviation and RMSE of the errors in one `(n, estimator)` cell,
/// each with its Monte Carlo standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub estimator: String,
    pub replications: usize,
    pub bias: f64,
    pub bias_se: f64,
    pub sd: f64,
    pub sd_se: f64,
    pub rmse: f64,
    pub rmse_se: f64,
    /// Exact conditional bias given the fit, when the fit is fixed across replications.
    pub oracle_bias: Option<f64>,
}

pub struct ExperimentOutput {
    pub truth: f64,
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<Summary>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64], m: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Summary of a set of errors. The SE of the SD uses the normal approximation
/// `sd / sqrt(2(R-1))`; the SE of the RMSE is the delta method on the mean square.
pub fn summarize(n: usize, estimator: &str, errors: &[f64], oracle_bias: Option<f64>) -> Summary {
    let r = errors.len();
    let rf = r as f64;
    let bias = mean(errors);
    let sd = sample_sd(errors, bias);
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let mse = mean(&sq);
    let rmse = mse.sqrt();
    let mse_se = sample_sd(&sq, mse) / rf.sqrt();
    Summary {
        n,
        estimator: estimator.to_string(),
        replications: r,
        bias,
        bias_se: sd / rf.sqrt(),
        sd,
        sd_se: if r > 1 { sd / (2.0 * (rf - 1.0)).sqrt() } else { 0.0 },
        rmse,
        rmse_se: if rmse > 0.0 { mse_se / (2.0 * rmse) } else { 0.0 },
        oracle_bias,
    }
}

/// Summaries of result rows, grouped by `(n, estimator)` in row order.
pub fn summarize_rows(rows: &[ResultRow]) -> Vec<Summary> {
    let mut order: Vec<(usize, String)> = Vec::new();
    let mut groups: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.n, r.estimator.clone());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.error());
    }
    order
        .into_iter()
        .map(|key| summarize(key.0, &key.1, &groups[&key], None))
        .collect()
}

/// Seed of the estimation sample (`role = 0`) or training sample (`role = 1`)
/// of replication `rep` at sample size `n`.
pub fn sample_stream(base_seed: u64, n: usize, rep: usize, role: u64) -> rng::ChaCha8Rng {
    rng::stream(rng::mix(base_seed, n as u64), 2 * rep as u64 + role)
}

struct Plan<'a> {
    cfg: &'a ExperimentConfig,
    model: &'a TripletModel,
    sampler: &'a Sampler,
    n: usize,
    resolved: Vec<Resolved>,
    /// Estimators built once per sample size for a fixed fit.
    fixed: Option<Vec<Estimator>>,
}

impl Plan<'_> {
    fn fit_on(&self, train: &[Observation]) -> Result<PreliminaryFit> {
        let p = &self.cfg.preliminary;
        let dim = self.model.dim();
        let cap = self.model.level();
        let levels = [
            PreliminaryFit::fitted_level(train.len(), p.alpha, dim, cap),
            PreliminaryFit::fitted_level(train.len(), p.beta, dim, cap),
            PreliminaryFit::fitted_level(train.len(), p.gamma.unwrap_or(f64::INFINITY), dim, cap),
        ];
        let fit = PreliminaryFit::fitted(self.model, train, levels)?;
        Ok(if p.known_density { fit.with_known_g(self.model) } else { fit })
    }

    fn replicate(&self, rep: usize) -> Result<Vec<ResultRow>> {
        let seed = self.cfg.base_seed;
        let sample = self.sampler.sample(self.n, &mut sample_stream(seed, self.n, rep, 0));
        let mut reports: Vec<EstimateReport> = Vec::with_capacity(self.resolved.len());
        match &self.fixed {
            Some(ests) => {
                for e in ests {
                    reports.push(e.estimate(&sample)?);
                }
            }
            None => {
                let train = self.sampler.sample(self.n, &mut sample_stream(seed, self.n, rep, 1));
                let fit = self.fit_on(&train)?;
                let mut swapped = None;
                for (spec, res) in self.cfg.estimators.iter().zip(&self.resolved) {
                    let mut report = Estimator::new(&fit, &res.config)?.estimate(&sample)?;
                    if spec.cross_fit {
                        if swapped.is_none() {
                            swapped = Some(self.fit_on(&sample)?);
                        }
                        let other = Estimator::new(swapped.as_ref().expect("set above"), &res.config)?
                            .estimate(&train)?;
                        report = report.average(&other)?;
                    }
                    reports.push(report);
                }
            }
        }
        let truth = self.model.truth();
        Ok(self
            .cfg
            .estimators
            .iter()
            .zip(&self.resolved)
            .zip(reports)
            .map(|((spec, res), rep_out)| ResultRow {
                n: self.n,
                estimator: spec.name.clone(),
                order: spec.order,
                k: res.k,
                cutoff: res.cutoff,
                replication: rep,
                estimate: rep_out.value,
                truth,
                linear: rep_out.linear,
                terms: rep_out.terms,
            })
            .collect())
    }
}

/// Runs every replication on a pool of `workers` threads. Rows come back ordered
/// by `(n, estimator, replication)` whatever the pool size.
pub fn run(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let sampler = model.sampler()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let truth = model.truth();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &n in &cfg.n_grid {
        let resolved = cfg
            .estimators
            .iter()
            .map(|e| e.resolve(n, cfg, &model))
            .collect::<Result<Vec<_>>>()?;
        let fixed = match cfg.preliminary.mode {
            PreliminaryMode::Synthetic => {
                let mut fit = PreliminaryFit::synthetic(&model, n, &cfg.synthetic_spec())?;
                if cfg.preliminary.known_density {
                    fit = fit.with_known_g(&model);
                }
                Some(
                    resolved
                        .iter()
                        .map(|r| Estimator::new(&fit, &r.config))
                        .collect::<hoif::Result<Vec<_>>>()?,
                )
            }
            PreliminaryMode::Fitted => None,
        };
        let oracle: Vec<Option<f64>> = match &fixed {
            Some(ests) => ests
                .iter()
                .map(|e| exact_bias(e, &model).map(|b| Some(b.total)))
                .collect::<hoif::Result<_>>()?,
            None => vec![None; resolved.len()],
        };
        let plan = Plan {
            cfg,
            model: &model,
            sampler: &sampler,
            n,
            resolved,
            fixed,
        };
        let per_rep: Vec<Vec<ResultRow>> = pool.install(|| {
            (0..cfg.replications)
                .into_par_iter()
                .map(|rep| plan.replicate(rep))
                .collect::<Result<Vec<_>>>()
        })?;
        for (e, spec) in cfg.estimators.iter().enumerate() {
            let block: Vec<ResultRow> = per_rep.iter().map(|r| r[e].clone()).collect();
            let errors: Vec<f64> = block.iter().map(ResultRow::error).collect();
            summaries.push(summarize(n, &spec.name, &errors, oracle[e]));
            rows.extend(block);
        }
    }
    Ok(ExperimentOutput { truth, rows, summaries })
}
