use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corruption::corrupt;
use crate::error::{Error, Result};
use crate::error_metric::{lp_map_distance, EpReport, ErrorEvaluator};
use crate::estimators::{fit, EstimatorConfig};
use crate::io::read_measure;
use crate::kernels::MonteCarloConfig;
use crate::measures::sample;
use crate::rng::{derive_seed, label, stream};

use super::config::{ExperimentConfig, Setting};
use super::settings::{gen_checkerboard, gen_stripes, gen_setting_a, gen_setting_b, Instance};

/// Metric names in output order.
pub const METRICS: [&str; 5] = ["ep", "optimality_gap", "feasibility_gap", "lp_vs_tstar", "wall_time_ms"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub setting: String,
    pub d: usize,
    pub n: usize,
    /// Repetition index k; the cell's streams are derived from it.
    pub seed: u64,
    pub estimator: String,
    pub metric: String,
    pub value: f64,
}

/// Rows plus `key=value` metadata recorded alongside them.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub metadata: Vec<(String, String)>,
}

/// Build the ground-truth instance for one dimension. Planar settings
/// ignore `d`.
pub fn build_instance(cfg: &ExperimentConfig, d: usize) -> Result<Instance> {
    let mut rng = stream(cfg.master_seed, &[label("instance"), label(cfg.setting.name()), d as u64]);
    match cfg.setting {
        Setting::A => gen_setting_a(cfg.n_atoms, d, cfg.p, &mut rng),
        Setting::B => gen_setting_b(cfg.n_atoms, d, &mut rng),
        Setting::Checkerboard => gen_checkerboard(cfg.cells, cfg.n_atoms, &mut rng),
        Setting::Stripes => gen_stripes(cfg.grid_points, cfg.delta),
        Setting::Custom => {
            let (mu, nu) = match (&cfg.mu, &cfg.nu) {
                (Some(a), Some(b)) => (read_measure(a)?, read_measure(b)?),
                _ => return Err(Error::InvalidParameter("custom setting needs mu and nu files".into())),
            };
            Ok(Instance {
                mu,
                nu,
                t_star: None,
                kappa_star: None,
            })
        }
    }
}

fn dimensions(cfg: &ExperimentConfig) -> Vec<usize> {
    match cfg.setting {
        Setting::A | Setting::B => cfg.d.clone(),
        Setting::Checkerboard | Setting::Stripes => vec![2],
        // read from the files once the instance is built
        Setting::Custom => vec![0],
    }
}

struct Cell {
    d_index: usize,
    k: usize,
    n: usize,
    estimator: usize,
}

struct CellResult {
    values: Vec<(usize, f64)>,
    params: BTreeMap<String, f64>,
    failed: bool,
}

/// Seed shared by every estimator in the (setting, d, k, n) cell, so all
/// estimators see the same subsample.
pub fn sample_seed(cfg: &ExperimentConfig, d: usize, k: usize, n: usize) -> u64 {
    derive_seed(
        cfg.master_seed,
        &[label(cfg.setting.name()), d as u64, k as u64, n as u64],
    )
}

/// Draw the cell's subsamples (with replacement) and apply the corruption
/// budget, if any, to each side independently.
pub fn cell_samples(
    cfg: &ExperimentConfig,
    inst: &Instance,
    d: usize,
    k: usize,
    n: usize,
) -> Result<(Vec<crate::measures::Point>, Vec<crate::measures::Point>)> {
    let seed = sample_seed(cfg, d, k, n);
    let mut rng = stream(seed, &[label("subsample")]);
    let mut xs = sample(&inst.mu, n, &mut rng)?;
    let mut ys = sample(&inst.nu, n, &mut rng)?;
    if let Some(budget) = &cfg.budget {
        xs = corrupt(&xs, budget, &cfg.adversary, &mut stream(seed, &[label("corrupt-source")]))?;
        ys = corrupt(&ys, budget, &cfg.adversary, &mut stream(seed, &[label("corrupt-target")]))?;
    }
    Ok((xs, ys))
}

fn run_cell(cfg: &ExperimentConfig, inst: &Instance, eval: &ErrorEvaluator, d: usize, cell: &Cell) -> Result<CellResult> {
    let spec = &cfg.estimators[cell.estimator];
    let started = Instant::now();
    let (xs, ys) = cell_samples(cfg, inst, d, cell.k, cell.n)?;
    let est_seed = derive_seed(sample_seed(cfg, d, cell.k, cell.n), &[label(&spec.label())]);
    let mut est_cfg = EstimatorConfig::with_p(cfg.p);
    est_cfg.seed = est_seed;
    if let Some(b) = &cfg.budget {
        est_cfg.eps = b.eps;
        est_cfg.rho = b.rho;
    }
    est_cfg.apply_overrides(&spec.params)?;
    let fitted = fit(spec.name, &xs, &ys, &est_cfg)?;
    let mc = MonteCarloConfig {
        seed: derive_seed(est_seed, &[label("mc")]),
        ..cfg.mc.clone()
    };
    let report: EpReport = eval.evaluate(&fitted.pipeline, &mc)?;
    let mut values = vec![
        (0, report.ep),
        (1, report.optimality_gap),
        (2, report.feasibility_gap),
    ];
    if let Some(t_star) = &inst.t_star {
        if fitted.pipeline.is_deterministic() {
            values.push((3, lp_map_distance(&fitted.pipeline, t_star, &inst.mu, cfg.p)?));
        }
    }
    if cfg.wall_time {
        values.push((4, started.elapsed().as_secs_f64() * 1e3));
    }
    Ok(CellResult {
        values,
        params: fitted.params,
        failed: false,
    })
}

fn fmt_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

/// Run every (d, k, n, estimator) cell in parallel and gather the rows in
/// sorted order. A failing cell is logged and recorded as NaN rows for the
/// E_p metrics; the rest of the run continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut instances = Vec::new();
    for d in dimensions(cfg) {
        let inst = build_instance(cfg, d)?;
        let d = inst.mu.dim();
        if let Some(&max_n) = cfg.n_grid.iter().max() {
            if max_n > inst.mu.len() {
                log::warn!("sample size {max_n} exceeds the ground-truth support size {}", inst.mu.len());
            }
        }
        let eval = ErrorEvaluator::new(inst.mu.clone(), inst.nu.clone(), cfg.p)?;
        log::info!("setting {} d={d}: W_p(mu, nu) = {}", cfg.setting, eval.wp());
        instances.push((d, inst, eval));
    }

    let mut cells = Vec::new();
    for d_index in 0..instances.len() {
        for &n in &cfg.n_grid {
            for k in 0..cfg.iterations {
                for estimator in 0..cfg.estimators.len() {
                    cells.push(Cell { d_index, k, n, estimator });
                }
            }
        }
    }
    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|cell| {
            let (d, inst, eval) = &instances[cell.d_index];
            run_cell(cfg, inst, eval, *d, cell).unwrap_or_else(|e| {
                log::warn!(
                    "{} failed at d={d} n={} k={}: {e}",
                    cfg.estimators[cell.estimator].label(),
                    cell.n,
                    cell.k
                );
                CellResult {
                    values: (0..3).map(|m| (m, f64::NAN)).collect(),
                    params: BTreeMap::new(),
                    failed: true,
                }
            })
        })
        .collect();

    let mut keyed = Vec::new();
    let mut params_meta = BTreeMap::new();
    let mut failures = 0;
    for (cell, res) in cells.iter().zip(results) {
        let d = instances[cell.d_index].0;
        let est = cfg.estimators[cell.estimator].label();
        failures += res.failed as usize;
        if cell.k == 0 && !res.params.is_empty() {
            let text: Vec<String> = res.params.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            params_meta.insert((d, cell.n, cell.estimator), (est.clone(), text.join(";")));
        }
        for (m, value) in res.values {
            keyed.push((
                (d, cell.n, cell.k, cell.estimator, m),
                ResultRow {
                    setting: cfg.setting.name().to_string(),
                    d,
                    n: cell.n,
                    seed: cell.k as u64,
                    estimator: est.clone(),
                    metric: METRICS[m].to_string(),
                    value,
                },
            ));
        }
    }
    keyed.sort_by_key(|e| e.0);

    let mut metadata = vec![
        ("setting".to_string(), cfg.setting.name().to_string()),
        ("d".into(), fmt_list(&instances.iter().map(|i| i.0).collect::<Vec<_>>())),
        ("N".into(), fmt_list(&instances.iter().map(|i| i.1.mu.len()).collect::<Vec<_>>())),
        ("K".into(), cfg.iterations.to_string()),
        ("n_grid".into(), fmt_list(&cfg.n_grid)),
        ("p".into(), cfg.p.to_string()),
        ("master_seed".into(), cfg.master_seed.to_string()),
        ("estimators".into(), fmt_list(&cfg.estimators.iter().map(|e| e.label()).collect::<Vec<_>>())),
        ("mc".into(), format!("samples:{};replicates:{}", cfg.mc.samples, cfg.mc.replicates)),
        (
            "bootstrap".into(),
            format!("B:{};quantiles:{}", cfg.bootstrap.resamples, fmt_list(&cfg.bootstrap.quantiles)),
        ),
    ];
    if let Some(b) = &cfg.budget {
        metadata.push(("budget".into(), format!("eps:{};rho:{};p:{}", b.eps, b.rho, b.p)));
        metadata.push(("adversary".into(), cfg.adversary.name().to_string()));
    }
    for (d, _, eval) in &instances {
        metadata.push((format!("wp_mu_nu.d{d}"), eval.wp().to_string()));
    }
    for ((d, n, _), (est, text)) in params_meta {
        metadata.push((format!("params.{est}.d{d}.n{n}"), text));
    }
    metadata.push(("failures".into(), failures.to_string()));
    Ok(ExperimentOutput {
        rows: keyed.into_iter().map(|(_, r)| r).collect(),
        metadata,
    })
}
