//! The four subcommands. Each resolves phase vectors for the requested
//! optimizers, evaluates them over the SNR grid and writes one table.

use std::path::PathBuf;

use mcbeam::amr::{AmrEngine, Scenario};
use mcbeam::channel::{ChannelEnsemble, PhaseVector};
use mcbeam::genetic::{ga_optimize, GaConfig};
use mcbeam::info::{build_table, InfoTable};
use mcbeam::manifold::{rm_cgd_multistart, Objective, ObjectiveKind};
use mcbeam::montecarlo::mc_amr_grid;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Optimizer};
use crate::report::{write_table, CliError, ErrorKind, Metadata};

/// Stream of the seed's generator reserved for the random baseline.
const RANDOM_STREAM: u64 = 0xbeef;
/// Offset separating the Monte Carlo seed from the optimizer seed.
const MC_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;
pub const DEFAULT_VALIDATE_SAMPLES: usize = 1_000_000;
/// Gap windows for the slope fit, in bits.
const NONCOOP_FIT_WINDOW: (f64, f64) = (1e-4, 1e-1);
const COOP_FIT_WINDOW: (f64, f64) = (1e-12, 1e-1);
const FIT_SPAN_DB: f64 = 10.0;

pub struct Context {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub command: &'static str,
    table: InfoTable<f64>,
    ensemble: ChannelEnsemble<f64>,
}

/// Phase vector(s) of one optimizer: shared by every SNR, or one per SNR.
enum Beam {
    Fixed(PhaseVector<f64>),
    PerSnr(Vec<PhaseVector<f64>>),
}

impl Beam {
    fn at(&self, i: usize) -> &PhaseVector<f64> {
        match self {
            Beam::Fixed(p) => p,
            Beam::PerSnr(v) => &v[i],
        }
    }
}

fn phases_string(p: &PhaseVector<f64>) -> String {
    p.thetas().iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
}

fn db_label(db: f64) -> String {
    format!("{db}dB")
}

impl Context {
    pub fn new(mut cfg: ExperimentConfig, seed: u64, command: &'static str) -> Result<Self, CliError> {
        // the command-line seed drives the GA; echo it in the recorded config
        cfg.ga.seed = seed;
        let c = cfg.constellation.build()?;
        let table = match &cfg.table_cache {
            Some(path) => InfoTable::load_or_build(path, &c, cfg.table_grid, cfg.hermite_order)?,
            None => build_table(&c, cfg.table_grid, cfg.hermite_order)?,
        };
        let ensemble = ChannelEnsemble::generate(cfg.users, cfg.antennas, 0.0, cfg.channel, cfg.ensemble_seed)?;
        Ok(Self { cfg, seed, command, table, ensemble })
    }

    fn engine(&self) -> Result<AmrEngine<'_, f64, InfoTable<f64>>, CliError> {
        Ok(AmrEngine::new(&self.table, self.cfg.quadrature_order, self.cfg.series_tol)?)
    }

    fn mc_seed(&self) -> u64 {
        self.seed.wrapping_add(MC_SEED_OFFSET)
    }

    fn ga_config(&self) -> GaConfig {
        self.cfg.ga
    }

    fn metadata(&self) -> Metadata {
        let c = &self.cfg;
        let mut m = Metadata::default()
            .with("tool", "mcbeam")
            .with("version", env!("CARGO_PKG_VERSION"))
            .with("command", self.command)
            .with("config_sha256", config_hash(c))
            .with("seed", self.seed)
            .with("ensemble_seed", c.ensemble_seed)
            .with("constellation", self.table.label())
            .with("users", c.users)
            .with("antennas", c.antennas)
            .with("channel", c.channel)
            .with("quadrature_order", c.quadrature_order)
            .with("hermite_order", c.hermite_order)
            .with("series_tol", c.series_tol)
            .with("table_grid", c.table_grid);
        if let Some(n) = c.mc_samples {
            m.push("mc_samples", n);
            m.push("mc_seed", self.mc_seed());
        }
        m.push("config", recorded_config(c));
        m
    }

    fn write<R: Serialize>(&self, stem: &str, meta: &Metadata, rows: &[R]) -> Result<PathBuf, CliError> {
        write_table(&self.cfg.out, stem, self.cfg.format, meta, rows)
    }

    fn objective_kind(method: Optimizer) -> Option<ObjectiveKind> {
        match method {
            Optimizer::RmCgdF1 => Some(ObjectiveKind::F1),
            Optimizer::RmCgdF2 => Some(ObjectiveKind::F2),
            _ => None,
        }
    }

    /// Phases for `method`; the GA, whose fitness depends on SNR, is rerun
    /// at every grid point.
    fn beam(&self, engine: &AmrEngine<'_, f64, InfoTable<f64>>, method: Optimizer, snrs: &[f64]) -> Result<Beam, CliError> {
        let n = self.cfg.antennas;
        Ok(match method {
            Optimizer::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(RANDOM_STREAM);
                Beam::Fixed(PhaseVector::random(n, &mut rng))
            }
            Optimizer::RmCgdF1 | Optimizer::RmCgdF2 => {
                let obj = Objective::new(Self::objective_kind(method).unwrap(), &self.ensemble);
                let runs = rm_cgd_multistart(&obj, self.cfg.multistarts, &self.cfg.rm_cgd, self.seed)?;
                Beam::Fixed(runs.into_iter().next().expect("at least one start").phases)
            }
            Optimizer::Ga => {
                let cfg = self.ga_config();
                let v = snrs
                    .iter()
                    .map(|&db| Ok(ga_optimize(&self.ensemble.with_snr_db(db), engine, &cfg)?.best))
                    .collect::<Result<Vec<_>, CliError>>()?;
                Beam::PerSnr(v)
            }
        })
    }
}

/// Config as recorded in output: what determines the numbers, not where
/// they are written.
fn recorded_config(c: &ExperimentConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(c).expect("config serializes");
    if let Some(m) = v.as_object_mut() {
        for k in ["out", "format", "table_cache"] {
            m.remove(k);
        }
    }
    v
}

fn config_hash(c: &ExperimentConfig) -> String {
    format!("{:x}", Sha256::digest(recorded_config(c).to_string().as_bytes()))
}

#[derive(Debug, Serialize)]
pub struct EvaluateRow {
    pub method: &'static str,
    pub scenario: &'static str,
    pub snr_db: f64,
    pub amr_bits: f64,
    pub gap_bits: f64,
    pub asymptote_bits: f64,
    pub array_gain: f64,
    pub diversity_order: usize,
    pub mc_amr_bits: Option<f64>,
    pub mc_std_error: Option<f64>,
    pub series_truncation: Option<usize>,
    pub series_tail_bound: Option<f64>,
    pub phases: String,
}

pub fn evaluate(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let engine = ctx.engine()?;
    let snrs = ctx.cfg.snr_grid();
    let scenarios = &ctx.cfg.scenarios;
    let mut rows = Vec::new();
    let mut meta = ctx.metadata();
    for &method in &ctx.cfg.optimizers {
        let beam = ctx.beam(&engine, method, snrs)?;
        if let Beam::Fixed(p) = &beam {
            meta.push(format!("phases.{method}"), p.thetas());
        }
        let per_snr = snrs
            .par_iter()
            .enumerate()
            .map(|(i, &db)| {
                let p = beam.at(i);
                let e = ctx.ensemble.with_snr_db(db);
                let mc = match ctx.cfg.mc_samples {
                    Some(n) => Some(mc_amr_grid(&ctx.ensemble, p, &ctx.table, &[db], scenarios, n, ctx.mc_seed())?.remove(0)),
                    None => None,
                };
                scenarios
                    .iter()
                    .enumerate()
                    .map(|(j, &sc)| {
                        let r = engine.report(&e, p, sc)?;
                        let est = mc.as_ref().map(|m| m[j]);
                        Ok(EvaluateRow {
                            method: method.name(),
                            scenario: sc.short_name(),
                            snr_db: db,
                            amr_bits: r.amr_bits,
                            gap_bits: r.gap_bits,
                            asymptote_bits: r.asymptote_bits,
                            array_gain: r.array_gain,
                            diversity_order: r.diversity_order,
                            mc_amr_bits: est.map(|m| m.mean),
                            mc_std_error: est.map(|m| m.std_error),
                            series_truncation: r.series_truncation,
                            series_tail_bound: r.series_tail_bound,
                            phases: phases_string(p),
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        rows.extend(per_snr.into_iter().flatten());
    }
    let max_trunc = rows.iter().filter_map(|r| r.series_truncation).max();
    if let Some(l) = max_trunc {
        meta.push("max_series_truncation", l);
    }
    if scenarios.contains(&Scenario::Cooperative) {
        meta.push("coop_array_gain_convention", mcbeam::amr::COOP_GAIN_CONVENTION);
    }
    Ok(vec![ctx.write("evaluate", &meta, &rows)?])
}

pub fn convergence(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let engine = ctx.engine()?;
    let methods: Vec<Optimizer> = ctx.cfg.optimizers.iter().copied().filter(|m| *m != Optimizer::Random).collect();
    if methods.is_empty() {
        return Err(CliError::new(ErrorKind::Usage, "convergence needs rmcgd-f1, rmcgd-f2 or ga"));
    }
    let mut written = Vec::new();
    for method in methods {
        for &db in ctx.cfg.snr_grid() {
            let e = ctx.ensemble.with_snr_db(db);
            let stem = format!("convergence_{method}_{}", db_label(db));
            let meta = ctx.metadata().with("method", method.name()).with("snr_db", db);
            let path = match Context::objective_kind(method) {
                Some(kind) => {
                    // one start, the first of the evaluate command's multistart set
                    let run = rm_cgd_multistart(&Objective::new(kind, &e), 1, &ctx.cfg.rm_cgd, ctx.seed)?.remove(0);
                    let meta = meta
                        .with("status", run.status)
                        .with("final_grad_norm", run.grad_norm)
                        .with("phases", run.phases.thetas());
                    ctx.write(&stem, &meta, &run.trace)?
                }
                None => {
                    let run = ga_optimize(&e, &engine, &ctx.ga_config())?;
                    let meta = meta
                        .with("stalled", run.stalled)
                        .with("best_fitness", run.fitness)
                        .with("phases", run.best.thetas());
                    ctx.write(&stem, &meta, &run.trace)?
                }
            };
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
pub struct GapRow {
    pub method: &'static str,
    pub scenario: &'static str,
    pub snr_db: f64,
    pub gap_bits: f64,
    pub predicted_gap_bits: f64,
    pub in_fit_window: bool,
    pub fitted_slope: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct GapSummary {
    pub method: &'static str,
    pub scenario: &'static str,
    pub diversity_order: usize,
    pub array_gain: f64,
    pub fit_from_db: Option<f64>,
    pub fit_to_db: Option<f64>,
    pub fit_points: usize,
    pub fitted_slope: Option<f64>,
    pub smallest_gap_db: Option<f64>,
    pub gap_to_prediction: Option<f64>,
}

/// Least-squares slope of `log10 gap` against `snr_db / 10`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0 / 10.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Indices of the final reliable decade: the last `FIT_SPAN_DB` of grid
/// points whose gap lies in the scenario's window.
pub fn fit_window(snrs: &[f64], gaps: &[f64], scenario: Scenario) -> Vec<usize> {
    let (lo, hi) = match scenario {
        Scenario::NonCooperative => NONCOOP_FIT_WINDOW,
        Scenario::Cooperative => COOP_FIT_WINDOW,
    };
    let inside: Vec<usize> = (0..snrs.len()).filter(|&i| gaps[i] >= lo && gaps[i] <= hi).collect();
    match inside.last() {
        Some(&last) => inside.into_iter().filter(|&i| snrs[i] >= snrs[last] - FIT_SPAN_DB).collect(),
        None => Vec::new(),
    }
}

pub fn asymptotics(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let engine = ctx.engine()?;
    let snrs = ctx.cfg.snr_grid();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut meta = ctx.metadata();
    for &method in &ctx.cfg.optimizers {
        // the prediction assumes one beamformer across the grid, so the GA
        // is run once at the first grid point
        let p = match ctx.beam(&engine, method, &snrs[..1])? {
            Beam::Fixed(p) => p,
            Beam::PerSnr(mut v) => v.remove(0),
        };
        meta.push(format!("phases.{method}"), p.thetas());
        for &sc in &ctx.cfg.scenarios {
            let asym = engine.asymptote(&ctx.ensemble, &p, sc)?;
            let gaps = snrs
                .par_iter()
                .map(|&db| engine.gap(&ctx.ensemble.with_snr_db(db), &p, sc))
                .collect::<mcbeam::Result<Vec<f64>>>()?;
            let window = fit_window(snrs, &gaps, sc);
            let pts: Vec<(f64, f64)> = window.iter().map(|&i| (snrs[i], gaps[i])).collect();
            let slope = loglog_slope(&pts);
            let last = window.last().copied();
            let predicted = |db: f64| asym.gap(10f64.powf(db / 10.0));
            for (i, &db) in snrs.iter().enumerate() {
                rows.push(GapRow {
                    method: method.name(),
                    scenario: sc.short_name(),
                    snr_db: db,
                    gap_bits: gaps[i],
                    predicted_gap_bits: predicted(db),
                    in_fit_window: window.contains(&i),
                    fitted_slope: slope,
                });
            }
            summary.push(GapSummary {
                method: method.name(),
                scenario: sc.short_name(),
                diversity_order: asym.diversity_order,
                array_gain: asym.array_gain,
                fit_from_db: window.first().map(|&i| snrs[i]),
                fit_to_db: last.map(|i| snrs[i]),
                fit_points: window.len(),
                fitted_slope: slope,
                smallest_gap_db: last.map(|i| snrs[i]),
                gap_to_prediction: last.map(|i| gaps[i] / predicted(snrs[i])),
            });
        }
    }
    meta.push("fit_window_noncoop_bits", NONCOOP_FIT_WINDOW);
    meta.push("fit_window_coop_bits", COOP_FIT_WINDOW);
    meta.push("fit_span_db", FIT_SPAN_DB);
    Ok(vec![
        ctx.write("asymptotics", &meta, &rows)?,
        ctx.write("asymptotics_summary", &meta, &summary)?,
    ])
}

#[derive(Debug, Serialize)]
pub struct ValidateRow {
    pub method: &'static str,
    pub scenario: &'static str,
    pub snr_db: f64,
    pub amr_bits: f64,
    pub mc_amr_bits: f64,
    pub mc_std_error: f64,
    pub z_score: f64,
    pub within_3_sigma: bool,
}

/// Analytic AMR against the Monte Carlo oracle at every grid point.
pub fn validate(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let engine = ctx.engine()?;
    let snrs = ctx.cfg.snr_grid();
    let scenarios = &ctx.cfg.scenarios;
    let n = ctx.cfg.mc_samples.unwrap_or(DEFAULT_VALIDATE_SAMPLES);
    let mut meta = ctx.metadata();
    if ctx.cfg.mc_samples.is_none() {
        meta.push("mc_samples", n);
        meta.push("mc_seed", ctx.mc_seed());
    }
    let mut rows = Vec::new();
    for &method in &ctx.cfg.optimizers {
        let beam = ctx.beam(&engine, method, snrs)?;
        for (i, &db) in snrs.iter().enumerate() {
            let p = beam.at(i);
            let e = ctx.ensemble.with_snr_db(db);
            let mc = mc_amr_grid(&ctx.ensemble, p, &ctx.table, &[db], scenarios, n, ctx.mc_seed())?.remove(0);
            for (j, &sc) in scenarios.iter().enumerate() {
                let a = engine.amr(&e, p, sc)?;
                let z = mc[j].z_score(a);
                rows.push(ValidateRow {
                    method: method.name(),
                    scenario: sc.short_name(),
                    snr_db: db,
                    amr_bits: a,
                    mc_amr_bits: mc[j].mean,
                    mc_std_error: mc[j].std_error,
                    z_score: z,
                    within_3_sigma: z <= 3.0,
                });
            }
        }
    }
    let failed = rows.iter().filter(|r| !r.within_3_sigma).count();
    meta.push("points_outside_3_sigma", failed);
    let path = ctx.write("validate", &meta, &rows)?;
    if failed > 0 {
        return Err(CliError::new(
            ErrorKind::Validation,
            format!("{failed} of {} points outside 3 standard errors; see {}", rows.len(), path.display()),
        ));
    }
    Ok(vec![path])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64, 10f64.powf(-2.0 * i as f64 / 10.0))).collect();
        assert!((loglog_slope(&pts).unwrap() + 2.0).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn window_keeps_last_decade_inside_bounds() {
        let snrs: Vec<f64> = (0..=40).map(|d| d as f64).collect();
        let gaps: Vec<f64> = snrs.iter().map(|d| 10f64.powf(-d / 10.0)).collect();
        let w = fit_window(&snrs, &gaps, Scenario::NonCooperative);
        assert_eq!(w, (30..=40).collect::<Vec<_>>());
        let w = fit_window(&snrs, &gaps, Scenario::Cooperative);
        assert_eq!((w[0], *w.last().unwrap()), (30, 40));
        assert!(fit_window(&snrs, &vec![1.0; snrs.len()], Scenario::Cooperative).is_empty());
    }
}
