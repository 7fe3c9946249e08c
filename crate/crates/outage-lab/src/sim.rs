//! Monte Carlo outage probabilities and empirical exponents.
//!
//! Each SNR point draws `n_samples` channel realizations in fixed-size
//! chunks; chunk `k` always uses stream `k` of a generator keyed by the seed
//! and the SNR value. Event counts are integers summed in chunk order, so the
//! output does not depend on the number of worker threads.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{draw_gains, ChannelError, ChannelParams};
use crate::constellation::Constellation;
use crate::exponents::{outage_exponent_thm1, outage_exponent_thm2, Exponent, ExponentQuery};
use crate::mi_table::{default_mi_table, MiTable};
use crate::power::{allocate_power, PolicyKind, PowerError, PowerPolicy};
use crate::rng::{stream_rng, subdomain, CHUNK_SIZE, DOMAIN_CHANNEL};
use crate::rotation::{GroupMiTable, Matrix, RotationError, RotationScheme};
use crate::stats::{least_squares, wilson_interval, Z_95};

pub const DEFAULT_MIN_EVENTS: u64 = 100;
/// Seed of the interpolation tables built implicitly by [`MiModel::for_config`].
pub const TABLE_SEED: u64 = 0x7ab1e;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("mutual-information table does not cover the experiment: {0}")]
    Coverage(String),
    #[error("slope fit: {0}")]
    Fit(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Rotation(#[from] RotationError),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: ChannelParams,
    pub constellation: Constellation,
    pub rate: f64,
    pub policy: PowerPolicy,
    pub rotation: Option<RotationScheme>,
    pub snr_grid_db: Vec<f64>,
    pub n_samples: u64,
    pub seed: u64,
    pub min_events: u64,
}

impl SimConfig {
    pub fn new(params: ChannelParams, constellation: Constellation, rate: f64, policy: PowerPolicy) -> Self {
        SimConfig {
            params,
            constellation,
            rate,
            policy: policy.for_channel(&params),
            rotation: None,
            snr_grid_db: Vec::new(),
            n_samples: 0,
            seed: 0,
            min_events: DEFAULT_MIN_EVENTS,
        }
    }

    pub fn with_grid(mut self, snr_grid_db: Vec<f64>, n_samples: u64, seed: u64) -> Self {
        self.snr_grid_db = snr_grid_db;
        self.n_samples = n_samples;
        self.seed = seed;
        self
    }

    pub fn with_rotation(mut self, rotation: RotationScheme) -> Self {
        self.rotation = Some(rotation);
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.params.validate()?;
        self.policy.validate()?;
        let bits = self.constellation.bits() as f64;
        if !(self.rate > 0.0 && self.rate < bits) {
            return Err(SimError::Config(format!("need 0 < R < M, got R = {} with M = {bits}", self.rate)));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) || self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimError::Config("SNR grid must be finite and strictly increasing".into()));
        }
        if self.policy.m != self.params.m || self.policy.d_e != self.params.d_e {
            return Err(SimError::Config("policy was not bound to this channel (use for_channel)".into()));
        }
        if let Some(r) = &self.rotation {
            if r.matrices.iter().map(Matrix::dim).sum::<usize>() != self.params.b as usize {
                return Err(SimError::Config("rotation groups must cover the B blocks".into()));
            }
        }
        for &db in &self.snr_grid_db {
            self.params.noise_variance(db_to_linear(db))?;
        }
        Ok(())
    }

    /// Exponent predicted by the closed forms for this configuration.
    pub fn theory_exponent(&self) -> Result<Exponent, SimError> {
        let uniform = self.policy.kind == PolicyKind::Uniform;
        let (d_e, d_peak) = if uniform { (0.0, f64::INFINITY) } else { (self.params.d_e, self.policy.d_peak) };
        let q = ExponentQuery::new(self.params.b, self.params.m, self.rate, self.constellation.bits(), d_e, d_peak);
        let res = match &self.rotation {
            Some(r) if r.n() > 1 => outage_exponent_thm2(&q.with_rotation(r.n() as u32)),
            _ => outage_exponent_thm1(&q),
        };
        res.map(|r| r.d).map_err(|e| SimError::Config(e.to_string()))
    }
}

/// `10^{dB/10}`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// How instantaneous mutual information is evaluated.
#[derive(Debug, Clone)]
pub enum MiModel {
    /// Per-block `I_X(s)` table (unrotated).
    Table(MiTable),
    /// One group table per rotation group.
    Groups(Vec<GroupMiTable>),
}

impl MiModel {
    /// Builds the default tables needed by `cfg`.
    pub fn for_config(cfg: &SimConfig) -> Result<Self, SimError> {
        match &cfg.rotation {
            Some(r) if r.n() > 1 => {
                let mut built: Vec<(Matrix, GroupMiTable)> = Vec::new();
                let mut tables = Vec::with_capacity(r.k());
                for u in &r.matrices {
                    let t = match built.iter().find(|(m, _)| m == u) {
                        Some((_, t)) => t.clone(),
                        None => {
                            let t = GroupMiTable::build_default(u, &cfg.constellation, TABLE_SEED)?;
                            built.push((u.clone(), t.clone()));
                            t
                        }
                    };
                    tables.push(t);
                }
                Ok(MiModel::Groups(tables))
            }
            _ => Ok(MiModel::Table(default_mi_table(&cfg.constellation, TABLE_SEED))),
        }
    }

    fn check(&self, cfg: &SimConfig) -> Result<(), SimError> {
        let c = &cfg.constellation;
        match self {
            MiModel::Table(t) => {
                if !t.matches(c) {
                    return Err(SimError::Coverage(format!(
                        "table is for {}-{}, need {}",
                        t.bits(),
                        t.kind(),
                        c.label()
                    )));
                }
                if t.saturation_value() < c.bits() as f64 - 1e-3 {
                    return Err(SimError::Coverage(format!(
                        "table saturates at {} < M − 1e-3; extend s_max",
                        t.saturation_value()
                    )));
                }
            }
            MiModel::Groups(ts) => {
                let rot =
                    cfg.rotation.as_ref().ok_or_else(|| SimError::Config("group tables need a rotation".into()))?;
                if ts.len() != rot.k()
                    || ts.iter().zip(&rot.matrices).any(|(t, m)| t.dim() != m.dim() || t.bits() != c.bits())
                {
                    return Err(SimError::Coverage("group tables do not match the rotation scheme".into()));
                }
            }
        }
        Ok(())
    }

    fn block_average(&self, snrs: &[f64], scratch: &mut [f64]) -> f64 {
        match self {
            MiModel::Table(t) => snrs.iter().map(|&s| t.lookup(s)).sum::<f64>() / snrs.len() as f64,
            MiModel::Groups(ts) => {
                let mut start = 0;
                let mut total = 0.0;
                for t in ts {
                    let n = t.dim();
                    scratch[..n].copy_from_slice(&snrs[start..start + n]);
                    total += t.lookup(&scratch[..n]) * n as f64;
                    start += n;
                }
                total / snrs.len() as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub snr_db: f64,
    pub pout: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
    pub events: u64,
}

impl OutageEstimate {
    pub fn from_counts(snr_db: f64, events: u64, n: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(events, n, Z_95);
        let pout = if n == 0 { 0.0 } else { events as f64 / n as f64 };
        OutageEstimate { snr_db, pout, ci_low, ci_high, n, events }
    }
}

/// Empirical exponent: `slope` is `−d log10 pout / d log10 snr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub points_used: usize,
}

/// Outage probability at every SNR of `cfg`.
///
/// ```
/// use outage_lab::channel::ChannelParams;
/// use outage_lab::constellation::{Constellation, ConstellationKind};
/// use outage_lab::mi_table::build_mi_table;
/// use outage_lab::power::PowerPolicy;
/// use outage_lab::sim::{estimate_outage, MiModel, SimConfig};
///
/// let bpsk = Constellation::build(ConstellationKind::Psk, 1).unwrap();
/// let table = build_mi_table(&bpsk, 1e-3, 1e6, 32, 4_000, 1).unwrap();
/// let cfg = SimConfig::new(ChannelParams::new(2, 1, 0.0), bpsk, 0.5, PowerPolicy::uniform())
///     .with_grid(vec![0.0, 10.0], 20_000, 7);
/// let est = estimate_outage(&cfg, &MiModel::Table(table)).unwrap();
/// assert!(est[1].pout < est[0].pout);
/// ```
pub fn estimate_outage(cfg: &SimConfig, model: &MiModel) -> Result<Vec<OutageEstimate>, SimError> {
    cfg.validate()?;
    model.check(cfg)?;
    if cfg.n_samples == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(cfg.snr_grid_db.len());
    for &db in &cfg.snr_grid_db {
        let snr = db_to_linear(db);
        let policy = cfg.policy.resolve(&cfg.params, snr, cfg.seed)?;
        let events = count_outages(cfg, model, &policy, snr, subdomain(DOMAIN_CHANNEL, db.to_bits()));
        out.push(OutageEstimate::from_counts(db, events, cfg.n_samples));
    }
    Ok(out)
}

fn count_outages(cfg: &SimConfig, model: &MiModel, policy: &PowerPolicy, snr: f64, domain: u64) -> u64 {
    let b = cfg.params.b as usize;
    let m = cfg.params.m as usize;
    let sigma2 = csit_variance(&cfg.params, snr);
    let n = cfg.n_samples;
    (0..n.div_ceil(CHUNK_SIZE))
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(cfg.seed, domain, k);
            let (mut g, mut gh, mut eff, mut scratch) = (vec![0.0; b], vec![0.0; b], vec![0.0; b], vec![0.0; b]);
            let len = CHUNK_SIZE.min(n - k * CHUNK_SIZE);
            let mut events = 0u64;
            for _ in 0..len {
                draw_gains(&mut rng, m, sigma2, &mut g, &mut gh);
                let p = allocate_power(policy, &gh, snr);
                for (e, gi) in eff.iter_mut().zip(&g) {
                    *e = p * gi;
                }
                if model.block_average(&eff, &mut scratch) < cfg.rate {
                    events += 1;
                }
            }
            events
        })
        .collect::<Vec<u64>>()
        .into_iter()
        .sum()
}

fn csit_variance(params: &ChannelParams, snr: f64) -> f64 {
    params.noise_variance(snr).expect("validated before sampling")
}

/// Weighted fit of `log10 pout` on `log10 snr` over points with at least `min_events` events.
///
/// ```
/// use outage_lab::sim::{fit_slope, OutageEstimate};
///
/// let pts: Vec<OutageEstimate> = [10.0, 15.0, 20.0]
///     .iter()
///     .map(|&db| {
///         let pout = 10f64.powf(-2.0 * db / 10.0);
///         OutageEstimate { snr_db: db, pout, ci_low: pout, ci_high: pout, n: 1_000_000_000, events: (pout * 1e9) as u64 }
///     })
///     .collect();
/// assert!((fit_slope(&pts, 100).unwrap().slope - 2.0).abs() < 1e-12);
/// ```
pub fn fit_slope(estimates: &[OutageEstimate], min_events: u64) -> Result<SlopeFit, SimError> {
    let used: Vec<&OutageEstimate> = estimates.iter().filter(|e| e.events >= min_events && e.events > 0).collect();
    if used.len() < 2 {
        return Err(SimError::Fit(format!("need ≥ 2 points with ≥ {min_events} events, have {}", used.len())));
    }
    let xs: Vec<f64> = used.iter().map(|e| e.snr_db / 10.0).collect();
    let ys: Vec<f64> = used.iter().map(|e| e.pout.log10()).collect();
    let ws: Vec<f64> = used.iter().map(|e| e.events as f64).collect();
    let fit = least_squares(&xs, &ys, Some(&ws));
    Ok(SlopeFit { slope: -fit.slope, stderr: fit.slope_stderr, points_used: used.len() })
}

/// CSV with columns `snr_db,pout,ci_low,ci_high,n,events`.
pub fn estimates_csv(estimates: &[OutageEstimate]) -> String {
    let mut s = String::from("snr_db,pout,ci_low,ci_high,n,events\n");
    for e in estimates {
        writeln!(s, "{},{},{},{},{},{}", e.snr_db, e.pout, e.ci_low, e.ci_high, e.n, e.events).unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub estimates: Result<Vec<OutageEstimate>, SimError>,
    pub fit: Result<SlopeFit, SimError>,
    pub theory: Option<Exponent>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// All estimates, with a leading `config` column.
    pub fn estimates_csv(&self) -> String {
        let mut s = String::from("config,snr_db,pout,ci_low,ci_high,n,events\n");
        for row in &self.rows {
            for e in row.estimates.iter().flatten() {
                writeln!(s, "{},{},{},{},{},{},{}", row.label, e.snr_db, e.pout, e.ci_low, e.ci_high, e.n, e.events)
                    .unwrap();
            }
        }
        s
    }

    /// One line per configuration: fitted slope next to the theory exponent.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("config,slope,slope_stderr,points_used,theory_d,error\n");
        for row in &self.rows {
            let theory = row.theory.map_or(String::new(), |d| d.to_string());
            let error = match (&row.estimates, &row.fit) {
                (Err(e), _) | (Ok(_), Err(e)) => e.to_string().replace(',', ";"),
                _ => String::new(),
            };
            match &row.fit {
                Ok(f) => writeln!(s, "{},{},{},{},{},{}", row.label, f.slope, f.stderr, f.points_used, theory, error),
                Err(_) => writeln!(s, "{},,,0,{},{}", row.label, theory, error),
            }
            .unwrap();
        }
        s
    }
}

/// Runs every configuration in order, keeping per-configuration errors.
pub fn sweep(cfgs: &[(String, SimConfig)]) -> SweepTable {
    let mut cache: HashMap<String, MiModel> = HashMap::new();
    let rows = cfgs
        .iter()
        .map(|(label, cfg)| {
            let key = format!("{:?}|{:?}", cfg.constellation, cfg.rotation);
            let model = match cache.get(&key) {
                Some(m) => Ok(m.clone()),
                None => MiModel::for_config(cfg).inspect(|m| {
                    cache.insert(key, m.clone());
                }),
            };
            let estimates = model.and_then(|m| estimate_outage(cfg, &m));
            let fit = match &estimates {
                Ok(e) => fit_slope(e, cfg.min_events),
                Err(e) => Err(e.clone()),
            };
            SweepRow { label: label.clone(), estimates, fit, theory: cfg.theory_exponent().ok() }
        })
        .collect();
    SweepTable { rows }
}
