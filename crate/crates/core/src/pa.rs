//! Parallel analysis: how many factors rise above a permutation null.
//!
//! Two procedures share one sequential rule. Factor `j` is kept iff the
//! observed `λ_j` of `(1/n)·B̂·B̂ᵀ` is strictly above its threshold, and
//! evaluation stops at the first factor that is not kept.
//!
//! * Monte Carlo: the threshold is the type-7 percentile of `λ_j` over
//!   row-permuted copies of `B̂`.
//! * Tracy–Widom: the threshold is `E₊ + γ₀·n^{-2/3}·q_TW(percentile)`.
//!
//! `B̂` is the row-centered data (`CenteredB1`), the row-standardized data
//! scaled to unit mean square so that `(1/n)·B̂·B̂ᵀ` is the spatial-sign
//! matrix (`StandardizedB2`), or the raw data (`Raw`, Monte Carlo only).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edge::{edge_params, johnstone_edge, normalize_stat, EdgeParams, PopulationShape};
use crate::eig::top_eigs_gram;
use crate::error::{Error, Result};
use crate::matrix::{center_rows, standardize_rows, DataMatrix};
use crate::sampling::{domain, gaussian_matrix, permute_rows, SeedSpec};
use crate::stats::quantile_sorted;
use crate::tw::{tw1_pvalue, tw1_quantile};

/// Fewest permutations for which a percentile threshold is accepted.
pub const MIN_PERMUTATIONS: usize = 20;
/// Fewest permutations for a null percentile table.
pub const MIN_TABLE_PERMUTATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaMethod {
    MonteCarlo,
    TwDirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaVariant {
    Raw,
    CenteredB1,
    StandardizedB2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaConfig {
    pub method: PaMethod,
    pub variant: PaVariant,
    pub percentile: f64,
    pub num_permutations: usize,
    pub max_factors: usize,
    pub seed: u64,
}

impl PaConfig {
    pub fn monte_carlo(variant: PaVariant, max_factors: usize, seed: u64) -> Self {
        Self {
            method: PaMethod::MonteCarlo,
            variant,
            percentile: 0.95,
            num_permutations: 1000,
            max_factors,
            seed,
        }
    }

    pub fn tw_direct(variant: PaVariant, max_factors: usize) -> Self {
        Self {
            method: PaMethod::TwDirect,
            variant,
            percentile: 0.95,
            num_permutations: 0,
            max_factors,
            seed: 0,
        }
    }

    fn validate(&self, p: usize, n: usize) -> Result<()> {
        if p < 2 || n < 2 {
            return Err(Error::InvalidInput(format!(
                "parallel analysis needs p, n >= 2, got {p}x{n}"
            )));
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return Err(Error::Config(format!(
                "percentile must lie in (0, 1), got {}",
                self.percentile
            )));
        }
        if self.max_factors > p.min(n) {
            return Err(Error::Config(format!(
                "max_factors = {} exceeds min(p, n) = {}",
                self.max_factors,
                p.min(n)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaStep {
    /// 1-based.
    pub factor_index: usize,
    pub observed_eigenvalue: f64,
    pub threshold: f64,
    /// `n^{2/3}(λ − E₊)/γ₀` when edge constants exist for the variant.
    pub normalized_stat: Option<f64>,
    pub p_value: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaResult {
    pub k_selected: usize,
    pub steps: Vec<PaStep>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub edge: Option<EdgeParams>,
    pub p: usize,
    pub n: usize,
    pub config: PaConfig,
}

/// `B̂` for a variant, scaled so the statistic is `(1/n)·B̂·B̂ᵀ`.
pub fn prepare(b: &DataMatrix, variant: PaVariant) -> Result<DataMatrix> {
    match variant {
        PaVariant::Raw => Ok(b.clone()),
        PaVariant::CenteredB1 => center_rows(b),
        PaVariant::StandardizedB2 => {
            let root_n = (b.cols() as f64).sqrt();
            Ok(standardize_rows(b)?.map_rows(|_, src, dst| {
                dst.iter_mut().zip(src).for_each(|(d, s)| *d = s * root_n);
            }))
        }
    }
}

/// Edge constants for the null of a prepared matrix, if the variant has them.
///
/// `StandardizedB2` uses the finite-n Johnstone pair. `CenteredB1` solves the
/// edge law with the per-row centered mean squares as population spectrum.
pub fn null_edge(prepared: &DataMatrix, variant: PaVariant) -> Result<Option<EdgeParams>> {
    let (p, n) = (prepared.rows(), prepared.cols());
    match variant {
        PaVariant::Raw => Ok(None),
        PaVariant::StandardizedB2 => johnstone_edge(n, p).map(Some),
        PaVariant::CenteredB1 => {
            let tvals: Vec<f64> = prepared
                .row_iter()
                .map(|r| r.iter().map(|v| v * v).sum::<f64>() / n as f64)
                .collect();
            if tvals.iter().any(|&t| !(t > 0.0)) {
                let rows = tvals
                    .iter()
                    .enumerate()
                    .filter(|(_, &t)| !(t > 0.0))
                    .map(|(i, _)| i)
                    .collect();
                return Err(Error::DegenerateRows { rows });
            }
            let shape = PopulationShape::new(tvals, p as f64 / n as f64, 1.0)?;
            Ok(Some(edge_params(&shape)))
        }
    }
}

/// Buja–Eyuboglu permutation procedure.
pub fn pa_monte_carlo(b: &DataMatrix, cfg: &PaConfig) -> Result<PaResult> {
    if cfg.method != PaMethod::MonteCarlo {
        return Err(Error::Config("pa_monte_carlo requires method = monte_carlo".into()));
    }
    let (p, n) = (b.rows(), b.cols());
    cfg.validate(p, n)?;
    if cfg.num_permutations < MIN_PERMUTATIONS {
        return Err(Error::Config(format!(
            "num_permutations must be at least {MIN_PERMUTATIONS}, got {}",
            cfg.num_permutations
        )));
    }
    let prepared = prepare(b, cfg.variant)?;
    let edge = null_edge(&prepared, cfg.variant)?;
    let k = cfg.max_factors;
    if k == 0 {
        return Ok(empty_result(cfg, edge, p, n));
    }

    let observed = top_eigs_gram(&prepared, k)?.into_values();
    let seed = SeedSpec::new(cfg.seed).with_domain(domain::PERMUTATION);
    let replicas: Vec<Vec<f64>> = (0..cfg.num_permutations as u64)
        .into_par_iter()
        .map(|r| top_eigs_gram(&permute_rows(&prepared, seed, r), k).map(|s| s.into_values()))
        .collect::<Result<_>>()?;

    let mut steps = Vec::new();
    for (j, &obs) in observed.iter().enumerate() {
        let mut null: Vec<f64> = replicas.iter().map(|v| v[j]).collect();
        null.sort_by(f64::total_cmp);
        let threshold = quantile_sorted(&null, cfg.percentile)?;
        let exceed = null.iter().filter(|&&v| v >= obs).count();
        let selected = obs > threshold;
        steps.push(PaStep {
            factor_index: j + 1,
            observed_eigenvalue: obs,
            threshold,
            normalized_stat: edge.as_ref().map(|e| normalize_stat(obs, e, n)),
            p_value: (1 + exceed) as f64 / (1 + null.len()) as f64,
            selected,
        });
        if !selected {
            break;
        }
    }
    Ok(finish(cfg, edge, steps, p, n))
}

/// Direct Tracy–Widom threshold procedure.
pub fn pa_tw(b: &DataMatrix, cfg: &PaConfig) -> Result<PaResult> {
    if cfg.method != PaMethod::TwDirect {
        return Err(Error::Config("pa_tw requires method = tw_direct".into()));
    }
    if cfg.variant == PaVariant::Raw {
        return Err(Error::UnsupportedVariant(
            "the Tracy-Widom procedure needs a centered (b1) or standardized (b2) matrix".into(),
        ));
    }
    let (p, n) = (b.rows(), b.cols());
    cfg.validate(p, n)?;
    let prepared = prepare(b, cfg.variant)?;
    let edge = null_edge(&prepared, cfg.variant)?.expect("centered variants have edge constants");
    let k = cfg.max_factors;
    if k == 0 {
        return Ok(empty_result(cfg, Some(edge), p, n));
    }
    let threshold = crate::edge::denormalize_stat(tw1_quantile(cfg.percentile)?, &edge, n);
    let observed = top_eigs_gram(&prepared, k)?.into_values();
    Ok(finish(cfg, Some(edge.clone()), tw_steps(&observed, threshold, &edge, n), p, n))
}

fn tw_steps(observed: &[f64], threshold: f64, edge: &EdgeParams, n: usize) -> Vec<PaStep> {
    let mut steps = Vec::new();
    for (j, &obs) in observed.iter().enumerate() {
        let stat = normalize_stat(obs, edge, n);
        let selected = obs > threshold;
        steps.push(PaStep {
            factor_index: j + 1,
            observed_eigenvalue: obs,
            threshold,
            normalized_stat: Some(stat),
            p_value: tw1_pvalue(stat),
            selected,
        });
        if !selected {
            break;
        }
    }
    steps
}

/// Runs whichever procedure `cfg.method` names.
pub fn run(b: &DataMatrix, cfg: &PaConfig) -> Result<PaResult> {
    match cfg.method {
        PaMethod::MonteCarlo => pa_monte_carlo(b, cfg),
        PaMethod::TwDirect => pa_tw(b, cfg),
    }
}

fn empty_result(cfg: &PaConfig, edge: Option<EdgeParams>, p: usize, n: usize) -> PaResult {
    finish(cfg, edge, Vec::new(), p, n)
}

fn finish(cfg: &PaConfig, edge: Option<EdgeParams>, steps: Vec<PaStep>, p: usize, n: usize) -> PaResult {
    PaResult {
        k_selected: steps.iter().take_while(|s| s.selected).count(),
        steps,
        edge,
        p,
        n,
        config: cfg.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullRow {
    pub percentile: f64,
    pub empirical: f64,
    pub tw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullTable {
    pub p: usize,
    pub n: usize,
    pub num_permutations: usize,
    pub seed: u64,
    pub edge: EdgeParams,
    pub rows: Vec<NullRow>,
    /// Normalized top eigenvalue of every permuted replica, ascending.
    #[serde(skip)]
    pub statistics: Vec<f64>,
}

/// Percentiles of the normalized top eigenvalue of row-permuted, standardized
/// Gaussian noise, next to the matching Tracy–Widom quantiles.
pub fn null_percentile_table(
    p: usize,
    n: usize,
    percentiles: &[f64],
    num_permutations: usize,
    seed: u64,
) -> Result<NullTable> {
    if num_permutations < MIN_TABLE_PERMUTATIONS {
        return Err(Error::Config(format!(
            "num_permutations must be at least {MIN_TABLE_PERMUTATIONS}, got {num_permutations}"
        )));
    }
    if p < 2 || n < 2 {
        return Err(Error::InvalidInput(format!("need p, n >= 2, got {p}x{n}")));
    }
    if let Some(&q) = percentiles.iter().find(|&&q| !(q > 0.0 && q < 1.0)) {
        return Err(Error::Domain(format!("percentiles must lie in (0, 1), got {q}")));
    }
    let seeds = SeedSpec::new(seed);
    let noise = gaussian_matrix(p, n, seeds.with_domain(domain::DATA), 0)?;
    let prepared = prepare(&noise, PaVariant::StandardizedB2)?;
    let edge = johnstone_edge(n, p)?;
    let perm = seeds.with_domain(domain::PERMUTATION);
    let mut statistics: Vec<f64> = (0..num_permutations as u64)
        .into_par_iter()
        .map(|r| {
            top_eigs_gram(&permute_rows(&prepared, perm, r), 1)
                .map(|s| normalize_stat(s.values()[0], &edge, n))
        })
        .collect::<Result<_>>()?;
    statistics.sort_by(f64::total_cmp);
    let rows = percentiles
        .iter()
        .map(|&q| {
            Ok(NullRow {
                percentile: q,
                empirical: quantile_sorted(&statistics, q)?,
                tw: tw1_quantile(q)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(NullTable {
        p,
        n,
        num_permutations,
        seed,
        edge,
        rows,
        statistics,
    })
}

/// `B = noise + Σ_k signal_k`, each signal a rank-1 term `s·u·vᵀ` with unit
/// `u`, `v` and operator norm `s`. Factors use disjoint random directions.
pub fn planted_factor_matrix(p: usize, n: usize, norms: &[f64], seed: u64) -> Result<DataMatrix> {
    let seeds = SeedSpec::new(seed).with_domain(domain::DATA);
    let noise = gaussian_matrix(p, n, seeds, 0)?;
    let mut values = noise.values().to_vec();
    for (f, &s) in norms.iter().enumerate() {
        let dirs = gaussian_matrix(2, p.max(n), seeds, f as u64 + 1)?;
        let unit = |row: &[f64], len: usize| {
            let v = &row[..len];
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / norm).collect::<Vec<f64>>()
        };
        let u = unit(dirs.row(0), p);
        let v = unit(dirs.row(1), n);
        for i in 0..p {
            for j in 0..n {
                values[i * n + j] += s * u[i] * v[j];
            }
        }
    }
    DataMatrix::new(p, n, values)
}
