//! Dual-scale versus single-scale cutoffs on synthetic crystals.
//!
//! Each sweep point builds one crystal graph with `C_a = √C_e` (dual) and
//! one with `C_a = C_e` (single), records its size, and times graph
//! construction and the full featurize-and-predict path with a fixed
//! randomly initialized model. One warm-up pass precedes the timed
//! repetitions; medians and median absolute deviations are reported.

use std::path::Path;
use std::time::Instant;

use adagnn_core::synth::{generate_crystal, GeneratorSpec, LatticeKind};
use adagnn_core::{build_graph, Crystal, CutoffConfig, ModelConfig, ModelState};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchScenario {
    pub lattice: LatticeKind,
    /// Cell edge in Å.
    pub lattice_constant: f64,
    /// Atoms per cell; one set of crystals per entry.
    pub num_atoms: Vec<usize>,
    pub crystals_per_size: usize,
    pub jitter: f64,
    pub min_separation: f64,
    pub species: Vec<u8>,
    /// Edge cutoffs in Å; each yields one dual and one single-scale point.
    pub edge_cutoffs: Vec<f64>,
    pub repetitions: usize,
    pub seed: u64,
    pub hidden_dim: usize,
    pub num_blocks: usize,
}

impl Default for BenchScenario {
    fn default() -> Self {
        let generator = GeneratorSpec::default();
        Self {
            lattice: LatticeKind::Cubic,
            lattice_constant: 3.5,
            num_atoms: vec![2, 4, 8],
            crystals_per_size: 1,
            jitter: generator.jitter,
            min_separation: generator.min_separation,
            species: generator.species,
            edge_cutoffs: vec![5.0, 6.0, 7.0, 8.0],
            repetitions: 5,
            seed: 0,
            hidden_dim: 32,
            num_blocks: 2,
        }
    }
}

impl BenchScenario {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scenario: Self =
            serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Usage(format!("bench scenario: {m}")));
        if self.num_atoms.is_empty() || self.num_atoms.contains(&0) {
            return bad("num_atoms must be a non-empty list of values ≥ 1");
        }
        if self.repetitions < 3 {
            return bad("repetitions must be ≥ 3");
        }
        if self.crystals_per_size == 0 {
            return bad("crystals_per_size must be ≥ 1");
        }
        if self.edge_cutoffs.is_empty() || self.edge_cutoffs.iter().any(|&c| !(c.is_finite() && c >= 1.0)) {
            return bad("edge_cutoffs must be a non-empty list of values ≥ 1 Å");
        }
        self.generator(1).validate()?;
        self.model(CutoffConfig::single_scale(self.edge_cutoffs[0])?).validate()?;
        Ok(())
    }

    fn generator(&self, num_atoms: usize) -> GeneratorSpec {
        GeneratorSpec {
            lattice: self.lattice,
            num_atoms,
            lattice_constant: self.lattice_constant,
            jitter: self.jitter,
            min_separation: self.min_separation,
            species: self.species.clone(),
            ..GeneratorSpec::default()
        }
    }

    fn model(&self, cutoffs: CutoffConfig) -> ModelConfig {
        ModelConfig {
            hidden_dim: self.hidden_dim,
            num_blocks: self.num_blocks,
            seed: self.seed,
            ..ModelConfig::default()
        }
        .with_cutoffs(cutoffs)
    }

    /// The crystals of the sweep, as `(num_atoms, index, crystal)`.
    pub fn crystals(&self) -> Result<Vec<(usize, usize, Crystal)>> {
        let mut out = Vec::new();
        for &n in &self.num_atoms {
            for k in 0..self.crystals_per_size {
                let seed = self.seed.wrapping_mul(1_000_003).wrapping_add((n * 1000 + k) as u64);
                out.push((n, k, generate_crystal(&self.generator(n), seed)?));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Dual,
    Single,
}

impl Strategy {
    pub fn cutoffs(self, edge_cutoff: f64) -> Result<CutoffConfig> {
        Ok(match self {
            Strategy::Dual => CutoffConfig::paper_mode(edge_cutoff)?,
            Strategy::Single => CutoffConfig::single_scale(edge_cutoff)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub strategy: Strategy,
    pub num_atoms: usize,
    pub crystal: usize,
    pub edge_cutoff: f64,
    pub angle_cutoff: f64,
    pub num_edges: usize,
    pub num_angles: usize,
    pub m_avg: f64,
    pub k_avg: f64,
    pub repetitions: usize,
    pub build_ms_median: f64,
    pub build_ms_mad: f64,
    pub inference_ms_median: f64,
    pub inference_ms_mad: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// (median, median absolute deviation)
fn robust_spread(mut values: Vec<f64>) -> (f64, f64) {
    let m = median(&mut values);
    let mut dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    (m, median(&mut dev))
}

fn time_ms<T>(f: impl FnOnce() -> Result<T>) -> Result<(f64, T)> {
    let start = Instant::now();
    let out = f()?;
    Ok((start.elapsed().as_secs_f64() * 1e3, out))
}

pub fn measure(
    crystal: &Crystal,
    strategy: Strategy,
    edge_cutoff: f64,
    scenario: &BenchScenario,
    (num_atoms, index): (usize, usize),
) -> Result<BenchRecord> {
    let cutoffs = strategy.cutoffs(edge_cutoff)?;
    let model = ModelState::new(scenario.model(cutoffs))?;
    let stats = build_graph(crystal, &cutoffs)?.stats();
    let run_build = || Ok(build_graph(crystal, &cutoffs)?);
    let run_inference = || Ok(model.predict(crystal)?);

    run_build()?;
    run_inference()?;
    let mut build = Vec::with_capacity(scenario.repetitions);
    let mut inference = Vec::with_capacity(scenario.repetitions);
    for _ in 0..scenario.repetitions {
        build.push(time_ms(run_build)?.0);
        inference.push(time_ms(run_inference)?.0);
    }
    let (build_ms_median, build_ms_mad) = robust_spread(build);
    let (inference_ms_median, inference_ms_mad) = robust_spread(inference);
    Ok(BenchRecord {
        strategy,
        num_atoms,
        crystal: index,
        edge_cutoff,
        angle_cutoff: cutoffs.angle_cutoff,
        num_edges: stats.num_edges,
        num_angles: stats.num_angles,
        m_avg: stats.m_avg,
        k_avg: stats.k_avg,
        repetitions: scenario.repetitions,
        build_ms_median,
        build_ms_mad,
        inference_ms_median,
        inference_ms_mad,
    })
}

/// Every (crystal, edge cutoff, strategy) point, measured sequentially.
pub fn run_sweep(scenario: &BenchScenario) -> Result<Vec<BenchRecord>> {
    scenario.validate()?;
    let mut records = Vec::new();
    for (n, k, crystal) in scenario.crystals()? {
        for &ce in &scenario.edge_cutoffs {
            for strategy in [Strategy::Dual, Strategy::Single] {
                let record = measure(&crystal, strategy, ce, scenario, (n, k))?;
                log::debug!(
                    "N={n} crystal={k} C_e={ce} {strategy:?}: {} angles, {:.3} ms",
                    record.num_angles,
                    record.inference_ms_median
                );
                records.push(record);
            }
        }
    }
    Ok(records)
}

/// Least-squares slope of `y` on `x`; `None` without two distinct `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 1e-12).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthExponent {
    /// `(num_atoms, slope)` of `ln num_angles` against `ln M_avg`.
    pub per_size: Vec<(usize, f64)>,
    pub mean: Option<f64>,
}

fn growth_exponent(records: &[BenchRecord], strategy: Strategy) -> GrowthExponent {
    let mut sizes: Vec<usize> = records.iter().map(|r| r.num_atoms).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let per_size: Vec<(usize, f64)> = sizes
        .into_iter()
        .filter_map(|n| {
            let points: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.strategy == strategy && r.num_atoms == n && r.num_angles > 0 && r.m_avg > 0.0)
                .map(|r| (r.m_avg.ln(), (r.num_angles as f64).ln()))
                .collect();
            fit_slope(&points).map(|s| (n, s))
        })
        .collect();
    let mean = (!per_size.is_empty()).then(|| per_size.iter().map(|p| p.1).sum::<f64>() / per_size.len() as f64);
    GrowthExponent { per_size, mean }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTotals {
    pub num_angles: usize,
    pub num_edges: usize,
    /// Median over crystals of the per-crystal median inference time.
    pub inference_ms_median: f64,
    pub build_ms_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub num_records: usize,
    /// Largest swept edge cutoff; the totals below are taken there.
    pub edge_cutoff: f64,
    pub dual: StrategyTotals,
    pub single: StrategyTotals,
    /// Single-scale over dual-scale angle count; `None` when dual has no angles.
    pub angle_ratio: Option<f64>,
    pub dual_exponent: GrowthExponent,
    pub single_exponent: GrowthExponent,
    /// Single-scale mean exponent minus dual-scale mean exponent.
    pub exponent_gap: Option<f64>,
}

fn totals(records: &[&BenchRecord]) -> StrategyTotals {
    StrategyTotals {
        num_angles: records.iter().map(|r| r.num_angles).sum(),
        num_edges: records.iter().map(|r| r.num_edges).sum(),
        inference_ms_median: median(&mut records.iter().map(|r| r.inference_ms_median).collect::<Vec<_>>()),
        build_ms_median: median(&mut records.iter().map(|r| r.build_ms_median).collect::<Vec<_>>()),
    }
}

pub fn summarize(records: &[BenchRecord]) -> Result<BenchSummary> {
    if records.is_empty() {
        return Err(Error::Usage("no bench records to summarize".into()));
    }
    let edge_cutoff = records.iter().map(|r| r.edge_cutoff).fold(f64::NEG_INFINITY, f64::max);
    let at_max = |s: Strategy| -> Vec<&BenchRecord> {
        records.iter().filter(|r| r.strategy == s && r.edge_cutoff == edge_cutoff).collect()
    };
    let (dual, single) = (at_max(Strategy::Dual), at_max(Strategy::Single));
    if dual.is_empty() || single.is_empty() {
        return Err(Error::Usage("bench records need both strategies at the largest cutoff".into()));
    }
    let (dual, single) = (totals(&dual), totals(&single));
    let angle_ratio = (dual.num_angles > 0).then(|| single.num_angles as f64 / dual.num_angles as f64);
    let dual_exponent = growth_exponent(records, Strategy::Dual);
    let single_exponent = growth_exponent(records, Strategy::Single);
    let exponent_gap = single_exponent.mean.zip(dual_exponent.mean).map(|(s, d)| s - d);
    Ok(BenchSummary {
        num_records: records.len(),
        edge_cutoff,
        dual,
        single,
        angle_ratio,
        dual_exponent,
        single_exponent,
        exponent_gap,
    })
}

/// Writes `records.csv` and `summary.json` into `dir`.
pub fn emit_report(records: &[BenchRecord], dir: &Path) -> Result<BenchSummary> {
    let summary = summarize(records)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let csv_bytes = w.into_inner().expect("in-memory writer");
    crate::write_atomic(&dir.join("records.csv"), &csv_bytes)?;
    crate::write_atomic(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(summary)
}
