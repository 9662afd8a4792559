//! Named report sweeps and their tabular output.
//!
//! Each preset maps one report onto a parameter grid and a fixed column
//! contract. Rows are independent and may be computed in parallel; output
//! ordering follows the grid, and a fixed seed reproduces every cell
//! byte-for-byte. Axis ranges for the power sweeps are reconstructions:
//! the defaults below are documented here and overridable per run.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::channel::{ChannelParams, CorrelationPair, PowerSplit};
use crate::error::{Error, Result};
use crate::optim::bisect;
use crate::single_layer::{self, gamma0, k_alpha, throughput, ThroughputMode};
use crate::two_layer::{
    average_throughput_mc, layer1_relay_decodable, oblivious_two_layer_throughput,
    optimize_siso_layering, q_min_layers, LayerRates,
};
use crate::db_to_linear;

// ---------------------------------------------------------------------------
// Table + CSV
// ---------------------------------------------------------------------------

/// A rectangular numeric result: one header row, one f64 per cell. The CSV
/// form uses shortest round-trip decimal formatting, so write(parse(x)) is
/// lossless.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Table> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidSpec("empty CSV".into()))?;
        let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|c| c.parse::<f64>()).collect();
            let row = row.map_err(|e| {
                Error::InvalidSpec(format!("bad numeric cell on data row {}: {e}", i + 1))
            })?;
            if row.len() != columns.len() {
                return Err(Error::InvalidSpec(format!(
                    "row {} has {} cells, header has {}",
                    i + 1,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }
}

// ---------------------------------------------------------------------------
// Sweep specification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Custom,
}

impl FigureId {
    pub fn parse(name: &str) -> Result<FigureId> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "fig2" => FigureId::Fig2,
            "fig3" => FigureId::Fig3,
            "fig4" => FigureId::Fig4,
            "fig5" => FigureId::Fig5,
            "fig6" => FigureId::Fig6,
            "fig7" => FigureId::Fig7,
            "fig8" => FigureId::Fig8,
            "custom" => FigureId::Custom,
            other => return Err(Error::InvalidSpec(format!("unknown figure id '{other}'"))),
        })
    }
}

/// Sweep axis: a named parameter and its strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub figure: FigureId,
    pub axis: Axis,
    pub fixed: BTreeMap<String, f64>,
    pub columns: Vec<String>,
}

const KNOWN_KEYS: &[&str] = &[
    "ps_db", "pr_db", "q_db", "alpha", "beta", "rho1", "rho2", "r1", "r2", "layers", "samples",
    "tol", "budget", "from", "to", "points",
];

fn get(fixed: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    fixed.get(key).copied().unwrap_or(default)
}

fn lin_grid(from: f64, to: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![from];
    }
    (0..points)
        .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
        .collect()
}

impl SweepSpec {
    /// Build a figure preset, applying caller overrides on top of the
    /// documented defaults. `from`/`to`/`points` override the axis range.
    pub fn preset(figure: FigureId, overrides: &BTreeMap<String, f64>) -> Result<SweepSpec> {
        for key in overrides.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::InvalidSpec(format!("unknown parameter '{key}'")));
            }
        }
        let mut fixed = overrides.clone();
        let spec = match figure {
            FigureId::Fig2 => {
                fixed.entry("ps_db".into()).or_insert(8.0);
                fixed.entry("pr_db".into()).or_insert(8.0);
                fixed.entry("q_db".into()).or_insert(10.0);
                let p = db_to_linear(fixed["ps_db"]) + db_to_linear(fixed["pr_db"]);
                let r0 = (gamma0() * p).ln_1p();
                let from = get(&fixed, "from", (r0 - 0.1).max(1e-3));
                let to = get(&fixed, "to", r0 + 0.4);
                let points = get(&fixed, "points", ((to - from) / 1e-3).round() + 1.0) as usize;
                SweepSpec {
                    figure,
                    axis: Axis { name: "rate".into(), grid: lin_grid(from, to, points) },
                    fixed,
                    columns: vec![
                        "rate".into(),
                        "tp_rho_zero".into(),
                        "tp_rho_max".into(),
                        "rho_max_preferred".into(),
                    ],
                }
            }
            FigureId::Fig3 | FigureId::Fig5 | FigureId::Fig6 => {
                fixed.entry("q_db".into()).or_insert(10.0);
                if figure == FigureId::Fig6 {
                    fixed.entry("pr_db".into()).or_insert(10.0);
                }
                let from = get(&fixed, "from", 0.0);
                let to = get(&fixed, "to", 30.0);
                let default_points = if figure == FigureId::Fig3 { 31.0 } else { 11.0 };
                let points = get(&fixed, "points", default_points) as usize;
                SweepSpec {
                    figure,
                    axis: Axis { name: "ps_db".into(), grid: lin_grid(from, to, points) },
                    fixed,
                    columns: vec![
                        "ps_db".into(),
                        "direct_throughput".into(),
                        "bm_throughput".into(),
                        "gain_db".into(),
                    ],
                }
            }
            FigureId::Fig4 => {
                let from = get(&fixed, "from", 0.0);
                let to = get(&fixed, "to", 40.0);
                let points = get(&fixed, "points", 41.0) as usize;
                SweepSpec {
                    figure,
                    axis: Axis { name: "ps_db".into(), grid: lin_grid(from, to, points) },
                    fixed,
                    columns: vec!["ps_db".into(), "n_layers".into(), "q_min".into()],
                }
            }
            FigureId::Fig7 => {
                fixed.entry("ps_db".into()).or_insert(22.0);
                fixed.entry("pr_db".into()).or_insert(30.0);
                fixed.entry("q_db".into()).or_insert(40.0);
                fixed.entry("samples".into()).or_insert(1e5);
                let points = get(&fixed, "points", 41.0) as usize;
                SweepSpec {
                    figure,
                    axis: Axis { name: "rho".into(), grid: lin_grid(0.0, 1.0, points) },
                    fixed,
                    columns: vec![
                        "rho1".into(),
                        "rho2".into(),
                        "throughput".into(),
                        "feasible_flag".into(),
                    ],
                }
            }
            FigureId::Fig8 => {
                fixed.entry("q_db".into()).or_insert(20.0);
                let s = db_to_linear(fixed["q_db"]);
                let from = get(&fixed, "from", 1.0 + 1e-3);
                let to = get(&fixed, "to", s / 2.0);
                let points = get(&fixed, "points", 200.0) as usize;
                SweepSpec {
                    figure,
                    axis: Axis { name: "alpha".into(), grid: lin_grid(from, to, points) },
                    fixed,
                    columns: vec!["alpha".into(), "k1".into(), "alpha_k_alpha".into()],
                }
            }
            FigureId::Custom => {
                return Err(Error::InvalidSpec(
                    "custom sweeps are built with SweepSpec::custom".into(),
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Custom single-layer sweep over one of ps_db, pr_db, q_db, rate.
    pub fn custom(
        axis_name: &str,
        from: f64,
        to: f64,
        points: usize,
        fixed: &BTreeMap<String, f64>,
    ) -> Result<SweepSpec> {
        for key in fixed.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::InvalidSpec(format!("unknown parameter '{key}'")));
            }
        }
        let columns = match axis_name {
            "rate" => vec!["rate".into(), "tp_rho_zero".into(), "tp_rho_max".into()],
            "ps_db" | "pr_db" | "q_db" => vec![
                axis_name.into(),
                "opt_rate_rho_zero".into(),
                "opt_tp_rho_zero".into(),
                "opt_tp_rho_max".into(),
            ],
            other => {
                return Err(Error::InvalidSpec(format!("unknown sweep axis '{other}'")));
            }
        };
        let spec = SweepSpec {
            figure: FigureId::Custom,
            axis: Axis { name: axis_name.into(), grid: lin_grid(from, to, points) },
            fixed: fixed.clone(),
            columns,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.axis.grid.is_empty() {
            return Err(Error::InvalidSpec("axis grid is empty".into()));
        }
        if self.axis.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec("axis grid must be strictly increasing".into()));
        }
        Ok(())
    }

    fn params(&self) -> Result<ChannelParams> {
        let ps = db_to_linear(get(&self.fixed, "ps_db", 10.0));
        let pr = db_to_linear(get(&self.fixed, "pr_db", get(&self.fixed, "ps_db", 10.0)));
        let q = db_to_linear(get(&self.fixed, "q_db", 10.0));
        ChannelParams::new(ps, pr, q)
    }
}

// ---------------------------------------------------------------------------
// Sweep execution
// ---------------------------------------------------------------------------

/// Run a sweep; deterministic for a given (spec, seed) at any worker count.
pub fn run_sweep(spec: &SweepSpec, seed: u64) -> Result<Table> {
    spec.validate()?;
    let mut table = Table { columns: spec.columns.clone(), rows: Vec::new() };
    match spec.figure {
        FigureId::Fig2 => {
            let params = spec.params()?;
            for &rate in &spec.axis.grid {
                let tp0 = throughput(rate, &params, ThroughputMode::RhoZero)?;
                let tpm = throughput(rate, &params, ThroughputMode::RhoMax).unwrap_or(0.0);
                table.rows.push(vec![rate, tp0, tpm, (tpm > tp0) as u8 as f64]);
            }
        }
        FigureId::Fig3 => {
            let q = db_to_linear(get(&spec.fixed, "q_db", 10.0));
            let rows: Vec<Vec<f64>> = spec
                .axis
                .grid
                .par_iter()
                .map(|&ps_db| {
                    let ps = db_to_linear(ps_db);
                    let direct = single_layer::su_opt_throughput(ps);
                    let params = ChannelParams::new(ps, ps, q).expect("positive powers");
                    let bm = single_layer::oblivious_bm_throughput(&params);
                    let gain = invert_direct_gain_db(ps_db, bm, single_layer::su_opt_throughput);
                    vec![ps_db, direct, bm, gain]
                })
                .collect();
            table.rows = rows;
        }
        FigureId::Fig4 => {
            let layer_set: Vec<usize> = match spec.fixed.get("layers") {
                Some(&n) => vec![n as usize],
                None => vec![1, 2, 4, 8],
            };
            for &n in &layer_set {
                let rows: Vec<Vec<f64>> = spec
                    .axis
                    .grid
                    .par_iter()
                    .map(|&ps_db| {
                        let ps = db_to_linear(ps_db);
                        let lay = optimize_siso_layering(ps, n);
                        vec![ps_db, n as f64, q_min_layers(ps, &lay)]
                    })
                    .collect();
                table.rows.extend(rows);
            }
        }
        FigureId::Fig5 | FigureId::Fig6 => {
            let q = db_to_linear(get(&spec.fixed, "q_db", 10.0));
            let tol = get(&spec.fixed, "tol", 1e-6);
            let pr_fixed = spec.fixed.get("pr_db").map(|&db| db_to_linear(db));
            let rows: Vec<Vec<f64>> = spec
                .axis
                .grid
                .par_iter()
                .map(|&ps_db| {
                    let ps = db_to_linear(ps_db);
                    let pr = if spec.figure == FigureId::Fig6 {
                        pr_fixed.unwrap_or_else(|| db_to_linear(10.0))
                    } else {
                        ps
                    };
                    let params = ChannelParams::new(ps, pr, q).expect("positive powers");
                    let direct = single_layer::su_opt_throughput(ps);
                    let (_, _, bm) = oblivious_two_layer_throughput(&params, tol);
                    let gain = invert_direct_gain_db(ps_db, bm, single_layer::su_opt_throughput);
                    vec![ps_db, direct, bm, gain]
                })
                .collect();
            table.rows = rows;
        }
        FigureId::Fig7 => {
            let params = spec.params()?;
            let samples = get(&spec.fixed, "samples", 1e5) as u64;
            // Oblivious attempted rates: the 2-layer source-only optimum,
            // with equal antenna power split across source and relay.
            let lay = optimize_siso_layering(params.p_s, 2);
            let alpha = lay.fractions[0].clamp(0.0, 1.0);
            let split = PowerSplit::new(alpha, alpha)?;
            let rates = LayerRates::new(lay.rates[0], lay.rates[1])?;
            let grid = &spec.axis.grid;
            let cells: Vec<(f64, f64)> = grid
                .iter()
                .flat_map(|&r1| grid.iter().map(move |&r2| (r1, r2)))
                .collect();
            let rows: Vec<Vec<f64>> = cells
                .par_iter()
                .map(|&(rho1, rho2)| {
                    let corr = CorrelationPair { rho1, rho2 };
                    // Same seed in every cell: common random numbers.
                    let tp = average_throughput_mc(&params, &split, &corr, &rates, samples, seed);
                    let feasible = layer1_relay_decodable(&params, &split, &corr, rates.r1)
                        .unwrap_or(false);
                    vec![rho1, rho2, tp.value, feasible as u8 as f64]
                })
                .collect();
            table.rows = rows;
        }
        FigureId::Fig8 => {
            let s = db_to_linear(get(&spec.fixed, "q_db", 20.0));
            let k1 = k_alpha(1.0, s);
            for &alpha in &spec.axis.grid {
                if alpha <= 1.0 || alpha > s / 2.0 {
                    continue;
                }
                table.rows.push(vec![alpha, k1, alpha * k_alpha(alpha, s)]);
            }
        }
        FigureId::Custom => {
            let params = spec.params()?;
            if spec.axis.name == "rate" {
                for &rate in &spec.axis.grid {
                    let tp0 = throughput(rate, &params, ThroughputMode::RhoZero)?;
                    let tpm = throughput(rate, &params, ThroughputMode::RhoMax).unwrap_or(0.0);
                    table.rows.push(vec![rate, tp0, tpm]);
                }
            } else {
                let rows: Vec<Vec<f64>> = spec
                    .axis
                    .grid
                    .par_iter()
                    .map(|&v| {
                        let lin = db_to_linear(v);
                        let p = match spec.axis.name.as_str() {
                            "ps_db" => ChannelParams::new(lin, params.p_r, params.q),
                            "pr_db" => ChannelParams::new(params.p_s, lin, params.q),
                            _ => ChannelParams::new(params.p_s, params.p_r, lin),
                        }
                        .expect("grid values stay positive in linear scale");
                        let (r0, v0) = single_layer::maximize_throughput(&p, ThroughputMode::RhoZero);
                        let (_, vm) = single_layer::maximize_throughput(&p, ThroughputMode::RhoMax);
                        vec![v, r0, v0, vm]
                    })
                    .collect();
                table.rows = rows;
            }
        }
    }
    Ok(table)
}

/// Horizontal dB gap at `bm_value` between a direct-transmission curve
/// (evaluable at any power) and the BM curve point at `ps_db`.
fn invert_direct_gain_db(ps_db: f64, bm_value: f64, direct: impl Fn(f64) -> f64) -> f64 {
    let f = |db: f64| direct(db_to_linear(db)) - bm_value;
    let (mut lo, mut hi) = (ps_db - 1.0, ps_db + 1.0);
    while f(lo) > 0.0 && lo > ps_db - 60.0 {
        lo -= 5.0;
    }
    while f(hi) < 0.0 && hi < ps_db + 60.0 {
        hi += 5.0;
    }
    let direct_db = bisect(f, lo, hi, 1e-9);
    direct_db - ps_db
}

/// First attempted rate at which the maximally correlated scheme beats the
/// uncorrelated one, minus the lower uncertainty-region edge log(1+gamma0 P).
/// Scans upward in 1e-3 nat steps.
pub fn fig2_uncertainty_gap(params: &ChannelParams) -> Option<f64> {
    let p = params.total_power();
    let r0 = (gamma0() * p).ln_1p();
    let mut rate = (r0 - 0.1).max(1e-3);
    while rate <= r0 + 0.5 {
        let tp0 = throughput(rate, params, ThroughputMode::RhoZero).ok()?;
        let tpm = throughput(rate, params, ThroughputMode::RhoMax).unwrap_or(0.0);
        if tpm > tp0 {
            return Some(rate - r0);
        }
        rate += 1e-3;
    }
    None
}

/// Horizontal (power-axis) gap in dB between the BM and direct columns of a
/// sweep table at a given throughput, by monotone linear interpolation.
pub fn gain_over_direct(table: &Table, at_throughput: f64) -> Result<f64> {
    let ps = table
        .column("ps_db")
        .ok_or_else(|| Error::InvalidSpec("table lacks ps_db column".into()))?;
    let direct = table
        .column("direct_throughput")
        .ok_or_else(|| Error::InvalidSpec("table lacks direct_throughput column".into()))?;
    let bm = table
        .column("bm_throughput")
        .ok_or_else(|| Error::InvalidSpec("table lacks bm_throughput column".into()))?;
    let ps_direct = inverse_interp(&direct, &ps, at_throughput)?;
    let ps_bm = inverse_interp(&bm, &ps, at_throughput)?;
    Ok(ps_direct - ps_bm)
}

fn inverse_interp(curve: &[f64], axis: &[f64], target: f64) -> Result<f64> {
    for w in curve.windows(2).zip(axis.windows(2)) {
        let ((y0, y1), (x0, x1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
        if (y0 <= target && target <= y1) || (y1 <= target && target <= y0) {
            if (y1 - y0).abs() < 1e-300 {
                return Ok(x0);
            }
            return Ok(x0 + (target - y0) / (y1 - y0) * (x1 - x0));
        }
    }
    Err(Error::OutOfRange(format!("throughput {target} outside the tabulated curve")))
}
