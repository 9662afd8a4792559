//! `bmdf` — rate, outage and throughput reports for the block-Markov
//! decode-and-forward relay channel, emitted as deterministic CSV.
//!
//! All power and gain flags are in dB (x_linear = 10^(x_dB/10)); rates are
//! nats/channel-use. A fixed seed reproduces every byte of output at any
//! worker count. Exit codes: 0 success, 1 domain/validation error, 2 usage
//! error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bmdf_core::channel::{ChannelParams, CorrelationPair, PowerSplit};
use bmdf_core::montecarlo::{estimate, ORACLE_SE_MULTIPLIER};
use bmdf_core::single_layer::{
    audit_conjecture1, crossover_x0, deriv_sign_lhs, gamma0, oblivious_su_rate, p_s_star,
    q_min_single, success_prob_pair, success_prob_su, unimodality_check,
};
use bmdf_core::sweeps::{run_sweep, FigureId, SweepSpec};
use bmdf_core::two_layer::{
    average_throughput_uncorrelated, mc_decode_stats, optimize_siso_layering,
    p_layer1_miso_analytic, p_layer2_miso_analytic, q_min_layers, LayerRates,
};
use bmdf_core::{db_to_linear, Error};

/// Default seed for every stochastic command; never time-derived.
const DEFAULT_SEED: u64 = 1729;
const DEFAULT_SAMPLES: u64 = 100_000;
const DEFAULT_TOL: f64 = 1e-6;
/// Relative `--out` paths are joined onto this directory when set.
const OUT_DIR_ENV: &str = "BMDF_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "bmdf",
    version,
    about = "Block-Markov decode-and-forward relay analysis",
    after_help = "Defaults: --ps-db 10, --pr-db = --ps-db, --q-db 10, --alpha 0.8, --beta 0.8,\n\
                  --rho1 0, --rho2 0, --r1 0.5, --r2 0.3, --layers 2, --seed 1729,\n\
                  --samples 100000, --tol 1e-6. A --config file holds `key = value` lines\n\
                  (keys are the flag names without dashes, e.g. `ps-db = 12`); explicit\n\
                  flags override the file."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Source power, dB
    #[arg(long = "ps-db", global = true, allow_hyphen_values = true)]
    ps_db: Option<f64>,
    /// Relay power, dB
    #[arg(long = "pr-db", global = true, allow_hyphen_values = true)]
    pr_db: Option<f64>,
    /// Source-relay collocation gain, dB
    #[arg(long = "q-db", global = true, allow_hyphen_values = true)]
    q_db: Option<f64>,
    /// Source layer-1 power fraction
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Relay layer-1 power fraction
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Layer-1 correlation coefficient
    #[arg(long, global = true, allow_hyphen_values = true)]
    rho1: Option<f64>,
    /// Layer-2 correlation coefficient
    #[arg(long, global = true, allow_hyphen_values = true)]
    rho2: Option<f64>,
    /// Layer-1 rate, nats
    #[arg(long, global = true, allow_hyphen_values = true)]
    r1: Option<f64>,
    /// Layer-2 rate, nats
    #[arg(long, global = true, allow_hyphen_values = true)]
    r2: Option<f64>,
    /// Number of broadcast layers
    #[arg(long, global = true)]
    layers: Option<usize>,
    /// Monte Carlo seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo sample count
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Absolute quadrature tolerance
    #[arg(long, global = true, allow_hyphen_values = true)]
    tol: Option<f64>,
    /// Output path; '-' or omitted writes to stdout
    #[arg(long, global = true)]
    out: Option<String>,
    /// Config file with `key = value` defaults ('#' comments)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a figure preset (fig2..fig8)
    Figure { id: String },
    /// Custom single-layer sweep over ps_db, pr_db, q_db or rate
    Sweep {
        axis: String,
        #[arg(allow_hyphen_values = true)]
        from: f64,
        #[arg(allow_hyphen_values = true)]
        to: f64,
        points: usize,
    },
    /// Threshold quantities: constants, oblivious rate, q_min, p_s_star
    Thresholds,
    /// Numeric audits: conjecture1 | unimodality
    Audit { what: String },
    /// Analytic vs Monte Carlo agreement report
    OracleCheck,
}

enum CliError {
    Validation(String),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_) => CliError::Usage(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("bmdf: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("bmdf: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Flag values after merging the config file underneath explicit flags.
struct Opts {
    ps_db: Option<f64>,
    pr_db: Option<f64>,
    q_db: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    rho1: Option<f64>,
    rho2: Option<f64>,
    r1: Option<f64>,
    r2: Option<f64>,
    layers: Option<usize>,
    seed: u64,
    samples: u64,
    tol: f64,
    out: Option<String>,
    /// Axis-range keys (`from`, `to`, `points`) only settable via --config.
    axis_range: Vec<(String, f64)>,
}

const CONFIG_KEYS: &[&str] = &[
    "ps-db", "pr-db", "q-db", "alpha", "beta", "rho1", "rho2", "r1", "r2", "layers", "seed",
    "samples", "tol", "out", "from", "to", "points",
];

fn parse_config(path: &PathBuf) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Validation(format!(
                "config line {}: expected `key = value`, got '{raw}'",
                lineno + 1
            )));
        };
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(CliError::Validation(format!(
                "config line {}: unknown key '{key}'",
                lineno + 1
            )));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn merged<T: std::str::FromStr>(
    flag: Option<T>,
    cfg: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match cfg.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
            CliError::Validation(format!("config key '{key}': cannot parse '{raw}'"))
        }),
    }
}

fn resolve(cli: &Cli) -> Result<Opts, CliError> {
    let cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => BTreeMap::new(),
    };
    let opts = Opts {
        ps_db: merged(cli.ps_db, &cfg, "ps-db")?,
        pr_db: merged(cli.pr_db, &cfg, "pr-db")?,
        q_db: merged(cli.q_db, &cfg, "q-db")?,
        alpha: merged(cli.alpha, &cfg, "alpha")?,
        beta: merged(cli.beta, &cfg, "beta")?,
        rho1: merged(cli.rho1, &cfg, "rho1")?,
        rho2: merged(cli.rho2, &cfg, "rho2")?,
        r1: merged(cli.r1, &cfg, "r1")?,
        r2: merged(cli.r2, &cfg, "r2")?,
        layers: merged(cli.layers, &cfg, "layers")?,
        seed: merged(cli.seed, &cfg, "seed")?.unwrap_or(DEFAULT_SEED),
        samples: merged(cli.samples, &cfg, "samples")?.unwrap_or(DEFAULT_SAMPLES),
        tol: merged(cli.tol, &cfg, "tol")?.unwrap_or(DEFAULT_TOL),
        out: merged(cli.out.clone(), &cfg, "out")?,
        axis_range: ["from", "to", "points"]
            .iter()
            .filter_map(|&k| {
                merged::<f64>(None, &cfg, k)
                    .transpose()
                    .map(|v| v.map(|v| (k.to_string(), v)))
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(CliError::Validation(format!("tol must be > 0, got {}", opts.tol)));
    }
    if opts.samples < 2 {
        return Err(CliError::Validation(format!(
            "samples must be >= 2, got {}",
            opts.samples
        )));
    }
    Ok(opts)
}

impl Opts {
    fn params(&self) -> Result<ChannelParams, CliError> {
        let ps_db = self.ps_db.unwrap_or(10.0);
        let pr_db = self.pr_db.unwrap_or(ps_db);
        let q_db = self.q_db.unwrap_or(10.0);
        Ok(ChannelParams::new(db_to_linear(ps_db), db_to_linear(pr_db), db_to_linear(q_db))?)
    }

    fn split(&self) -> Result<PowerSplit, CliError> {
        Ok(PowerSplit::new(self.alpha.unwrap_or(0.8), self.beta.unwrap_or(0.8))?)
    }

    fn corr(&self) -> Result<CorrelationPair, CliError> {
        Ok(CorrelationPair::new(self.rho1.unwrap_or(0.0), self.rho2.unwrap_or(0.0))?)
    }

    fn rates(&self) -> Result<LayerRates, CliError> {
        Ok(LayerRates::new(self.r1.unwrap_or(0.5), self.r2.unwrap_or(0.3))?)
    }

    /// Figure-preset overrides from the flags that were given explicitly.
    fn overrides(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        let pairs: [(&str, Option<f64>); 10] = [
            ("ps_db", self.ps_db),
            ("pr_db", self.pr_db),
            ("q_db", self.q_db),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("r1", self.r1),
            ("r2", self.r2),
            ("layers", self.layers.map(|n| n as f64)),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        }
        for (k, v) in &self.axis_range {
            m.insert(k.clone(), *v);
        }
        m.insert("samples".to_string(), self.samples as f64);
        m.insert("tol".to_string(), self.tol);
        m
    }
}

fn emit(opts: &Opts, text: &str) -> Result<(), CliError> {
    match opts.out.as_deref() {
        None | Some("-") => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let mut p = PathBuf::from(path);
            if p.is_relative() {
                if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
                    p = PathBuf::from(dir).join(p);
                }
            }
            std::fs::write(&p, text)
                .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", p.display())))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let opts = resolve(&cli)?;
    match &cli.cmd {
        Cmd::Figure { id } => {
            let figure = FigureId::parse(id)?;
            if figure == FigureId::Custom {
                return Err(CliError::Usage("use the `sweep` command for custom sweeps".into()));
            }
            let spec = SweepSpec::preset(figure, &opts.overrides())?;
            let table = run_sweep(&spec, opts.seed)?;
            emit(&opts, &table.to_csv())
        }
        Cmd::Sweep { axis, from, to, points } => {
            let spec = SweepSpec::custom(axis, *from, *to, *points, &opts.overrides())?;
            let table = run_sweep(&spec, opts.seed)?;
            emit(&opts, &table.to_csv())
        }
        Cmd::Thresholds => thresholds(&opts),
        Cmd::Audit { what } => audit(&opts, what),
        Cmd::OracleCheck => oracle_check(&opts),
    }
}

fn thresholds(opts: &Opts) -> Result<(), CliError> {
    let mut out = String::from("quantity,value\n");
    let _ = writeln!(out, "gamma0,{}", gamma0());
    let _ = writeln!(out, "x0,{}", crossover_x0());
    if let Some(ps_db) = opts.ps_db {
        let ps = db_to_linear(ps_db);
        let _ = writeln!(out, "oblivious_rate,{}", oblivious_su_rate(ps));
        let _ = writeln!(out, "q_min_1,{}", q_min_single(ps));
        if let Some(n) = opts.layers {
            if n == 0 {
                return Err(CliError::Validation("layers must be >= 1".into()));
            }
            let lay = optimize_siso_layering(ps, n);
            let _ = writeln!(out, "q_min_{n},{}", q_min_layers(ps, &lay));
        }
    }
    if let Some(q_db) = opts.q_db {
        let _ = writeln!(out, "p_s_star,{}", p_s_star(db_to_linear(q_db))?);
    }
    emit(opts, &out)
}

fn audit(opts: &Opts, what: &str) -> Result<(), CliError> {
    let params = opts.params()?;
    match what {
        "conjecture1" => {
            let p = params.total_power();
            let s = if params.p_r > 0.0 { p * params.q / (2.0 * params.p_r) } else { f64::INFINITY };
            let hi = if s.is_finite() { s / 2.0 } else { 50.0 };
            let grid: Vec<f64> = (1..=200).map(|i| 1.0 + (hi - 1.0) * i as f64 / 200.0).collect();
            let rep = audit_conjecture1(&params, &grid);
            let mut out = String::from("check,value,pass\n");
            let _ = writeln!(out, "trivially_holds,{},", rep.trivially_holds as u8);
            let _ = writeln!(out, "s,{},", rep.s);
            let _ = writeln!(out, "derivative_at_r0,{},{}", rep.derivative_at_r0, rep.derivative_negative as u8);
            let m21 = (2.0 * params.p_s).ln_1p() * (1.0 + 2.0 * params.p_s) - 1.5 * params.p_s;
            let _ = writeln!(out, "ineq21_margin,{m21},{}", rep.ineq21_ok as u8);
            let m23 = p.ln_1p() * (1.0 + p) - deriv_sign_lhs(params.p_s, params.p_r);
            let _ = writeln!(out, "ineq23_margin,{m23},{}", rep.ineq23_ok as u8);
            if let Some(ok) = rep.ineq24_ok {
                let m24 = p - deriv_sign_lhs(params.p_s, params.p_r);
                let _ = writeln!(out, "ineq24_margin,{m24},{}", ok as u8);
            }
            if !rep.fig8.is_empty() {
                let min_margin = rep
                    .fig8
                    .iter()
                    .map(|r| r.k1 - r.alpha_k_alpha)
                    .fold(f64::INFINITY, f64::min);
                let all = rep.fig8.iter().all(|r| r.pass);
                let _ = writeln!(out, "fig8_min_margin,{min_margin},{}", all as u8);
            }
            let _ = writeln!(out, "overall,,{}", rep.pass as u8);
            eprintln!("audit conjecture1: {}", if rep.pass { "PASS" } else { "FAIL" });
            emit(opts, &out)
        }
        "unimodality" => {
            let ok = unimodality_check(&params);
            let mut out = String::from("check,value,pass\n");
            let _ = writeln!(out, "unimodal,,{}", ok as u8);
            eprintln!("audit unimodality: {}", if ok { "PASS" } else { "FAIL" });
            emit(opts, &out)
        }
        other => Err(CliError::Usage(format!(
            "unknown audit '{other}' (expected conjecture1 or unimodality)"
        ))),
    }
}

fn oracle_check(opts: &Opts) -> Result<(), CliError> {
    let params = opts.params()?;
    let split = opts.split()?;
    let corr = opts.corr()?;
    let rates = opts.rates()?;
    let (n, seed, tol) = (opts.samples, opts.seed, opts.tol);
    let mut rows: Vec<(&str, f64, f64, f64)> = Vec::new();

    let c1 = rates.r1.exp_m1();
    let (ps, pr) = (params.p_s, params.p_r);
    let est = estimate(|d| (ps * d.nu_s + pr * d.nu_r > c1) as u8 as f64, n, seed, 1.0);
    rows.push(("pair_success", success_prob_pair(rates.r1, ps, pr), est.value, est.half_width));

    let pooled = ps + pr;
    let est = estimate(|d| (pooled * d.nu_s > c1) as u8 as f64, n, seed.wrapping_add(1), 1.0);
    rows.push(("su_success", success_prob_su(rates.r1, pooled), est.value, est.half_width));

    if let Ok(p1) = p_layer1_miso_analytic(&params, &split, &corr, rates.r1, tol) {
        let s = split;
        let c = corr;
        let er1 = rates.r1.exp();
        let est = estimate(
            move |d| {
                let infos = bmdf_core::channel::two_layer_mutual_infos(&params, d, &s, &c)
                    .expect("correlation pair validated");
                (infos.i1_miso.exp() > er1) as u8 as f64
            },
            n,
            seed.wrapping_add(2),
            1.0,
        );
        rows.push(("p_layer1_miso", p1, est.value, est.half_width));
    }

    if let Ok(p2) = p_layer2_miso_analytic(&params, &split, corr.rho2, rates.r2, tol) {
        let (ap, bp) = (split.alpha_bar() * ps, split.beta_bar() * pr);
        let rho2 = corr.rho2;
        let c2 = rates.r2.exp_m1();
        let est = estimate(
            move |d| {
                let cross = 2.0 * rho2 * (ap * bp * d.nu_s * d.nu_r).sqrt() * d.phi.cos();
                (ap * d.nu_s + bp * d.nu_r + cross > c2) as u8 as f64
            },
            n,
            seed.wrapping_add(3),
            1.0,
        );
        rows.push(("p_layer2_miso", p2, est.value, est.half_width));
    }

    let quad = average_throughput_uncorrelated(&params, &split, &rates, tol);
    let mc = mc_decode_stats(&params, &split, &CorrelationPair::uncorrelated(), &rates, n, seed.wrapping_add(4))?;
    rows.push(("uncorrelated_throughput", quad.value, mc.throughput.value, mc.throughput.half_width));

    let mut out = String::from("quantity,analytic,mc,mc_se,pass\n");
    let mut all_ok = true;
    for (name, analytic, mc, se) in rows {
        let ok = (analytic - mc).abs() <= ORACLE_SE_MULTIPLIER * se;
        all_ok &= ok;
        let _ = writeln!(out, "{name},{analytic},{mc},{se},{}", ok as u8);
    }
    emit(opts, &out)?;
    if all_ok {
        Ok(())
    } else {
        Err(CliError::Validation("oracle check failed: analytic and Monte Carlo disagree".into()))
    }
}
