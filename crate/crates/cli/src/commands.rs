use std::path::{Path, PathBuf};

use photoent::oracle::{count_histogram_montecarlo, quadrature_conditional, McHistogram, Tolerances};
use photoent::photocount::{
    count_distribution, count_mixture, count_probability, entanglement_scan, fit_chi_over_gamma, most_probable_time,
    KernelMode,
};
use photoent::probe::{
    analytic_moments, classify_special_state, empirical_moments, probe_report, ClassificationReport, CountRecord,
    FactorialConvention, MomentPathway, ProbeMoments, ProbeOptions, ProbeReport,
};
use photoent::projective::pm_mixture;
use photoent::mixture::TAIL_TOL;
use photoent::{ModelParams, TwoModeState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, OracleMethod, ProbeSpec};
use crate::output::{num, sha256_hex, CsvTable, Sink};
use crate::{Cli, CliError, Command};

/// Largest total photon number the oracle commands accept.
const ORACLE_MAX_N: usize = 6;
const QUADRATURE_TOL: f64 = 1e-6;
const MC_SIGMAS: f64 = 3.0;

struct Context<'a> {
    cli: &'a Cli,
    cfg: ExperimentConfig,
    config_dir: PathBuf,
}

#[derive(Serialize)]
struct HashInput<'a> {
    command: Command,
    config: &'a ExperimentConfig,
    seed: Option<u64>,
    analytic: bool,
    compat_asymptotic: bool,
    extra: &'a [String],
}

impl Context<'_> {
    fn seed(&self) -> Option<u64> {
        self.cli.seed.or(self.cfg.seed)
    }

    /// Output sink stamped with a hash of the effective configuration and
    /// of any extra inputs.
    fn sink(&self, extra: &[String]) -> Result<Sink, CliError> {
        let input = HashInput {
            command: self.cli.command,
            config: &self.cfg,
            seed: self.seed(),
            analytic: self.cli.analytic,
            compat_asymptotic: self.cli.compat_asymptotic,
            extra,
        };
        let bytes = serde_json::to_vec(&input).map_err(|e| CliError::Input(e.to_string()))?;
        Sink::new(&self.cli.out, sha256_hex(&bytes))
    }

    /// Model rates, with `chi` refitted when the config asks for a peak time.
    fn params(&self, state: &TwoModeState) -> Result<ModelParams, CliError> {
        let p = self.cfg.model_params()?;
        match &self.cfg.fit {
            None => Ok(p),
            Some(fit) => {
                let cg = fit_chi_over_gamma(state, fit.k, fit.gamma_t)?;
                log::info!("fitted chi/gamma = {cg} from k = {} peaking at gamma t = {}", fit.k, fit.gamma_t);
                Ok(ModelParams::new(p.lambda, cg * p.gamma, p.gamma)?)
            }
        }
    }
}

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Input("--config <path> is required".into()))?;
    let cfg = ExperimentConfig::load(path)?;
    let config_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let ctx = Context { cli, cfg, config_dir };
    match cli.command {
        Command::PmDist => pm_dist(&ctx),
        Command::CountDist => count_dist(&ctx),
        Command::Scan => scan(&ctx),
        Command::OracleCheck => oracle_check(&ctx),
        Command::Probe => probe(&ctx),
        Command::Sample => sample(&ctx),
    }
}

fn pm_dist(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let state = ctx.cfg.build_state()?;
    let params = ctx.cfg.model_params()?;
    let grid = ctx.cfg.gamma_t_grid()?;
    let mixtures = grid
        .iter()
        .map(|g| pm_mixture(&state, params.chi, g / params.gamma))
        .collect::<Result<Vec<_>, _>>()?;
    let k_max = mixtures.iter().map(|m| m.cutoff(TAIL_TOL)).max().unwrap_or(0);
    let mut table = CsvTable::new(&["gamma_t", "k", "probability", "row_checksum"]);
    for (g, mix) in grid.iter().zip(&mixtures) {
        let row: Vec<f64> = (0..=k_max).map(|k| mix.pmf(k)).collect();
        let sum: f64 = row.iter().sum();
        for (k, p) in row.iter().enumerate() {
            table.row(&[num(*g), k.to_string(), num(*p), num(sum)]);
        }
    }
    Ok(vec![ctx.sink(&[])?.csv("pm_dist.csv", table)?])
}

#[derive(Serialize)]
struct PeakTable {
    chi_over_gamma: f64,
    fitted: bool,
    peaks: Vec<Peak>,
}

#[derive(Serialize)]
struct Peak {
    k: u32,
    gamma_t_m: f64,
}

fn count_dist(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let state = ctx.cfg.build_state()?;
    let params = ctx.params(&state)?;
    let grid = ctx.cfg.gamma_t_grid()?;
    let times: Vec<f64> = grid.iter().map(|g| g / params.gamma).collect();
    let dist = count_distribution(&state, &params, &times)?;
    let mut table = CsvTable::new(&["gamma_t", "k", "probability"]);
    for (g, row) in grid.iter().zip(&dist.values) {
        for (k, p) in dist.k_range.iter().zip(row) {
            table.row(&[num(*g), k.to_string(), num(*p)]);
        }
    }
    let peaks = ctx
        .cfg
        .k_list(|| (0..=10).collect())
        .into_iter()
        .map(|k| Ok(Peak { k, gamma_t_m: params.gamma * most_probable_time(&state, &params, k)? }))
        .collect::<Result<Vec<_>, CliError>>()?;
    let sink = ctx.sink(&[])?;
    let sidecar = PeakTable { chi_over_gamma: params.chi_over_gamma(), fitted: ctx.cfg.fit.is_some(), peaks };
    Ok(vec![sink.csv("count_dist.csv", table)?, sink.json("count_dist_tm.json", &sidecar)?])
}

fn scan(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let state = ctx.cfg.build_state()?;
    let params = ctx.params(&state)?;
    let rows = entanglement_scan(&state, &params, &ctx.cfg.k_list(|| (0..=10).collect()))?;
    let mut table = CsvTable::new(&["k", "gamma_t_m", "i_short", "i_tm", "s_ab_tm"]);
    for r in rows {
        table.row(&[r.k.to_string(), num(r.gamma_t_m), num(r.i_short), num(r.i_tm), num(r.s_ab_tm)]);
    }
    Ok(vec![ctx.sink(&[])?.csv("scan.csv", table)?])
}

#[derive(Serialize)]
struct OracleEntry {
    k: u32,
    gamma_t: f64,
    method: OracleMethod,
    closed_form: f64,
    oracle: f64,
    delta: f64,
    /// Quadrature error estimate or Monte Carlo standard error.
    error: f64,
    threshold: f64,
    pass: bool,
    /// Normalized oracle density of A and B, row-major `[re, im]` pairs in
    /// `(m, n)`-lexicographic order (quadrature only).
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_density: Option<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct OracleReport {
    pass: bool,
    max_delta: f64,
    seed: u64,
    mc_samples: usize,
    entries: Vec<OracleEntry>,
}

fn oracle_check(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let state = ctx.cfg.build_state()?;
    let params = ctx.cfg.model_params()?;
    let spec = ctx.cfg.oracle.as_ref().ok_or_else(|| CliError::Input("oracle-check needs an \"oracle\" section".into()))?;
    if state.max_total() > ORACLE_MAX_N {
        return Err(CliError::Input(format!(
            "oracle checks are limited to N <= {ORACLE_MAX_N}; state reaches N = {}",
            state.max_total()
        )));
    }
    let seed = ctx.seed().unwrap_or(0);
    let mc_default = Tolerances::monte_carlo();
    let tol = Tolerances { rtol: spec.rtol.unwrap_or(mc_default.rtol), atol: spec.atol.unwrap_or(mc_default.atol) };
    let mut histograms: Vec<(f64, McHistogram)> = Vec::new();
    let mut entries = Vec::new();
    for check in &spec.checks {
        let t = check.gamma_t / params.gamma;
        let closed_form = count_probability(&state, &params, t, check.k)?;
        let entry = match check.method {
            OracleMethod::Quadrature => {
                let q = quadrature_conditional(&state, &params, t, check.k)?;
                let delta = (q.probability - closed_form).abs();
                let density = (q.probability > 0.0).then(|| {
                    let rho = q.numerator.unscale(q.probability);
                    let d = rho.nrows();
                    (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| [rho[(i, j)].re, rho[(i, j)].im]).collect()
                });
                OracleEntry {
                    k: check.k,
                    gamma_t: check.gamma_t,
                    method: check.method,
                    closed_form,
                    oracle: q.probability,
                    delta,
                    error: q.error_estimate,
                    threshold: QUADRATURE_TOL,
                    pass: delta < QUADRATURE_TOL,
                    oracle_density: density,
                }
            }
            OracleMethod::MonteCarlo => {
                let pos = histograms.iter().position(|(g, _)| *g == check.gamma_t);
                let idx = match pos {
                    Some(i) => i,
                    None => {
                        let h = count_histogram_montecarlo(&state, &params, t, spec.mc_samples, seed, tol)?;
                        histograms.push((check.gamma_t, h));
                        histograms.len() - 1
                    }
                };
                let est = histograms[idx].1.estimate(check.k);
                let delta = (est.estimate - closed_form).abs();
                let sigma = est.zero_hit_bound.unwrap_or(est.std_error);
                let threshold = MC_SIGMAS * sigma;
                OracleEntry {
                    k: check.k,
                    gamma_t: check.gamma_t,
                    method: check.method,
                    closed_form,
                    oracle: est.estimate,
                    delta,
                    error: est.std_error,
                    threshold,
                    pass: delta <= threshold,
                    oracle_density: None,
                }
            }
        };
        if !entry.pass {
            log::warn!("oracle check k = {} at gamma t = {} failed: delta {:e}", entry.k, entry.gamma_t, entry.delta);
        }
        entries.push(entry);
    }
    let report = OracleReport {
        pass: entries.iter().all(|e| e.pass),
        max_delta: entries.iter().map(|e| e.delta).fold(0.0, f64::max),
        seed,
        mc_samples: spec.mc_samples,
        entries,
    };
    Ok(vec![ctx.sink(&[])?.json("oracle_check.json", &report)?])
}

/// Parses `k,t,weight` records, collecting every bad line before failing.
fn read_records(path: &Path) -> Result<(Vec<CountRecord>, String), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(&bytes[..]);
    let header_ok = reader
        .headers()
        .map(|h| h.iter().collect::<Vec<_>>() == ["k", "t", "weight"])
        .unwrap_or(false);
    if !header_ok {
        return Err(CliError::Input(format!("{}: header must be k,t,weight", path.display())));
    }
    let mut records = Vec::new();
    let mut bad = Vec::new();
    for row in reader.records() {
        let parsed = row.ok().and_then(|r| {
            let line = r.position().map(|p| p.line()).unwrap_or(0);
            let rec = (r.len() == 3).then(|| {
                Some(CountRecord { k: r[0].parse().ok()?, t: r[1].parse().ok()?, weight: r[2].parse().ok()? })
            });
            Some((line, rec.flatten()))
        });
        match parsed {
            Some((_, Some(rec))) => records.push(rec),
            Some((line, None)) => bad.push(line),
            None => bad.push(0),
        }
    }
    if !bad.is_empty() {
        let lines: Vec<String> = bad.iter().map(u64::to_string).collect();
        return Err(CliError::Input(format!("{}: malformed rows at lines {}", path.display(), lines.join(", "))));
    }
    Ok((records, sha256_hex(&bytes)))
}

#[derive(Serialize)]
struct ProbeOutput {
    moments: ProbeMoments,
    report: ProbeReport,
    classification: Option<ClassificationReport>,
}

fn probe(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let default_spec;
    let spec: &ProbeSpec = match &ctx.cfg.probe {
        Some(s) => s,
        None => {
            default_spec = serde_json::from_str("{}").expect("all probe fields have defaults");
            &default_spec
        }
    };
    let params = ctx.cfg.model_params()?;
    let pathway = if ctx.cli.compat_asymptotic { MomentPathway::RawAsymptotic } else { MomentPathway::Factorial };
    let (moments, extra) = if ctx.cli.analytic {
        let gamma_t = spec.gamma_t.ok_or_else(|| CliError::Input("analytic probe needs probe.gamma_t".into()))?;
        let state = ctx.cfg.build_state()?;
        (analytic_moments(&state, &params, gamma_t / params.gamma, spec.r_max, pathway)?, Vec::new())
    } else {
        let rel = spec
            .records
            .as_ref()
            .ok_or_else(|| CliError::Input("probe needs probe.records or --analytic".into()))?;
        let (records, hash) = read_records(&ctx.config_dir.join(rel))?;
        (empirical_moments(&records, &params, spec.r_max, pathway)?, vec![hash])
    };
    let options = ProbeOptions {
        j_max: spec.j_max,
        grid_points: spec.x_points,
        b_number: spec.b_number,
        convention: FactorialConvention::DoubleIndex,
    };
    let report = probe_report(&moments, &options)?;
    let classification = if moments.r_max() >= 3 { Some(classify_special_state(&moments)?) } else { None };

    let mut h = CsvTable::new(&["x", "series", "exact", "remainder", "cancellation", "trusted"]);
    for s in &report.h_samples {
        let exact = s.exact.map(num).unwrap_or_default();
        h.row(&[num(s.x), num(s.series), exact, num(s.remainder), num(s.cancellation), s.trusted.to_string()]);
    }
    let mut c = CsvTable::new(&["j", "value", "reported", "inconsistent"]);
    for coef in &report.fourier {
        c.row(&[coef.j.to_string(), num(coef.value), num(coef.reported), coef.inconsistent.to_string()]);
    }
    let mut marginal = CsvTable::new(&["m", "squared_modulus"]);
    for (m, v) in report.reconstructed.squared_moduli.iter().enumerate() {
        marginal.row(&[m.to_string(), num(*v)]);
    }
    let sink = ctx.sink(&extra)?;
    let out = ProbeOutput { moments, report, classification };
    Ok(vec![
        sink.json("probe.json", &out)?,
        sink.csv("probe_h.csv", h)?,
        sink.csv("probe_c.csv", c)?,
        sink.csv("probe_marginal.csv", marginal)?,
    ])
}

fn sample(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let seed = ctx.seed().ok_or_else(|| CliError::Input("sample needs a seed (--seed or config seed)".into()))?;
    let spec = ctx.cfg.sample.as_ref().ok_or_else(|| CliError::Input("sample needs a \"sample\" section".into()))?;
    if !(spec.gamma_t.is_finite() && spec.gamma_t >= 0.0) {
        return Err(CliError::Input(format!("sample.gamma_t must be finite and >= 0, got {}", spec.gamma_t)));
    }
    let state = ctx.cfg.build_state()?;
    let params = ctx.cfg.model_params()?;
    let t = spec.gamma_t / params.gamma;
    let sampler = count_mixture(&state, &params, t, KernelMode::Exact)?.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = CsvTable::new(&["k", "t", "weight"]);
    let (t_text, w_text) = (num(t), num(1.0));
    for _ in 0..spec.n {
        table.row(&[sampler.sample(&mut rng).to_string(), t_text.clone(), w_text.clone()]);
    }
    Ok(vec![ctx.sink(&[])?.csv("samples.csv", table)?])
}
