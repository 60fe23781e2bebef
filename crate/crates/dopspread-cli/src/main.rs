//! Command-line front end for the Doppler-spread toolkit.
//!
//! Every scenario reads a flat `key = value` configuration (file via
//! `--config`, then `--key value` overrides), runs one computation from the
//! library, and emits CSV — to stdout or to `--out`.  The first output line
//! echoes the fully resolved configuration so a result file is
//! self-describing; the second carries a generation timestamp; all
//! remaining lines are data.  Angles cross this boundary in degrees and are
//! converted to radians immediately.
//!
//! Exit codes: 0 on success, 2 for usage and input errors (unknown keys,
//! unparsable values, arguments outside their mathematical domain,
//! mismatched dimensions), 3 for numerical failures (a quadrature or
//! factorization that cannot meet its accuracy contract).

use dopspread::array::{make_bank, AodRegion, ArrayGeometry, BankLayout};
use dopspread::channel::{numerical_psd, PsdEstimatorConfig};
use dopspread::linksim::{run_ser_sweep, LinkScenario, OfdmConfig};
use dopspread::spectrum::{psd_analytic, WindowFunction};
use dopspread::weighting::{assemble_c_matrices, doppler_spread_from_matrices, optimal_weights};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::time::{SystemTime, UNIX_EPOCH};

const USAGE: &str = "\
dopspread — Doppler spectra and spread-minimising weights for
Doppler-compensated beamformer banks on mobile arrays.

USAGE:
    dopspread <scenario> [--config FILE] [--out FILE] [--KEY VALUE]...

SCENARIOS:
    psd      Channel power spectral density (analytic; Monte Carlo overlay
             when realizations > 0)
    window   Doppler window function on a normalised frequency grid
    spread   Doppler spread of one weighting (equal or optimal)
    weights  Spread-minimising antenna weights
    ser      OFDM uplink symbol error rate, equal vs optimal weighting
    sweep    Equal-vs-optimal Doppler spread across array sizes and spacings

OPTIONS:
    --config FILE    Load `key = value` lines ('#' comments allowed)
    --out FILE       Write CSV there instead of stdout
    --KEY VALUE      Override one configuration key
    --help-keys      List the scenario's keys, defaults, and meanings
    -h, --help       This help
    --version        Print the version

Angles are given in degrees; all other quantities are SI. Output is CSV
whose first two lines echo the resolved configuration and a timestamp.
Set DOPSPREAD_THREADS to bound the worker-thread count.
";

/// One configuration key: name, default value, one-line meaning.
type KeySpec = (&'static str, &'static str, &'static str);

const REGION_KEYS: [KeySpec; 2] = [
    ("theta_l_deg", "0", "left edge of the served angular region (degrees)"),
    ("theta_r_deg", "180", "right edge of the served angular region (degrees)"),
];

const WINDOW_KEYS: [KeySpec; 4] = [
    (
        "window",
        "equi_cos_jakes",
        "window form: discrete_bank | equi_cos_closed | equi_cos_jakes | \
         equi_angle_integral | equi_angle_jakes",
    ),
    ("q", "64", "bank branch count (discrete_bank window and Monte Carlo)"),
    ("layout", "equi_cos", "bank direction grid: equi_cos | equi_angle"),
    ("seed", "1", "seed for random draws (bank phases, Monte Carlo)"),
];

fn scenario_schema(scenario: &str) -> Vec<KeySpec> {
    let mut keys: Vec<KeySpec> = Vec::new();
    let array = [
        ("m", "16", "transmit array elements"),
        ("d_over_lambda", "0.45", "element spacing in carrier wavelengths"),
    ];
    match scenario {
        "psd" => {
            keys.extend(array);
            keys.extend(REGION_KEYS);
            keys.extend(WINDOW_KEYS);
            keys.push(("weights", "equal", "weighting: equal | optimal"));
            keys.push(("f_d_hz", "1000", "maximum Doppler frequency (Hz), > 0"));
            keys.push(("grid_points", "1001", "grid size for the analytic-only curve"));
            keys.push((
                "realizations",
                "0",
                "Monte Carlo realizations (0 = analytic curve only)",
            ));
            keys.push(("n_points", "512", "retained correlation lags (power of two ≥ 256)"));
            keys.push(("scatterers", "256", "scatterers per Monte Carlo realization"));
        }
        "window" => {
            keys.extend(REGION_KEYS);
            keys.extend(WINDOW_KEYS);
            keys.push(("grid_points", "1001", "evaluation grid size"));
        }
        "spread" => {
            keys.extend(array);
            keys.extend(REGION_KEYS);
            keys.extend(WINDOW_KEYS);
            keys.push(("weights", "equal", "weighting: equal | optimal"));
            keys.push(("f_d_hz", "1000", "maximum Doppler frequency (Hz), > 0"));
        }
        "weights" => {
            keys.push(("m", "8", "transmit array elements"));
            keys.push(("d_over_lambda", "0.45", "element spacing in carrier wavelengths"));
            keys.extend(REGION_KEYS);
            keys.extend(WINDOW_KEYS);
        }
        "ser" => {
            keys.push(("m", "64", "transmit array elements"));
            keys.push(("d_over_lambda", "0.45", "transmit spacing in wavelengths"));
            keys.push(("rx_m", "4", "receive array elements"));
            keys.push(("rx_d_over_lambda", "0.5", "receive spacing in wavelengths"));
            keys.extend(REGION_KEYS);
            keys.extend(WINDOW_KEYS);
            keys.push(("f_d_hz", "1000", "maximum Doppler frequency (Hz)"));
            keys.push(("n_subcarriers", "128", "OFDM subcarriers per block"));
            keys.push(("cp_len", "16", "cyclic-prefix samples"));
            keys.push(("blocks", "5", "blocks per frame (block 0 is the pilot)"));
            keys.push(("block_duration_s", "0.0001", "one block's duration (seconds)"));
            keys.push(("scatterers", "256", "scatterers per frame"));
            keys.push(("frames", "100", "frames per SNR point"));
            keys.push(("snr_db", "20,30,40", "comma-separated SNR grid (dB)"));
        }
        "sweep" => {
            keys.push(("m_list", "16,64", "comma-separated array sizes"));
            keys.push((
                "d_over_lambda_list",
                "0.10,0.15,0.20,0.25,0.30,0.35,0.40,0.45,0.50",
                "comma-separated element spacings (wavelengths)",
            ));
            keys.push((
                "layout_list",
                "equi_cos,equi_angle",
                "bank layouts to sweep (dense-bank limit windows)",
            ));
            keys.extend(REGION_KEYS);
            keys.push(("f_d_hz", "1000", "maximum Doppler frequency (Hz), > 0"));
        }
        _ => unreachable!("schema queried for unknown scenario"),
    }
    keys
}

const SCENARIOS: [&str; 6] = ["psd", "window", "spread", "weights", "ser", "sweep"];

/// CLI failure: either a usage/parse problem or a library error.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(dopspread::Error),
}

impl From<dopspread::Error> for CliError {
    fn from(e: dopspread::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(dopspread::Error::Domain(_) | dopspread::Error::Dimension(_)) => 2,
            CliError::Lib(dopspread::Error::Numeric(_)) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parsed command line: scenario plus raw option strings.
struct Invocation {
    scenario: String,
    config_path: Option<String>,
    out_path: Option<String>,
    overrides: Vec<(String, String)>,
    help_keys: bool,
}

fn parse_args(args: &[String]) -> CliResult<Invocation> {
    let scenario = args[0].clone();
    if !SCENARIOS.contains(&scenario.as_str()) {
        return Err(CliError::usage(format!(
            "unknown scenario '{scenario}'; expected one of: {}",
            SCENARIOS.join(", ")
        )));
    }
    let mut inv = Invocation {
        scenario,
        config_path: None,
        out_path: None,
        overrides: Vec::new(),
        help_keys: false,
    };
    let mut i = 1;
    while i < args.len() {
        let arg = &args[i];
        if arg == "--help-keys" {
            inv.help_keys = true;
            i += 1;
            continue;
        }
        let Some(key) = arg.strip_prefix("--") else {
            return Err(CliError::usage(format!(
                "unexpected positional argument '{arg}'; options look like --key value"
            )));
        };
        if key.is_empty() {
            return Err(CliError::usage("empty option name '--'"));
        }
        let Some(value) = args.get(i + 1) else {
            return Err(CliError::usage(format!("option --{key} is missing its value")));
        };
        match key {
            "config" => inv.config_path = Some(value.clone()),
            "out" => inv.out_path = Some(value.clone()),
            _ => inv.overrides.push((key.to_string(), value.clone())),
        }
        i += 2;
    }
    Ok(inv)
}

/// Parses `key = value` lines; '#' starts a comment, blank lines are
/// skipped, later duplicates win.
fn parse_config_text(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::usage(format!(
                "config line {}: expected 'key = value', got '{line}'",
                idx + 1
            )));
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(CliError::usage(format!("config line {}: empty key", idx + 1)));
        }
        pairs.push((key.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Fully resolved configuration: every schema key with its final value.
type Resolved = BTreeMap<String, String>;

fn resolve_config(
    scenario: &str,
    file_pairs: &[(String, String)],
    overrides: &[(String, String)],
) -> CliResult<Resolved> {
    let schema = scenario_schema(scenario);
    let mut resolved: Resolved = schema
        .iter()
        .map(|(k, d, _)| (k.to_string(), d.to_string()))
        .collect();
    for (k, v) in file_pairs.iter().chain(overrides) {
        if !resolved.contains_key(k) {
            return Err(CliError::usage(format!(
                "unknown key '{k}' for scenario '{scenario}'; run with --help-keys to list them"
            )));
        }
        resolved.insert(k.clone(), v.clone());
    }
    Ok(resolved)
}

fn key_help(scenario: &str) -> String {
    let mut out = format!("keys for scenario '{scenario}' (key, default, meaning):\n");
    for (k, d, h) in scenario_schema(scenario) {
        out.push_str(&format!("  {k:<20} {d:<45} {h}\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// Typed getters
// ---------------------------------------------------------------------------

fn get_f64(cfg: &Resolved, key: &str) -> CliResult<f64> {
    let raw = &cfg[key];
    raw.parse::<f64>()
        .map_err(|_| CliError::usage(format!("key '{key}': cannot parse '{raw}' as a number")))
}

fn get_usize(cfg: &Resolved, key: &str) -> CliResult<usize> {
    let raw = &cfg[key];
    raw.parse::<usize>().map_err(|_| {
        CliError::usage(format!(
            "key '{key}': cannot parse '{raw}' as a nonnegative integer"
        ))
    })
}

fn get_u64(cfg: &Resolved, key: &str) -> CliResult<u64> {
    let raw = &cfg[key];
    raw.parse::<u64>().map_err(|_| {
        CliError::usage(format!(
            "key '{key}': cannot parse '{raw}' as a nonnegative integer"
        ))
    })
}

fn get_choice(cfg: &Resolved, key: &str, choices: &[&str]) -> CliResult<String> {
    let raw = cfg[key].as_str();
    if choices.contains(&raw) {
        Ok(raw.to_string())
    } else {
        Err(CliError::usage(format!(
            "key '{key}': '{raw}' is not one of {}",
            choices.join(" | ")
        )))
    }
}

fn get_list<T>(cfg: &Resolved, key: &str, parse: impl Fn(&str) -> Option<T>) -> CliResult<Vec<T>> {
    let raw = &cfg[key];
    let mut out = Vec::new();
    for item in raw.split(',') {
        let item = item.trim();
        let Some(v) = parse(item).filter(|_| !item.is_empty()) else {
            return Err(CliError::usage(format!(
                "key '{key}': cannot parse list item '{item}' in '{raw}'"
            )));
        };
        out.push(v);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Shared builders
// ---------------------------------------------------------------------------

/// Degrees to radians with an exactness guard: values that land within
/// rounding error of the interval ends `0` and `π` are snapped onto them so
/// that `theta_r_deg = 180` means the full half-plane exactly.
fn degrees_to_radians(deg: f64) -> f64 {
    let rad = deg.to_radians();
    if (rad - PI).abs() < 1e-12 {
        PI
    } else if rad != 0.0 && rad.abs() < 1e-12 {
        0.0
    } else {
        rad
    }
}

fn build_region(cfg: &Resolved) -> CliResult<AodRegion> {
    let l = degrees_to_radians(get_f64(cfg, "theta_l_deg")?);
    let r = degrees_to_radians(get_f64(cfg, "theta_r_deg")?);
    Ok(AodRegion::new(l, r)?)
}

fn build_tx_geometry(cfg: &Resolved) -> CliResult<ArrayGeometry> {
    Ok(ArrayGeometry::ula(
        get_usize(cfg, "m")?,
        get_f64(cfg, "d_over_lambda")?,
    )?)
}

fn parse_layout(name: &str) -> CliResult<BankLayout> {
    match name {
        "equi_cos" => Ok(BankLayout::EquiCos),
        "equi_angle" => Ok(BankLayout::EquiAngle),
        other => Err(CliError::usage(format!(
            "key 'layout': '{other}' is not one of equi_cos | equi_angle"
        ))),
    }
}

fn build_window(cfg: &Resolved, region: &AodRegion) -> CliResult<WindowFunction> {
    let kind = cfg["window"].as_str();
    match kind {
        "discrete_bank" => {
            let q = get_usize(cfg, "q")?;
            let layout = parse_layout(cfg["layout"].as_str())?;
            let seed = get_u64(cfg, "seed")?;
            let bank = make_bank(region, q, layout, seed)?;
            Ok(WindowFunction::discrete_bank(region, &bank)?)
        }
        "equi_cos_closed" => Ok(WindowFunction::equi_cos_closed(region)),
        "equi_cos_jakes" => Ok(WindowFunction::equi_cos_jakes()),
        "equi_angle_integral" => Ok(WindowFunction::equi_angle_integral(region)),
        "equi_angle_jakes" => Ok(WindowFunction::equi_angle_jakes()),
        other => Err(CliError::usage(format!(
            "key 'window': '{other}' is not one of discrete_bank | equi_cos_closed | \
             equi_cos_jakes | equi_angle_integral | equi_angle_jakes"
        ))),
    }
}

fn positive_doppler(cfg: &Resolved) -> CliResult<f64> {
    let f_d = get_f64(cfg, "f_d_hz")?;
    if !(f_d > 0.0) || !f_d.is_finite() {
        return Err(CliError::usage(format!(
            "key 'f_d_hz': must be positive and finite, got {f_d}"
        )));
    }
    Ok(f_d)
}

/// `None` for equal weighting, the spread-minimising vector for `optimal`.
fn resolve_weights(
    cfg: &Resolved,
    geom: &ArrayGeometry,
    region: &AodRegion,
    win: &WindowFunction,
) -> CliResult<Option<Vec<Complex64>>> {
    match get_choice(cfg, "weights", &["equal", "optimal"])?.as_str() {
        "equal" => Ok(None),
        _ => {
            let cm = assemble_c_matrices(geom, region, win)?;
            Ok(Some(optimal_weights(&cm)?.0))
        }
    }
}

fn fnum(x: f64) -> String {
    format!("{x:.16e}")
}

/// Assembles the CSV document: resolved-config echo, timestamp, header,
/// rows.
fn csv_document(scenario: &str, cfg: &Resolved, header: &str, rows: &[String]) -> String {
    let mut out = String::new();
    out.push_str("# config:");
    out.push_str(&format!(" scenario={scenario}"));
    for (k, v) in cfg {
        out.push_str(&format!(" {k}={v}"));
    }
    out.push('\n');
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    out.push_str(&format!("# generated_unix: {stamp}\n"));
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}

/// Uniform grid of `count` normalised frequencies over ±`span`.
fn symmetric_grid(span: f64, count: usize) -> Vec<f64> {
    let step = 2.0 * span / (count - 1) as f64;
    (0..count).map(|i| -span + i as f64 * step).collect()
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

fn run_psd(cfg: &Resolved) -> CliResult<String> {
    let geom = build_tx_geometry(cfg)?;
    let region = build_region(cfg)?;
    let win = build_window(cfg, &region)?;
    let f_d = positive_doppler(cfg)?;
    let omega_d = TAU * f_d;
    let weights = resolve_weights(cfg, &geom, &region, &win)?;
    let realizations = get_usize(cfg, "realizations")?;

    if realizations == 0 {
        let points = get_usize(cfg, "grid_points")?;
        if points < 2 {
            return Err(CliError::usage("key 'grid_points': need at least 2"));
        }
        let omegas: Vec<f64> = symmetric_grid(1.25 * region.mu(), points)
            .iter()
            .map(|wt| wt * omega_d)
            .collect();
        let (curve, excluded) =
            psd_analytic(&geom, &region, &win, omega_d, &omegas, weights.as_deref())?;
        let mut rows = Vec::with_capacity(omegas.len());
        let mut ci = 0;
        let mut ei = 0;
        for &omega in &omegas {
            if ei < excluded.len() && excluded[ei] == omega {
                rows.push(format!("{},inf", fnum(omega / omega_d)));
                ei += 1;
            } else {
                rows.push(format!(
                    "{},{}",
                    fnum(curve.omega_tilde()[ci]),
                    fnum(curve.values()[ci])
                ));
                ci += 1;
            }
        }
        Ok(csv_document("psd", cfg, "omega_tilde,psd_analytic", &rows))
    } else {
        let n_points = get_usize(cfg, "n_points")?;
        let scatterers = get_usize(cfg, "scatterers")?;
        let seed = get_u64(cfg, "seed")?;
        let q = get_usize(cfg, "q")?;
        let layout = parse_layout(cfg["layout"].as_str())?;
        let est = PsdEstimatorConfig::new(n_points, realizations, seed)?
            .with_scatterer_count(scatterers)?;
        let curve = numerical_psd(&geom, &region, q, layout, weights.as_deref(), f_d, &est)?;
        let omegas: Vec<f64> = (0..curve.len()).map(|i| curve.omega_at(i)).collect();
        let (ana, excluded) =
            psd_analytic(&geom, &region, &win, omega_d, &omegas, weights.as_deref())?;
        let mut rows = Vec::with_capacity(omegas.len());
        let mut ci = 0;
        let mut ei = 0;
        for (i, &omega) in omegas.iter().enumerate() {
            let numerical = fnum(curve.values()[i]);
            if ei < excluded.len() && excluded[ei] == omega {
                rows.push(format!("{},{numerical},inf", fnum(curve.omega_tilde()[i])));
                ei += 1;
            } else {
                rows.push(format!(
                    "{},{numerical},{}",
                    fnum(curve.omega_tilde()[i]),
                    fnum(ana.values()[ci])
                ));
                ci += 1;
            }
        }
        Ok(csv_document(
            "psd",
            cfg,
            "omega_tilde,psd_numerical,psd_analytic",
            &rows,
        ))
    }
}

fn run_window(cfg: &Resolved) -> CliResult<String> {
    let region = build_region(cfg)?;
    let win = build_window(cfg, &region)?;
    if (win.support_mu() - region.mu()).abs() > 1e-9 {
        return Err(CliError::Lib(dopspread::Error::Domain(format!(
            "window support half-width {} does not match the region's cosine width {}",
            win.support_mu(),
            region.mu()
        ))));
    }
    let points = get_usize(cfg, "grid_points")?;
    if points < 2 {
        return Err(CliError::usage("key 'grid_points': need at least 2"));
    }
    let rows: Vec<String> = symmetric_grid(1.25 * region.mu(), points)
        .iter()
        .map(|&wt| format!("{},{}", fnum(wt), fnum(win.eval(wt))))
        .collect();
    Ok(csv_document("window", cfg, "omega_tilde,window_value", &rows))
}

fn run_spread(cfg: &Resolved) -> CliResult<String> {
    let geom = build_tx_geometry(cfg)?;
    let region = build_region(cfg)?;
    let win = build_window(cfg, &region)?;
    let f_d = positive_doppler(cfg)?;
    let omega_d = TAU * f_d;
    let mode = get_choice(cfg, "weights", &["equal", "optimal"])?;
    let cm = assemble_c_matrices(&geom, &region, &win)?;
    let sigma = match mode.as_str() {
        "equal" => doppler_spread_from_matrices(&cm, omega_d, None)?,
        _ => {
            let (u, _) = optimal_weights(&cm)?;
            doppler_spread_from_matrices(&cm, omega_d, Some(&u))?
        }
    };
    let row = format!(
        "{},{},{},{mode},{},{}",
        geom.element_count(),
        fnum(get_f64(cfg, "d_over_lambda")?),
        fnum(f_d),
        fnum(sigma),
        fnum(sigma / omega_d)
    );
    Ok(csv_document(
        "spread",
        cfg,
        "m,d_over_lambda,f_d_hz,weights,sigma_ds_rad_s,sigma_ds_over_omega_d",
        &[row],
    ))
}

fn run_weights(cfg: &Resolved) -> CliResult<String> {
    let geom = build_tx_geometry(cfg)?;
    let region = build_region(cfg)?;
    let win = build_window(cfg, &region)?;
    let cm = assemble_c_matrices(&geom, &region, &win)?;
    let (u, _) = optimal_weights(&cm)?;
    let rows: Vec<String> = u
        .iter()
        .enumerate()
        .map(|(i, w)| {
            format!(
                "{i},{},{},{}",
                fnum(w.re),
                fnum(w.im),
                fnum(w.norm())
            )
        })
        .collect();
    Ok(csv_document(
        "weights",
        cfg,
        "element,weight_re,weight_im,weight_abs",
        &rows,
    ))
}

fn run_ser(cfg: &Resolved) -> CliResult<String> {
    let tx = build_tx_geometry(cfg)?;
    let rx = ArrayGeometry::ula(get_usize(cfg, "rx_m")?, get_f64(cfg, "rx_d_over_lambda")?)?;
    let region = build_region(cfg)?;
    let win = build_window(cfg, &region)?;
    let scenario = LinkScenario {
        tx_geometry: tx.clone(),
        rx_geometry: rx,
        region,
        branch_count: get_usize(cfg, "q")?,
        layout: parse_layout(cfg["layout"].as_str())?,
        doppler_hz: get_f64(cfg, "f_d_hz")?,
        scatterer_count: get_usize(cfg, "scatterers")?,
        ofdm: OfdmConfig::new(
            get_usize(cfg, "n_subcarriers")?,
            get_usize(cfg, "cp_len")?,
            get_usize(cfg, "blocks")?,
            get_f64(cfg, "block_duration_s")?,
        )?,
    };
    let snrs = get_list(cfg, "snr_db", |s| s.parse::<f64>().ok())?;
    let frames = get_usize(cfg, "frames")?;
    let seed = get_u64(cfg, "seed")?;

    let cm = assemble_c_matrices(&tx, &region, &win)?;
    let (u_opt, _) = optimal_weights(&cm)?;
    let equal = run_ser_sweep(&scenario, None, &snrs, frames, seed)?;
    let optimal = run_ser_sweep(&scenario, Some(&u_opt), &snrs, frames, seed)?;

    let rows: Vec<String> = equal
        .iter()
        .zip(&optimal)
        .map(|(e, o)| {
            format!(
                "{},{},{},{},{},{},{},{}",
                fnum(e.snr_db),
                fnum(e.ser()),
                fnum(e.ci95_half_width()),
                e.symbol_errors,
                fnum(o.ser()),
                fnum(o.ci95_half_width()),
                o.symbol_errors,
                e.symbols
            )
        })
        .collect();
    Ok(csv_document(
        "ser",
        cfg,
        "snr_db,ser_equal,ci95_equal,errors_equal,ser_optimal,ci95_optimal,errors_optimal,symbols",
        &rows,
    ))
}

fn run_sweep(cfg: &Resolved) -> CliResult<String> {
    let region = build_region(cfg)?;
    let f_d = positive_doppler(cfg)?;
    let omega_d = TAU * f_d;
    let ms = get_list(cfg, "m_list", |s| s.parse::<usize>().ok())?;
    let ds = get_list(cfg, "d_over_lambda_list", |s| s.parse::<f64>().ok())?;
    let layouts = get_list(cfg, "layout_list", |s| {
        matches!(s, "equi_cos" | "equi_angle").then(|| s.to_string())
    })?;
    let jakes = region.theta_l() == 0.0 && region.theta_r() == PI;

    let mut rows = Vec::with_capacity(layouts.len() * ms.len() * ds.len());
    for layout in &layouts {
        let win = match (layout.as_str(), jakes) {
            ("equi_cos", true) => WindowFunction::equi_cos_jakes(),
            ("equi_cos", false) => WindowFunction::equi_cos_closed(&region),
            (_, true) => WindowFunction::equi_angle_jakes(),
            (_, false) => WindowFunction::equi_angle_integral(&region),
        };
        for &m in &ms {
            for &d in &ds {
                let geom = ArrayGeometry::ula(m, d)?;
                let cm = assemble_c_matrices(&geom, &region, &win)?;
                let s_eq = doppler_spread_from_matrices(&cm, omega_d, None)?;
                let (u, _) = optimal_weights(&cm)?;
                let s_opt = doppler_spread_from_matrices(&cm, omega_d, Some(&u))?;
                rows.push(format!(
                    "{layout},{m},{},{},{}",
                    fnum(d),
                    fnum(s_eq),
                    fnum(s_opt)
                ));
            }
        }
    }
    Ok(csv_document(
        "sweep",
        cfg,
        "layout,m,d_over_lambda,sigma_ds_equal_rad_s,sigma_ds_optimal_rad_s",
        &rows,
    ))
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("DOPSPREAD_THREADS") else {
        return Ok(());
    };
    let Ok(n) = raw.parse::<usize>() else {
        return Err(CliError::usage(format!(
            "DOPSPREAD_THREADS: cannot parse '{raw}' as a positive integer"
        )));
    };
    if n == 0 {
        return Err(CliError::usage(
            "DOPSPREAD_THREADS: thread count must be at least 1",
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("failed to configure the thread pool: {e}")))
}

fn real_main(args: &[String]) -> CliResult<()> {
    if args.is_empty() || args[0] == "-h" || args[0] == "--help" {
        print!("{USAGE}");
        return Ok(());
    }
    if args[0] == "--version" {
        println!("dopspread {}", env!("CARGO_PKG_VERSION"));
        return Ok(());
    }
    let inv = parse_args(args)?;
    if inv.help_keys {
        print!("{}", key_help(&inv.scenario));
        return Ok(());
    }
    let file_pairs = match &inv.config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::usage(format!("cannot read config file '{path}': {e}"))
            })?;
            parse_config_text(&text)?
        }
        None => Vec::new(),
    };
    let cfg = resolve_config(&inv.scenario, &file_pairs, &inv.overrides)?;
    configure_threads()?;
    let csv = match inv.scenario.as_str() {
        "psd" => run_psd(&cfg)?,
        "window" => run_window(&cfg)?,
        "spread" => run_spread(&cfg)?,
        "weights" => run_weights(&cfg)?,
        "ser" => run_ser(&cfg)?,
        _ => run_sweep(&cfg)?,
    };
    match &inv.out_path {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| CliError::usage(format!("cannot write '{path}': {e}")))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let Err(e) = real_main(&args) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn args_parse_flags_and_overrides() {
        let inv = parse_args(&strings(&[
            "psd", "--config", "a.cfg", "--m", "32", "--out", "x.csv",
        ]))
        .unwrap();
        assert_eq!(inv.scenario, "psd");
        assert_eq!(inv.config_path.as_deref(), Some("a.cfg"));
        assert_eq!(inv.out_path.as_deref(), Some("x.csv"));
        assert_eq!(inv.overrides, vec![("m".to_string(), "32".to_string())]);
        assert!(parse_args(&strings(&["nope"])).is_err());
        assert!(parse_args(&strings(&["psd", "stray"])).is_err());
        assert!(parse_args(&strings(&["psd", "--m"])).is_err());
    }

    #[test]
    fn config_text_parsing() {
        let pairs = parse_config_text("# comment\n m = 8 \n\nd_over_lambda=0.5\n").unwrap();
        assert_eq!(
            pairs,
            vec![
                ("m".to_string(), "8".to_string()),
                ("d_over_lambda".to_string(), "0.5".to_string())
            ]
        );
        assert!(parse_config_text("just words\n").is_err());
        assert!(parse_config_text("= value\n").is_err());
    }

    #[test]
    fn resolution_applies_defaults_and_rejects_unknown_keys() {
        let cfg = resolve_config("spread", &[], &[("m".into(), "32".into())]).unwrap();
        assert_eq!(cfg["m"], "32");
        assert_eq!(cfg["d_over_lambda"], "0.45");
        let err = resolve_config("spread", &[], &[("bogus".into(), "1".into())]);
        assert!(err.is_err());
        // File value is overridden by the command line.
        let cfg = resolve_config(
            "spread",
            &[("m".into(), "8".into())],
            &[("m".into(), "12".into())],
        )
        .unwrap();
        assert_eq!(cfg["m"], "12");
    }

    #[test]
    fn degree_conversion_snaps_interval_ends() {
        assert_eq!(degrees_to_radians(180.0), PI);
        assert_eq!(degrees_to_radians(0.0), 0.0);
        assert!((degrees_to_radians(60.0) - PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn every_scenario_has_a_schema_with_unique_keys() {
        for s in SCENARIOS {
            let schema = scenario_schema(s);
            assert!(!schema.is_empty());
            let mut names: Vec<&str> = schema.iter().map(|(k, _, _)| *k).collect();
            names.sort_unstable();
            let before = names.len();
            names.dedup();
            assert_eq!(before, names.len(), "duplicate key in schema '{s}'");
        }
    }

    #[test]
    fn list_getter_parses_and_rejects() {
        let mut cfg = Resolved::new();
        cfg.insert("snr_db".into(), "20, 30,40".into());
        let vals = get_list(&cfg, "snr_db", |s| s.parse::<f64>().ok()).unwrap();
        assert_eq!(vals, vec![20.0, 30.0, 40.0]);
        cfg.insert("snr_db".into(), "20,,40".into());
        assert!(get_list(&cfg, "snr_db", |s| s.parse::<f64>().ok()).is_err());
    }

    #[test]
    fn csv_document_layout() {
        let mut cfg = Resolved::new();
        cfg.insert("b".into(), "2".into());
        cfg.insert("a".into(), "1".into());
        let doc = csv_document("spread", &cfg, "x,y", &["1,2".into()]);
        let lines: Vec<&str> = doc.lines().collect();
        assert_eq!(lines[0], "# config: scenario=spread a=1 b=2");
        assert!(lines[1].starts_with("# generated_unix: "));
        assert_eq!(lines[2], "x,y");
        assert_eq!(lines[3], "1,2");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(CliError::usage("x").exit_code(), 2);
        assert_eq!(
            CliError::Lib(dopspread::Error::Domain("x".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::Lib(dopspread::Error::Dimension("x".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::Lib(dopspread::Error::Numeric("x".into())).exit_code(),
            3
        );
    }

    #[test]
    fn symmetric_grid_covers_span() {
        let g = symmetric_grid(2.0, 5);
        assert_eq!(g, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    }
}
