//! The five subcommands: simulate, report, figure, pullback, scan.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sir_dynamics::dynamics::{endemic_floor, pullback_endpoint};
use sir_dynamics::ensemble::EnsembleSpec;
use sir_dynamics::integrator::Trajectory;
use sir_dynamics::model::{
    regime_report, ModelParams, NoiseBounds, Scenario, VariantKind,
};
use sir_dynamics::noise::{ou_path_stream, OuConfig};

use crate::config::{ConfigError, ExperimentConfig};
use crate::plot::{self, Line, Panel};
use crate::presets::figure_preset;

/// Error classes mapped to process exit codes: config 2, numerical 3, I/O 4.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<sir_dynamics::Error> for CliError {
    fn from(e: sir_dynamics::Error) -> Self {
        use sir_dynamics::Error as E;
        match e {
            E::Io(io) => CliError::Io(io.to_string()),
            E::InvalidInput(_) | E::NonFiniteInput(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

fn ensure_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Noise window padded so both the forward span and pullback starts are
/// covered.
fn path_window(cfg: &ExperimentConfig) -> (f64, f64) {
    let start = (cfg.t_span.0 - cfg.pullback_horizon).min(cfg.t_span.0) - 1.0;
    (start, cfg.t_span.1 + 1.0)
}

fn ensemble_spec(cfg: &ExperimentConfig) -> EnsembleSpec<f64> {
    EnsembleSpec {
        kind: cfg.kind,
        params: cfg.params,
        bounds: cfg.bounds,
        path_window: path_window(cfg),
        path_dt: cfg.dt,
        master_seed: cfg.seed,
        size: cfg.realizations,
    }
}

fn scenario_for_member(cfg: &ExperimentConfig, member: u64) -> CliResult<Scenario<f64>> {
    let master = if cfg.kind.is_random() {
        let (lo, hi) = path_window(cfg);
        let ou = OuConfig::new(lo, hi, cfg.dt, cfg.seed)?;
        Some(ou_path_stream(&ou, member)?)
    } else {
        None
    };
    Ok(Scenario::new(cfg.kind, cfg.params, cfg.bounds, master)?)
}

fn write_trajectory(path: &Path, traj: &Trajectory<f64>) -> CliResult {
    let mut w = create(path)?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// `simulate`: one CSV per realization, named `traj_<seed>_<k>.csv`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> CliResult {
    ensure_dir(out_dir)?;
    let runs = ensemble_spec(cfg).run(cfg.u0, cfg.t_span, cfg.dt, cfg.dt_out)?;
    for (k, traj) in runs.iter().enumerate() {
        let path = out_dir.join(format!("traj_{}_{k}.csv", cfg.seed));
        write_trajectory(&path, traj)?;
    }
    println!(
        "wrote {} trajectory file(s) to {}",
        runs.len(),
        out_dir.display()
    );
    Ok(())
}

fn fmt_eigenvalue(re: f64, im: f64) -> String {
    if im == 0.0 {
        format!("{re:.6}")
    } else if im > 0.0 {
        format!("{re:.6}+{im:.6}i")
    } else {
        format!("{re:.6}-{:.6}i", -im)
    }
}

/// `report`: regime classification to stdout plus `report.csv` and
/// `equilibria.csv`.
pub fn cmd_report(cfg: &ExperimentConfig, out_dir: &Path) -> CliResult {
    ensure_dir(out_dir)?;
    let report = regime_report(&cfg.params, cfg.bounds.as_ref(), cfg.kind)?;

    let p = &cfg.params;
    println!("variant: {}", cfg.kind);
    println!(
        "parameters: q = {}, a = {}, b = {}, c = {}, gamma = {}",
        p.recruitment, p.mortality, p.reinfection, p.recovery, p.transmission
    );
    println!("removal rate a+b+c = {}", p.removal_rate());
    println!("R0 = gamma/(a+b+c) = {:.6}", report.r0);
    if let Some(r1) = report.r1 {
        println!("R1 = gamma_0/(a+b+c) = {r1:.6}");
    }
    if let Some(r2) = report.r2 {
        println!("R2 = gamma_0 q_0/(q_1 (a+b+c)) = {r2:.6}");
    }
    println!("verdict: {}", report.verdict);
    println!("equilibria:");
    for info in &report.equilibria {
        let eig: Vec<String> = info
            .eigenvalues
            .iter()
            .map(|l| fmt_eigenvalue(l.re, l.im))
            .collect();
        println!(
            "  ({:.6}, {:.6}, {:.6})  {}  eigenvalues: {}",
            info.point.susceptible,
            info.point.infected,
            info.point.recovered,
            info.class,
            eig.join(", ")
        );
    }

    let mut w = create(&out_dir.join("report.csv"))?;
    writeln!(w, "field,value")?;
    writeln!(w, "variant,{}", cfg.kind)?;
    writeln!(w, "r0,{:.16e}", report.r0)?;
    match report.r1 {
        Some(r1) => writeln!(w, "r1,{r1:.16e}")?,
        None => writeln!(w, "r1,")?,
    }
    match report.r2 {
        Some(r2) => writeln!(w, "r2,{r2:.16e}")?,
        None => writeln!(w, "r2,")?,
    }
    writeln!(w, "verdict,{}", report.verdict)?;
    w.flush()?;

    let mut w = create(&out_dir.join("equilibria.csv"))?;
    writeln!(
        w,
        "S,I,R,eig1_re,eig1_im,eig2_re,eig2_im,eig3_re,eig3_im,class"
    )?;
    for info in &report.equilibria {
        let e = &info.eigenvalues;
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            info.point.susceptible,
            info.point.infected,
            info.point.recovered,
            e[0].re,
            e[0].im,
            e[1].re,
            e[1].im,
            e[2].re,
            e[2].im,
            info.class
        )?;
    }
    w.flush()?;
    Ok(())
}

fn time_series(traj: &Trajectory<f64>, component: usize) -> Vec<(f64, f64)> {
    (0..traj.len())
        .map(|k| {
            let s = traj.state(k);
            let v = [s.susceptible, s.infected, s.recovered][component];
            (traj.time(k), v)
        })
        .collect()
}

fn phase_series(traj: &Trajectory<f64>) -> Vec<(f64, f64)> {
    (0..traj.len())
        .map(|k| {
            let s = traj.state(k);
            (s.susceptible, s.infected)
        })
        .collect()
}

/// `figure`: preset run with the deterministic reference plus noise
/// realizations, per-series CSVs, and an SVG with three stacked time panels
/// and the (S, I) phase panel.
pub fn cmd_figure(
    id: u8,
    seed: Option<u64>,
    realizations: Option<usize>,
    dt: Option<f64>,
    out_dir: &Path,
) -> CliResult {
    let mut cfg = figure_preset(id)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(n) = realizations {
        if n == 0 {
            return Err(CliError::Config("realizations must be >= 1".into()));
        }
        cfg.realizations = n;
    }
    if let Some(dt) = dt {
        cfg.dt = dt;
    }

    let dir = out_dir.join(format!("figure{id}"));
    ensure_dir(&dir)?;
    // The effective configuration, rerunnable through `simulate --config`.
    fs::write(dir.join("config.cfg"), cfg.to_text())?;

    // Deterministic reference: the same rates with the noise switched off.
    let reference_cfg = ExperimentConfig {
        kind: VariantKind::Deterministic,
        bounds: None,
        ..cfg.clone()
    };
    let reference = ensemble_spec(&ExperimentConfig {
        realizations: 1,
        ..reference_cfg
    })
    .run(cfg.u0, cfg.t_span, cfg.dt, cfg.dt_out)?
    .remove(0);
    write_trajectory(&dir.join("reference.csv"), &reference)?;

    let runs = if cfg.kind.is_random() {
        ensemble_spec(&cfg).run(cfg.u0, cfg.t_span, cfg.dt, cfg.dt_out)?
    } else {
        Vec::new()
    };
    for (k, traj) in runs.iter().enumerate() {
        write_trajectory(&dir.join(format!("traj_{}_{k}.csv", cfg.seed)), traj)?;
    }

    // Assemble the plot; a plotting failure degrades to CSV-only.
    let titles = ["susceptible", "infected", "recovered"];
    let panels: Vec<Panel> = (0..3)
        .map(|component| {
            let mut lines: Vec<Line> = runs
                .iter()
                .enumerate()
                .map(|(k, traj)| Line {
                    points: time_series(traj, component),
                    color: plot::realization_color(k),
                    dashed: false,
                })
                .collect();
            lines.push(Line {
                points: time_series(&reference, component),
                color: plot::REFERENCE_COLOR.into(),
                dashed: true,
            });
            Panel {
                title: titles[component].into(),
                x_label: "t".into(),
                y_label: titles[component].into(),
                lines,
                marker: None,
            }
        })
        .collect();
    let mut phase_lines: Vec<Line> = runs
        .iter()
        .enumerate()
        .map(|(k, traj)| Line {
            points: phase_series(traj),
            color: plot::realization_color(k),
            dashed: false,
        })
        .collect();
    phase_lines.push(Line {
        points: phase_series(&reference),
        color: plot::REFERENCE_COLOR.into(),
        dashed: true,
    });
    let phase = Panel {
        title: "phase plane".into(),
        x_label: "S".into(),
        y_label: "I".into(),
        lines: phase_lines,
        marker: Some((cfg.u0.susceptible, cfg.u0.infected)),
    };
    let svg = plot::figure_svg(
        &[panels[0].clone(), panels[1].clone(), panels[2].clone()],
        &phase,
    );
    let svg_path = dir.join(format!("figure{id}.svg"));
    if let Err(e) = fs::write(&svg_path, svg) {
        eprintln!(
            "warning: plot emission failed ({e}); CSV output is complete in {}",
            dir.display()
        );
    }

    println!(
        "figure {id}: reference plus {} realization(s) in {}",
        runs.len(),
        dir.display()
    );
    Ok(())
}

/// `pullback`: endpoint table over increasing horizons with a convergence
/// column (distance between consecutive endpoints).
pub fn cmd_pullback(cfg: &ExperimentConfig, horizons: &[f64], out_dir: &Path) -> CliResult {
    if horizons.is_empty() {
        return Err(CliError::Config("at least one horizon is required".into()));
    }
    if horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(
            "horizons must be strictly increasing".into(),
        ));
    }
    let max_t = horizons.last().copied().unwrap();
    ensure_dir(out_dir)?;

    // The window must reach back to tau - max horizon.
    let window_cfg = ExperimentConfig {
        pullback_horizon: max_t.max(cfg.pullback_horizon),
        ..cfg.clone()
    };
    let scenario = scenario_for_member(&window_cfg, 0)?;

    let mut w = create(&out_dir.join("pullback.csv"))?;
    writeln!(w, "T,S,I,R,delta_prev")?;
    let mut previous: Option<sir_dynamics::SirState64> = None;
    let mut last_delta = f64::NAN;
    for &horizon in horizons {
        let end = pullback_endpoint(&scenario, 0.0, horizon, cfg.u0, cfg.dt)?;
        let delta = previous.map(|p| p.distance(&end));
        match delta {
            Some(d) => {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    horizon, end.susceptible, end.infected, end.recovered, d
                )?;
                last_delta = d;
            }
            None => writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},",
                horizon, end.susceptible, end.infected, end.recovered
            )?,
        }
        previous = Some(end);
    }
    w.flush()?;
    if horizons.len() >= 2 && last_delta > 1e-6 {
        eprintln!(
            "warning: pullback endpoints have not converged (last delta {last_delta:.3e} > 1e-6); consider larger horizons"
        );
    }
    println!("wrote pullback table to {}", out_dir.join("pullback.csv").display());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanParam {
    Gamma,
    D,
    E,
    Q,
}

impl std::str::FromStr for ScanParam {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "gamma" => Ok(ScanParam::Gamma),
            "d" => Ok(ScanParam::D),
            "e" => Ok(ScanParam::E),
            "q" => Ok(ScanParam::Q),
            other => Err(CliError::Config(format!(
                "unknown scan parameter `{other}` (expected gamma, d, e, q)"
            ))),
        }
    }
}

impl std::fmt::Display for ScanParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ScanParam::Gamma => "gamma",
            ScanParam::D => "d",
            ScanParam::E => "e",
            ScanParam::Q => "q",
        };
        f.write_str(s)
    }
}

fn with_param(cfg: &ExperimentConfig, param: ScanParam, value: f64) -> CliResult<ExperimentConfig> {
    let mut out = cfg.clone();
    match param {
        ScanParam::Gamma | ScanParam::Q => {
            let p = &cfg.params;
            let (q, gamma) = match param {
                ScanParam::Q => (value, p.transmission),
                _ => (p.recruitment, value),
            };
            out.params = ModelParams::new(q, p.mortality, p.reinfection, p.recovery, gamma)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        ScanParam::D => {
            let old = cfg.bounds.ok_or_else(|| {
                CliError::Config("scanning d requires a random variant with bounds".into())
            })?;
            out.bounds = Some(match old.q_amplitude {
                Some(e) => NoiseBounds::gamma_and_q(value, e),
                None => NoiseBounds::gamma_only(value),
            }
            .map_err(|e| CliError::Config(e.to_string()))?);
        }
        ScanParam::E => {
            let old = cfg.bounds.ok_or_else(|| {
                CliError::Config("scanning e requires the random_gamma_random_q variant".into())
            })?;
            if cfg.kind != VariantKind::RandomGammaRandomQ {
                return Err(CliError::Config(
                    "scanning e requires the random_gamma_random_q variant".into(),
                ));
            }
            out.bounds = Some(
                NoiseBounds::gamma_and_q(old.gamma_amplitude, value)
                    .map_err(|e| CliError::Config(e.to_string()))?,
            );
        }
    }
    Ok(out)
}

/// `scan`: one row per grid value with the regime verdict and the empirical
/// tail statistic of I (minimum over members and the second half of the span).
pub fn cmd_scan(
    cfg: &ExperimentConfig,
    param: ScanParam,
    values: &[f64],
    out_dir: &Path,
) -> CliResult {
    ensure_dir(out_dir)?;
    let path = out_dir.join(format!("scan_{param}.csv"));
    let mut w = create(&path)?;
    writeln!(w, "value,verdict,tail_min_I")?;
    for &value in values {
        let point = with_param(cfg, param, value)?;
        let report = regime_report(&point.params, point.bounds.as_ref(), point.kind)?;
        let runs = ensemble_spec(&point).run(point.u0, point.t_span, point.dt, point.dt_out)?;
        let tail_start = 0.5 * (point.t_span.0 + point.t_span.1);
        let floor = endemic_floor(&runs, (tail_start, point.t_span.1))?;
        writeln!(w, "{:.16e},{},{:.16e}", value, report.verdict, floor)?;
    }
    w.flush()?;
    println!("wrote scan table to {}", path.display());
    Ok(())
}

/// Resolves the output directory: flag, then config, then the
/// `SIR_DYNAMICS_OUT` environment variable, then `./out`.
pub fn resolve_out_dir(flag: Option<PathBuf>, from_config: Option<&PathBuf>) -> PathBuf {
    flag.or_else(|| from_config.cloned())
        .or_else(|| std::env::var_os("SIR_DYNAMICS_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}
