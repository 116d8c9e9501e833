//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain failure (violated hypotheses,
//! divergence, failed order check, I/O), 2 usage (bad arguments or config).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_decay, EnergyTrace, FitKind, FitWindow, TraceMeta};
use crate::config::{self, FileConfig, KernelFamily};
use crate::error::{Error, Result};
use crate::kernel::{check_hypotheses, KernelSpec};
use crate::reference::AugmentedMode;
use crate::scalar::Cplx;
use crate::solver::Solver;
use crate::spectral::reconstruct;

/// Orders accepted by the convergence check.
pub const ORDER_BAND: (f64, f64) = (1.8, 2.2);

/// RK4 substeps per step of the finest level.
pub const ORACLE_REFINEMENT: usize = 100;

pub const MIN_HALVINGS: usize = 3;

#[derive(Debug, Parser)]
#[command(
    name = "memschro",
    version,
    about = "Memory-damped linear Schrödinger simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the kernel hypotheses and print the decay branch.
    CheckKernel {
        #[command(flatten)]
        source: Source,
        /// Also write `hypothesis.txt` into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a simulation and write its artifacts.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "memschro-out")]
        out: PathBuf,
        /// Steps between energy samples.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Fit exponential decay rates to energy traces and rank them.
    Compare {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Measure the temporal order of accuracy.
    Convergence {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
}

impl Source {
    /// The config and the directory its relative paths resolve against.
    pub fn load(&self) -> Result<(FileConfig, PathBuf)> {
        match (&self.config, &self.preset) {
            (Some(path), _) => {
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                Ok((FileConfig::load(path)?, base))
            }
            (None, Some(name)) => Ok((config::preset(name)?, PathBuf::from("."))),
            (None, None) => Err(Error::Config(
                "either --config or --preset is required".into(),
            )),
        }
    }
}

/// Exit code for an error.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) | Error::Parse { .. } => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first), dispatches, and returns the exit code.
pub fn run_cli<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    let stdout_error = |e: io::Error| Error::io("<stdout>", e);
    match command {
        Command::CheckKernel { source, out: dir } => {
            let (cfg, _) = source.load()?;
            let (text, ok) = check_kernel(&cfg)?;
            if let Some(dir) = dir {
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let path = dir.join("hypothesis.txt");
                fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
            }
            out.write_all(text.as_bytes()).map_err(stdout_error)?;
            Ok(if ok { 0 } else { 1 })
        }
        Command::Run {
            source,
            out: dir,
            stride,
        } => {
            let (mut cfg, base) = source.load()?;
            if let Some(stride) = stride {
                cfg.output.stride = stride;
            }
            let manifest = run_to_dir(&cfg, &base, &dir)?;
            writeln!(
                out,
                "{} / {}: {} samples written to {}",
                manifest.equation,
                manifest.kernel,
                manifest.samples,
                dir.display()
            )
            .map_err(stdout_error)?;
            Ok(0)
        }
        Command::Compare { traces } => {
            let report = compare(&traces)?;
            out.write_all(report.to_string().as_bytes())
                .map_err(stdout_error)?;
            Ok(0)
        }
        Command::Convergence { source } => {
            let (cfg, base) = source.load()?;
            let report = convergence(&cfg, &base)?;
            out.write_all(report.to_string().as_bytes())
                .map_err(stdout_error)?;
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

/// Hypothesis report text and whether every hypothesis holds.
pub fn check_kernel(cfg: &FileConfig) -> Result<(String, bool)> {
    let kernel = cfg.kernel_spec()?;
    let report = check_hypotheses(&kernel);
    let mut text = format!("equation={}\n", cfg.equation().name());
    write!(text, "{report}").expect("formatting into a string");
    if let KernelSpec::Polynomial { exponent, .. } = kernel {
        if exponent <= 3.0 && !report.violations.iter().any(|v| v.contains("q2>3")) {
            text.push_str("violation: H3 requires q2>3\n");
        }
    }
    Ok((text, report.all_hold()))
}

/// Artifact names inside a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutputs {
    pub trace: PathBuf,
    pub final_state: PathBuf,
    pub spacetime: PathBuf,
    pub hypothesis: PathBuf,
    pub plot: PathBuf,
}

impl Default for RunOutputs {
    fn default() -> Self {
        RunOutputs {
            trace: "trace.csv".into(),
            final_state: "final_state.csv".into(),
            spacetime: "spacetime.csv".into(),
            hypothesis: "hypothesis.txt".into(),
            plot: "plot.gp".into(),
        }
    }
}

/// Contents of `manifest.toml`. Runs carry no seed: identical configs give
/// identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub equation: String,
    pub kernel: String,
    pub samples: usize,
    pub outputs: RunOutputs,
    pub config: FileConfig,
}

pub const MANIFEST_NAME: &str = "manifest.toml";

impl RunManifest {
    /// Reads the manifest next to a trace file, if there is one.
    pub fn beside(trace: &Path) -> Option<RunManifest> {
        let path = trace.parent()?.join(MANIFEST_NAME);
        let text = fs::read_to_string(path).ok()?;
        toml::from_str(&text).ok()
    }
}

/// Runs `cfg` and writes every artifact into `dir`. The directory is
/// staged beside its final location and renamed into place; an existing
/// run directory is replaced.
pub fn run_to_dir(cfg: &FileConfig, base: &Path, dir: &Path) -> Result<RunManifest> {
    let sim = cfg.to_simulation(base)?;
    let (hypothesis, _) = check_kernel(cfg)?;
    let solver = Solver::new(sim)?;
    let length = cfg.domain.length;
    let points = cfg.output.samples.max(2);
    let xs: Vec<f64> = (0..points)
        .map(|j| length * j as f64 / (points - 1) as f64)
        .collect();
    let expected_samples = cfg.scheme.steps / cfg.output.stride + 1;
    let frame_every = expected_samples.div_ceil(cfg.output.frames.max(1)).max(1);
    let mut frames: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut seen = 0usize;
    let (state, mut trace) = solver.run_observed(|state, sample| {
        if seen.is_multiple_of(frame_every) {
            let profile = reconstruct(&state.coefficients(length)?, &xs)?;
            frames.push((sample.t, profile.iter().map(|y| y.norm()).collect()));
        }
        seen += 1;
        Ok(())
    })?;
    trace.meta = TraceMeta::from_config(solver.config());
    let final_profile = reconstruct(&state.coefficients(length)?, &xs)?;

    let outputs = RunOutputs::default();
    let manifest = RunManifest {
        equation: trace.meta.equation.clone(),
        kernel: trace.meta.kernel.clone(),
        samples: trace.len(),
        outputs: outputs.clone(),
        config: cfg.clone(),
    };

    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".memschro-")
        .tempdir_in(&parent)
        .map_err(|e| Error::io(&parent, e))?;
    let stage = staging.path();

    let trace_path = stage.join(&outputs.trace);
    let file = fs::File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
    trace
        .write_csv(io::BufWriter::new(file))
        .map_err(|e| Error::io(&trace_path, io::Error::other(e)))?;

    write_final_state(&stage.join(&outputs.final_state), &xs, &final_profile)?;
    write_spacetime(&stage.join(&outputs.spacetime), &xs, &frames)?;
    write_file(&stage.join(&outputs.hypothesis), &hypothesis)?;
    write_file(
        &stage.join(&outputs.plot),
        &plot_script(&outputs, &manifest),
    )?;
    let manifest_text = toml::to_string(&manifest).expect("manifest serializes");
    write_file(&stage.join(MANIFEST_NAME), &manifest_text)?;

    if dir.exists() {
        if !dir.join(MANIFEST_NAME).is_file() {
            return Err(Error::io(
                dir,
                io::Error::new(
                    io::ErrorKind::AlreadyExists,
                    "exists and is not a previous run directory",
                ),
            ));
        }
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let staged = staging.keep();
    fs::rename(&staged, dir).map_err(|e| {
        let _ = fs::remove_dir_all(&staged);
        Error::io(dir, e)
    })?;
    Ok(manifest)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_final_state(path: &Path, xs: &[f64], profile: &[Cplx<f64>]) -> Result<()> {
    let to_io = |e: csv::Error| Error::io(path, io::Error::other(e));
    let mut writer = csv::Writer::from_path(path).map_err(to_io)?;
    writer
        .write_record(["x", "re", "im", "abs"])
        .map_err(to_io)?;
    for (x, y) in xs.iter().zip(profile) {
        writer
            .write_record([
                format!("{x:.16e}"),
                format!("{:.16e}", y.re),
                format!("{:.16e}", y.im),
                format!("{:.16e}", y.norm()),
            ])
            .map_err(to_io)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// `t,x,|y|` rows, one blank-line separated block per frame.
fn write_spacetime(path: &Path, xs: &[f64], frames: &[(f64, Vec<f64>)]) -> Result<()> {
    let mut text = String::from("# t,x,abs\n");
    for (t, row) in frames {
        for (x, v) in xs.iter().zip(row) {
            writeln!(text, "{t:.16e},{x:.16e},{v:.16e}").expect("formatting into a string");
        }
        text.push('\n');
    }
    write_file(path, &text)
}

fn plot_script(outputs: &RunOutputs, manifest: &RunManifest) -> String {
    format!(
        "# gnuplot script; run inside the output directory\n\
         set datafile separator ','\n\
         set terminal pngcairo size 1000,700\n\
         \n\
         set output 'spacetime.png'\n\
         set title '|y(x,t)|: {equation} memory, {kernel} kernel'\n\
         set xlabel 'x'\n\
         set ylabel 't'\n\
         set pm3d map\n\
         splot '{spacetime}' using 2:1:3 with pm3d notitle\n\
         \n\
         reset\n\
         set datafile separator ','\n\
         set output 'energy.png'\n\
         set title 'energy: {equation} memory, {kernel} kernel'\n\
         set xlabel 't'\n\
         set logscale y\n\
         plot '{trace}' every ::1 using 1:2 with lines title 'E', \\\n\
         \x20    '{trace}' every ::1 using 1:($3/2) with lines dashtype 2 title '|y|^2/2'\n",
        equation = manifest.equation,
        kernel = manifest.kernel,
        spacetime = outputs.spacetime.display(),
        trace = outputs.trace.display(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedTrace {
    pub path: PathBuf,
    pub meta: TraceMeta,
    pub rate: f64,
    pub r2: f64,
}

/// Whether the zeroth-order exponential run decays fastest and both
/// Laplacian runs decay slower than it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderingVerdict {
    Holds,
    Violated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    /// Sorted by rate, fastest first.
    pub entries: Vec<RankedTrace>,
    /// Present only when the four memory configurations are all supplied.
    pub ordering: Option<OrderingVerdict>,
}

impl std::fmt::Display for CompareReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "rank,rate,r2,equation,kernel,trace")?;
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(
                f,
                "{},{:.6e},{:.6},{},{},{}",
                i + 1,
                e.rate,
                e.r2,
                or_dash(&e.meta.equation),
                or_dash(&e.meta.kernel),
                e.path.display()
            )?;
        }
        match self.ordering {
            Some(OrderingVerdict::Holds) => writeln!(
                f,
                "expected ordering (zeroth-order + exponential fastest, laplacian slower): holds"
            ),
            Some(OrderingVerdict::Violated) => writeln!(
                f,
                "expected ordering (zeroth-order + exponential fastest, laplacian slower): VIOLATED"
            ),
            None => Ok(()),
        }
    }
}

fn or_dash(s: &str) -> &str {
    if s.is_empty() {
        "-"
    } else {
        s
    }
}

/// Fits an exponential rate on the default tail window of each trace.
/// Run metadata comes from a `manifest.toml` beside the trace when present.
pub fn compare(paths: &[PathBuf]) -> Result<CompareReport> {
    let mut entries = Vec::with_capacity(paths.len());
    for path in paths {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut trace =
            EnergyTrace::<f64>::read_csv(io::BufReader::new(file)).map_err(|detail| {
                Error::Parse {
                    path: path.clone(),
                    detail,
                }
            })?;
        if let Some(manifest) = RunManifest::beside(path) {
            trace.meta = TraceMeta {
                equation: manifest.equation,
                kernel: manifest.kernel,
            };
        }
        let fit = fit_decay(&trace, FitKind::Exponential, FitWindow::default())
            .map_err(|e| Error::Domain(format!("{}: {e}", path.display())))?;
        entries.push(RankedTrace {
            path: path.clone(),
            meta: trace.meta,
            rate: fit.value(),
            r2: fit.r2,
        });
    }
    entries.sort_by(|a, b| b.rate.total_cmp(&a.rate));
    let ordering = quartet_ordering(&entries);
    Ok(CompareReport { entries, ordering })
}

fn quartet_ordering(entries: &[RankedTrace]) -> Option<OrderingVerdict> {
    let find = |equation: &str, kernel: &str| {
        entries
            .iter()
            .find(|e| e.meta.equation == equation && e.meta.kernel == kernel)
    };
    let target = find("zeroth-order", "exponential")?;
    find("zeroth-order", "polynomial")?;
    let laplacian = [
        find("laplacian", "exponential")?,
        find("laplacian", "polynomial")?,
    ];
    let fastest = entries
        .iter()
        .all(|e| std::ptr::eq(e, target) || e.rate < target.rate);
    let slower = laplacian.iter().all(|e| e.rate < target.rate);
    Some(if fastest && slower {
        OrderingVerdict::Holds
    } else {
        OrderingVerdict::Violated
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceReference {
    /// RK4 on the augmented system with the given number of steps.
    Oracle { substeps: usize },
    /// Differences between successive levels.
    SelfConvergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub reference: ConvergenceReference,
    /// `(δt, error)` per level, coarsest first.
    pub rows: Vec<(f64, f64)>,
    /// Observed order between consecutive rows; `None` when both errors
    /// vanish.
    pub orders: Vec<Option<f64>>,
}

impl ConvergenceReport {
    pub fn is_exact(&self) -> bool {
        self.rows.iter().all(|&(_, e)| e == 0.0)
    }

    /// Every measured order lies in [`ORDER_BAND`].
    pub fn passed(&self) -> bool {
        self.orders
            .iter()
            .all(|o| o.is_none_or(|p| p >= ORDER_BAND.0 && p <= ORDER_BAND.1))
    }
}

impl std::fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.reference {
            ConvergenceReference::Oracle { substeps } => {
                writeln!(f, "reference: augmented-ODE RK4, {substeps} steps")?
            }
            ConvergenceReference::SelfConvergence => {
                writeln!(f, "reference: successive refinements")?
            }
        }
        writeln!(f, "dt,error,order")?;
        for (i, (dt, error)) in self.rows.iter().enumerate() {
            let order = match i.checked_sub(1).map(|j| self.orders[j]) {
                None => "-".to_string(),
                Some(None) => "exact".to_string(),
                Some(Some(p)) => format!("{p:.4}"),
            };
            writeln!(f, "{dt:.6e},{error:.6e},{order}")?;
        }
        if self.is_exact() {
            writeln!(f, "order: exact (all errors zero)")?;
        }
        writeln!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Runs the config at `halvings + 1` step sizes (one more for
/// self-convergence) up to the study horizon. The memory window is held
/// fixed in time, so its step count doubles with each halving.
pub fn convergence(cfg: &FileConfig, base: &Path) -> Result<ConvergenceReport> {
    let (halvings, horizon) = match &cfg.convergence {
        Some(c) => (c.halvings, c.horizon),
        None => (MIN_HALVINGS, cfg.scheme.dt * cfg.scheme.steps as f64),
    };
    if halvings < MIN_HALVINGS {
        return Err(Error::Config(format!(
            "convergence needs at least {MIN_HALVINGS} halvings, got {halvings}"
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!(
            "convergence horizon must be positive, got {horizon}"
        )));
    }
    let template = cfg.to_simulation(base)?;
    let oracle = cfg.kernel.family == KernelFamily::Exponential;
    let levels = if oracle { halvings + 1 } else { halvings + 2 };

    let mut solutions = Vec::with_capacity(levels);
    let mut dts = Vec::with_capacity(levels);
    for level in 0..levels {
        let scale = 1usize << level;
        let mut sim = template.clone();
        sim.dt = template.dt / scale as f64;
        sim.steps = (horizon / sim.dt).round() as usize;
        sim.history_steps = template.history_steps * scale;
        sim.energy_stride = sim.steps.max(1);
        let (state, _) = Solver::new(sim.clone())?.run()?;
        dts.push(sim.dt);
        solutions.push(state.amplitudes());
    }

    let distance = |a: &[Cplx<f64>], b: &[Cplx<f64>]| {
        a.iter()
            .zip(b)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
    };
    let (reference, rows) = if oracle {
        let finest_steps = (horizon / dts[levels - 1]).round() as usize;
        let substeps = finest_steps * ORACLE_REFINEMENT;
        let initial = template.initial.project_at(
            0.0,
            template.first_mode,
            template.modes,
            template.length,
            template.quadrature_points,
        )?;
        let exact: Vec<Cplx<f64>> = template
            .mode_indices()
            .zip(initial.values())
            .map(|(k, &b0)| {
                AugmentedMode {
                    dispersion: template.dispersion,
                    eigenvalue: template.eigenvalue(k),
                    coupling: template.memory_coupling(k),
                    kernel: template.kernel,
                }
                .solve(b0, horizon, substeps)
            })
            .collect::<Result<_>>()?;
        let rows: Vec<_> = dts
            .iter()
            .zip(&solutions)
            .map(|(&dt, u)| (dt, distance(u, &exact)))
            .collect();
        (ConvergenceReference::Oracle { substeps }, rows)
    } else {
        let rows: Vec<_> = (0..levels - 1)
            .map(|j| (dts[j], distance(&solutions[j], &solutions[j + 1])))
            .collect();
        (ConvergenceReference::SelfConvergence, rows)
    };
    let orders = observed_orders(&rows);
    Ok(ConvergenceReport {
        reference,
        rows,
        orders,
    })
}

fn observed_orders(rows: &[(f64, f64)]) -> Vec<Option<f64>> {
    rows.windows(2)
        .map(|w| {
            let (e0, e1) = (w[0].1, w[1].1);
            if e0 == 0.0 && e1 == 0.0 {
                None
            } else {
                Some((e0 / e1).ln() / (w[0].0 / w[1].0).ln())
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_estimates() {
        let rows = [(0.1, 4e-4), (0.05, 1e-4), (0.025, 2.5e-5)];
        let orders = observed_orders(&rows);
        assert!(orders.iter().all(|o| (o.unwrap() - 2.0).abs() < 1e-12));
        assert_eq!(observed_orders(&[(0.1, 0.0), (0.05, 0.0)]), vec![None]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Divergence { step: 3 }), 1);
    }

    #[test]
    fn too_few_halvings() {
        let mut cfg = config::preset("convergence-no-memory").unwrap();
        cfg.convergence.as_mut().unwrap().halvings = 2;
        assert!(matches!(
            convergence(&cfg, Path::new(".")),
            Err(Error::Config(_))
        ));
    }
}
