//! Orchestration of `run` and `compare`: output layout, per-scheme
//! threads, streamed traces and plots.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use shom::homogenize::{effective_tensor_with, trajectory_from_parts, EffectiveTensor};
use shom::io::write_dump;
use shom::solvers::{TraceRecord, TraceWriter};
use shom::{MacroscopicLoad, Minimizer, PhaseMap, SolveOutcome, StopReason, TensorField};

use crate::config::{self, PlannedRun, Prepared};
use crate::output::{self, directional_modulus, stop_label, ErrorReference};
use crate::plot::{self, Series};

/// Iterations between progress lines in verbose mode.
const PROGRESS_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Compare,
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    /// Run schemes one after another on the calling thread.
    pub deterministic: bool,
    pub verbose: bool,
}

/// Overall result of a batch that completed without errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    /// At least one run stopped at its iteration cap.
    MaxIter,
}

pub fn execute(command: Command, config_path: &Path, opts: &Options) -> Result<Status> {
    let cfg = config::read(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let mut prepared = cfg.prepare(base, opts.out.as_deref())?;
    if command == Command::Compare {
        ensure!(prepared.runs.len() >= 2, "compare needs at least two schemes, the config lists {}", prepared.runs.len());
        ensure!(!prepared.tensor_mode(), "compare needs a macroscopic load");
    }
    let dir = prepared.output_dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    if prepared.tensor_mode() {
        run_tensors(&prepared, &dir, opts)
    } else {
        let minimizers = std::mem::take(&mut prepared.minimizers);
        run_single(&prepared, minimizers, command, &dir, opts)
    }
}

/// First failure of a batch; later runs stop at their next iteration.
#[derive(Default)]
struct Abort {
    flag: AtomicBool,
    first: Mutex<Option<anyhow::Error>>,
}

impl Abort {
    fn is_set(&self) -> bool {
        self.flag.load(Ordering::SeqCst)
    }

    fn capture<R>(&self, result: Result<R>) -> Option<R> {
        match result {
            Ok(r) => Some(r),
            Err(e) => {
                let mut first = self.first.lock().unwrap_or_else(|p| p.into_inner());
                if first.is_none() {
                    *first = Some(e);
                }
                self.flag.store(true, Ordering::SeqCst);
                None
            }
        }
    }

    /// Observer check: stops a run once another one has failed.
    fn check(&self) -> shom::Result<()> {
        if self.is_set() {
            Err(shom::Error::Precondition("stopped after another run failed".into()))
        } else {
            Ok(())
        }
    }
}

/// Runs `f` on every item, concurrently unless `deterministic`. The first
/// error aborts the remaining runs and is returned.
fn run_all<T: Send, R: Send>(
    items: Vec<T>,
    deterministic: bool,
    f: impl Fn(usize, T, &Abort) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let abort = Abort::default();
    let results: Vec<Option<R>> = if deterministic {
        items
            .into_iter()
            .enumerate()
            .map(|(k, item)| if abort.is_set() { None } else { abort.capture(f(k, item, &abort)) })
            .collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = items
                .into_iter()
                .enumerate()
                .map(|(k, item)| {
                    let (f, abort) = (&f, &abort);
                    s.spawn(move || abort.capture(f(k, item, abort)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p))).collect()
        })
    };
    if let Some(e) = abort.first.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }
    Ok(results.into_iter().map(|r| r.expect("every run succeeded")).collect())
}

type TraceFile = TraceWriter<BufWriter<File>>;

fn trace_file(path: &Path) -> Result<TraceFile> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(TraceWriter::new(BufWriter::new(file))?)
}

fn progress(label: &str, r: &TraceRecord) {
    eprintln!("{label}: n={} value={:.3e} grad={:.3e} L={:.12}", r.n, r.value, r.grad_norm, r.leff);
}

fn summary(label: &str, out: &SolveOutcome, leff: f64, start: Instant) {
    eprintln!(
        "{label}: stopped on {} after {} iterations ({:.2} s), L_eff = {leff:.12}",
        stop_label(out.stop),
        out.iterations,
        start.elapsed().as_secs_f64()
    );
}

fn status(outcomes: &[&SolveOutcome]) -> Status {
    if outcomes.iter().any(|o| o.stop == StopReason::MaxIter) {
        Status::MaxIter
    } else {
        Status::Converged
    }
}

fn run_single(
    prepared: &Prepared,
    minimizers: Vec<Minimizer>,
    command: Command,
    dir: &Path,
    opts: &Options,
) -> Result<Status> {
    let load = prepared.load.as_ref().expect("single-load mode");
    let compare = command == Command::Compare;
    let emit = prepared.emit;
    let outcomes = run_all(minimizers, opts.deterministic, |k, minimizer, abort| {
        let label = &prepared.runs[k].label;
        let mut trace =
            if emit.trace || compare { Some(trace_file(&dir.join(format!("trace_{label}.csv")))?) } else { None };
        let start = Instant::now();
        let out = minimizer
            .run_with(|record, _| {
                abort.check()?;
                if let Some(t) = trace.as_mut() {
                    t.push(record)?;
                }
                if opts.verbose && record.n % PROGRESS_EVERY == 0 {
                    progress(label, record);
                }
                Ok(())
            })
            .with_context(|| format!("scheme {label}"))?;
        summary(label, &out, directional_modulus(&out, load), start);
        if emit.dumps {
            write_dumps(dir, label, &prepared.phases, load, &out)?;
        }
        Ok(out)
    })?;

    let labelled: Vec<(&str, &SolveOutcome)> =
        prepared.runs.iter().map(|r| r.label.as_str()).zip(outcomes.iter()).collect();
    write_with(&dir.join("effective.csv"), |w| output::effective_single(w, &labelled, load, prepared.exact))?;
    let traces: Vec<(&str, &[TraceRecord])> =
        labelled.iter().map(|(l, o)| (*l, o.trace.records.as_slice())).collect();
    if compare || emit.convergence_svg {
        write_convergence(dir, &traces, prepared.exact)?;
    }
    if compare || emit.trajectory_svg {
        write_trajectories(dir, &traces)?;
    }
    Ok(status(&outcomes.iter().collect::<Vec<_>>()))
}

fn run_tensors(prepared: &Prepared, dir: &Path, opts: &Options) -> Result<Status> {
    let runs: Vec<&PlannedRun> = prepared.runs.iter().collect();
    let results = run_all(runs, opts.deterministic, |_, run, abort| {
        let label = &run.label;
        let mut current: Option<((usize, usize), Option<TraceFile>)> = None;
        let start = Instant::now();
        let (tensor, outcomes) = effective_tensor_with(&prepared.phases, &run.config, |(i, j), record| {
            abort.check()?;
            if current.as_ref().map(|c| c.0) != Some((i, j)) {
                let file = if prepared.emit.trace {
                    let path = dir.join(format!("trace_{label}_c{}{}.csv", i + 1, j + 1));
                    Some(trace_file(&path).map_err(|e| shom::Error::Io(std::io::Error::other(format!("{e:#}"))))?)
                } else {
                    None
                };
                current = Some(((i, j), file));
            }
            if let Some((_, Some(t))) = current.as_mut() {
                t.push(record)?;
            }
            if opts.verbose && record.n % PROGRESS_EVERY == 0 {
                progress(&format!("{label} c{}{}", i + 1, j + 1), record);
            }
            Ok(())
        })
        .with_context(|| format!("scheme {label}"))?;
        let total: usize = outcomes.iter().map(|o| o.iterations).sum();
        eprintln!(
            "{label}: {} solves, {total} iterations ({:.2} s), L_11 = {:.12}",
            outcomes.len(),
            start.elapsed().as_secs_f64(),
            tensor.entry(0, 0)
        );
        if prepared.emit.dumps {
            for (src, out) in tensor.sources.iter().zip(&outcomes) {
                let load = MacroscopicLoad::new(tensor.physics, tensor.dim, src.load.clone())?;
                let (i, j) = src.components;
                write_dumps(dir, &format!("{label}_c{}{}", i + 1, j + 1), &prepared.phases, &load, out)?;
            }
        }
        Ok((tensor, outcomes))
    })?;
    let rows: Vec<(&str, &EffectiveTensor, &[SolveOutcome])> = prepared
        .runs
        .iter()
        .zip(&results)
        .map(|(r, (t, o))| (r.label.as_str(), t, o.as_slice()))
        .collect();
    write_with(&dir.join("effective.csv"), |w| output::effective_tensors(w, &rows))?;
    Ok(status(&results.iter().flat_map(|(_, o)| o).collect::<Vec<_>>()))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))
}

/// Final strain and stress fields: `(ε̄ + e*, σ)` for strain schemes,
/// `(η, τ)` for the two-field scheme.
fn write_dumps(dir: &Path, stem: &str, phases: &PhaseMap, load: &MacroscopicLoad, out: &SolveOutcome) -> Result<()> {
    let (strain, stress): (TensorField, TensorField) = match out.fields.as_slice() {
        [tau, eta] => (eta.clone(), tau.clone()),
        [e_star] => {
            let mut strain = e_star.clone();
            strain.add_uniform(load.value());
            let stress = phases.stress(&strain)?;
            (strain, stress)
        }
        other => anyhow::bail!("unexpected iterate with {} fields", other.len()),
    };
    for (name, field) in [("strain", &strain), ("stress", &stress)] {
        let path = dir.join(format!("{stem}_{name}.dump"));
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        write_dump(&mut w, field).with_context(|| format!("writing {}", path.display()))?;
        w.flush()?;
    }
    Ok(())
}

fn write_convergence(dir: &Path, traces: &[(&str, &[TraceRecord])], exact: Option<f64>) -> Result<()> {
    let reference = exact.map_or(ErrorReference::FinalValue, ErrorReference::ClosedForm);
    write_with(&dir.join("convergence.csv"), |w| output::convergence_csv(w, traces, reference))?;
    let series: Vec<Series<(f64, f64)>> = traces
        .iter()
        .map(|(label, records)| Series {
            label: label.to_string(),
            points: output::error_history(records, reference).into_iter().map(|(n, e)| (n as f64, e)).collect(),
        })
        .collect();
    let (title, y_label) = match reference {
        ErrorReference::ClosedForm(_) => ("Effective modulus error against the closed form", "|L_n - L_exact| / L_exact"),
        ErrorReference::FinalValue => {
            ("Self-referential error against each run's final value", "|L_n - L_final| / L_final")
        }
    };
    let svg = plot::log_y_plot(title, "iteration", y_label, &series);
    write_with(&dir.join("convergence.svg"), |w| w.write_all(svg.as_bytes()))
}

fn write_trajectories(dir: &Path, traces: &[(&str, &[TraceRecord])]) -> Result<()> {
    write_with(&dir.join("trajectory.csv"), |w| output::trajectory_csv(w, traces))?;
    let series: Vec<Series<[f64; 3]>> = traces
        .iter()
        .map(|(label, records)| Series {
            label: label.to_string(),
            points: records.iter().map(|r| trajectory_from_parts(&r.parts)).collect(),
        })
        .collect();
    let floor = plot::trajectory_floor(&series);
    let svg = plot::trajectory_plot(
        "Iterates in error space",
        ["constitutive (x)", "compatibility (y)", "equilibrium (z)"],
        floor,
        &series,
    );
    write_with(&dir.join("trajectory.svg"), |w| w.write_all(svg.as_bytes()))
}
