//! Iterative minimizers over the energetic Hilbert spaces.
//!
//! Every scheme works on an iterate made of one field (`e*` for `J` and `N`)
//! or two fields (`(τ, η)` for `P`), with the scalar product `⟨·,·⟩ₑ` or
//! `⟨·,·⟩ₛ + ⟨·,·⟩ₑ`. For linear phases the functionals are quadratic,
//! `∇F(χ) = Tχ − t`, and `Tp` is obtained as the gradient under zero load.

use std::io::Write;

use crate::constitutive::PhaseMap;
use crate::error::{Error, Result};
use crate::field::{MacroscopicLoad, TensorField};
use crate::functionals::{eval_j, eval_n, eval_p, FunctionalEval, Parts};
use crate::homogenize::{default_reference, HomogProblem};
use crate::stiffness::Stiffness;

/// Functional being minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Functional {
    /// Energy of the strain fluctuation.
    J,
    /// Squared norm of the gradient of `J`.
    N,
    /// Two-field error functional `ΔCompat + ΔConst + ΔEquil`.
    P,
}

impl Functional {
    pub fn label(self) -> &'static str {
        match self {
            Functional::J => "j",
            Functional::N => "n",
            Functional::P => "p",
        }
    }

    /// Number of fields in an iterate.
    pub fn arity(self) -> usize {
        match self {
            Functional::P => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BetaRule {
    FletcherReeves,
    PolakRibiere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// `χ ← χ − ∇J(χ)`.
    FixedStep,
    /// Steepest descent with exact step.
    OptimalStep,
    /// Conjugate gradient for quadratic functionals.
    LinearCg,
    /// Conjugate gradient with a line search.
    NonlinearCg(BetaRule),
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::FixedStep => "fixed",
            Scheme::OptimalStep => "optimal",
            Scheme::LinearCg => "cg",
            Scheme::NonlinearCg(BetaRule::FletcherReeves) => "ncg-fr",
            Scheme::NonlinearCg(BetaRule::PolakRibiere) => "ncg-pr",
        }
    }
}

/// Choice of the reference medium `L₀`.
#[derive(Debug, Clone)]
pub enum ReferenceChoice {
    /// Derived from the phase moduli, see [`default_reference`].
    Default,
    /// `l₀·I`.
    Scalar(f64),
    Custom(Stiffness),
}

/// Initial iterate.
#[derive(Debug, Clone)]
pub enum InitChoice {
    /// `e* = 0`, or `(τ, η) = (L₀ε̄, ε̄)`.
    Default,
    /// `(τ, η) = (1, ε̄)`: every stress component equal to one.
    UnitStress,
    /// Explicit fields, one or two according to the functional.
    Fields(Vec<TensorField>),
}

/// Scheme, functional and stopping parameters of one run.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub functional: Functional,
    pub max_iter: usize,
    /// `δ`: stop when `‖∇F‖ / ‖ε̄‖ₑ ≤ δ`.
    pub tol_grad: f64,
    /// `δ''`: for `N` and `P`, stop when `F ≤ δ''·½ ε̄:L₀ε̄`.
    pub tol_value: f64,
    /// `δ'`: level of `‖div σ‖ / |L₀ε̄|` reported as an event, never a stop
    /// rule.
    pub tol_div: Option<f64>,
    pub reference: ReferenceChoice,
    pub init: InitChoice,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, functional: Functional) -> Self {
        Self {
            scheme,
            functional,
            max_iter: 10_000,
            tol_grad: 1e-8,
            tol_value: 1e-14,
            tol_div: None,
            reference: ReferenceChoice::Default,
            init: InitChoice::Default,
        }
    }

    pub fn with_max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    pub fn with_tolerances(mut self, grad: f64, value: f64) -> Self {
        self.tol_grad = grad;
        self.tol_value = value;
        self
    }

    pub fn with_reference(mut self, reference: ReferenceChoice) -> Self {
        self.reference = reference;
        self
    }

    pub fn with_init(mut self, init: InitChoice) -> Self {
        self.init = init;
        self
    }

    /// `<scheme>-<functional>`, used in file names.
    pub fn label(&self) -> String {
        format!("{}-{}", self.scheme.label(), self.functional.label())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("tol_grad", self.tol_grad)?;
        positive("tol_value", self.tol_value)?;
        if let Some(d) = self.tol_div {
            positive("tol_div", d)?;
        }
        if self.scheme == Scheme::FixedStep && self.functional != Functional::J {
            return Err(Error::Config("the fixed-step scheme applies to the functional J only".into()));
        }
        if let ReferenceChoice::Scalar(v) = self.reference {
            positive("reference modulus", v)?;
        }
        if let InitChoice::Fields(f) = &self.init {
            if f.len() != self.functional.arity() {
                return Err(Error::Config(format!(
                    "functional {:?} takes {} initial field(s), got {}",
                    self.functional,
                    self.functional.arity(),
                    f.len()
                )));
            }
        }
        Ok(())
    }
}

/// Criterion that ended a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Normalized gradient norm below `δ`.
    Gradient,
    /// Normalized functional value below `δ''`.
    Value,
    MaxIter,
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub n: usize,
    pub value: f64,
    /// `‖∇F‖ / ‖ε̄‖ₑ`.
    pub grad_norm: f64,
    pub parts: Parts,
    /// `‖div σ‖_{L²}` of the stress iterate.
    pub div_norm: f64,
    /// Effective quadratic form divided by `|ε̄|²`.
    pub leff: f64,
}

/// Non-row events: restarts, line-search fallbacks, divergence level.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub n: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
    pub events: Vec<TraceEvent>,
}

/// CSV header of trace files.
pub const TRACE_HEADER: &str = "n,value,grad_norm,d_compat,d_const,d_equil,div_norm,Leff_11";

impl TraceRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.n,
            self.value,
            self.grad_norm,
            self.parts.compat,
            self.parts.constitutive,
            self.parts.equilibrium,
            self.div_norm,
            self.leff
        )
    }
}

impl IterationTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.records {
            writeln!(w, "{}", r.csv_row())?;
        }
        Ok(())
    }

    pub fn restarts(&self) -> usize {
        self.events.iter().filter(|e| e.message.starts_with("restart")).count()
    }
}

/// Streams trace rows to a writer, flushing after each one.
pub struct TraceWriter<W: Write> {
    inner: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut inner: W) -> std::io::Result<Self> {
        writeln!(inner, "{TRACE_HEADER}")?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn push(&mut self, record: &TraceRecord) -> std::io::Result<()> {
        writeln!(self.inner, "{}", record.csv_row())?;
        self.inner.flush()
    }
}

/// Result of a run.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Final iterate: `[e*]` or `[τ, η]`.
    pub fields: Vec<TensorField>,
    pub trace: IterationTrace,
    pub stop: StopReason,
    pub iterations: usize,
    pub reference: Stiffness,
    /// `L̄ε̄:ε̄` estimate at the final iterate.
    pub effective_form: f64,
    /// `⟨σ⟩` (strain schemes) or `⟨τ⟩` (two-field scheme).
    pub mean_stress: Vec<f64>,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.stop != StopReason::MaxIter
    }
}

type Iterate = Vec<TensorField>;

struct Eval {
    value: f64,
    grad: Iterate,
    parts: Parts,
    div_norm: f64,
    effective_form: f64,
}

/// The functional in iterate form.
struct Objective<'a> {
    functional: Functional,
    problem: &'a HomogProblem,
    zero_load: MacroscopicLoad,
}

impl<'a> Objective<'a> {
    fn new(functional: Functional, problem: &'a HomogProblem) -> Result<Self> {
        let load = problem.load();
        let zero_load = MacroscopicLoad::new(load.physics(), load.dim(), vec![0.0; load.value().len()])?;
        Ok(Self { functional, problem, zero_load })
    }

    fn is_quadratic(&self) -> bool {
        self.problem.phases().is_linear()
    }

    fn eval_with(&self, x: &[TensorField], load: &MacroscopicLoad) -> Result<Eval> {
        let (phases, green) = (self.problem.phases(), self.problem.green());
        let e: FunctionalEval = match self.functional {
            Functional::J => eval_j(&x[0], load, phases, green)?,
            Functional::N => eval_n(&x[0], load, phases, green)?,
            Functional::P => eval_p(&x[0], &x[1], load, phases, green)?,
        };
        let grad = match self.functional {
            Functional::P => vec![e.grad_s.expect("stress gradient"), e.grad_e.expect("strain gradient")],
            _ => vec![e.grad_e.expect("strain gradient")],
        };
        Ok(Eval { value: e.value, grad, parts: e.parts, div_norm: e.div_norm, effective_form: e.effective_form })
    }

    fn eval(&self, x: &[TensorField]) -> Result<Eval> {
        self.eval_with(x, self.problem.load())
    }

    /// `Tp` for quadratic functionals.
    fn apply_t(&self, p: &[TensorField]) -> Result<Iterate> {
        Ok(self.eval_with(p, &self.zero_load)?.grad)
    }

    fn dot(&self, a: &[TensorField], b: &[TensorField]) -> Result<f64> {
        let l0 = self.problem.reference();
        match self.functional {
            Functional::P => Ok(a[0].dot_s(&b[0], l0)? + a[1].dot_e(&b[1], l0)?),
            _ => a[0].dot_e(&b[0], l0),
        }
    }

    fn mean_stress(&self, x: &[TensorField]) -> Result<Vec<f64>> {
        match self.functional {
            Functional::P => Ok(x[0].average()),
            _ => {
                let mut strain = x[0].clone();
                strain.add_uniform(self.problem.load().value());
                Ok(self.problem.phases().stress(&strain)?.average())
            }
        }
    }
}

fn axpy(y: &mut [TensorField], alpha: f64, x: &[TensorField]) {
    for (a, b) in y.iter_mut().zip(x) {
        a.axpy(alpha, b);
    }
}

fn scaled(x: &[TensorField], alpha: f64) -> Iterate {
    x.iter().map(|f| f.scaled(alpha)).collect()
}

/// Per-scheme state carried between iterations.
enum State {
    Plain,
    Cg { r: Iterate, p: Iterate, rr: f64 },
    Ncg { d: Iterate, gg: f64, last_step: f64, last_slope: f64 },
}

/// Stepwise driver of one run. The problem (with its reference medium) is
/// owned so that a minimizer can be kept between calls.
pub struct Minimizer {
    cfg: SchemeConfig,
    problem: HomogProblem,
    x: Iterate,
    current: Eval,
    state: State,
    n: usize,
    trace: IterationTrace,
    grad_scale: f64,
    value_scale: f64,
    rising: usize,
    div_reported: bool,
    stop: Option<StopReason>,
}

/// Line search stops when the bracket is this small relative to the step.
const LINE_SEARCH_STEP_TOL: f64 = 1e-10;
/// ... or when the directional derivative has dropped by this factor.
const LINE_SEARCH_SLOPE_TOL: f64 = 1e-12;
const LINE_SEARCH_MAX_EVALS: usize = 40;
/// Consecutive increases of `J` that count as divergence of the fixed step.
const DIVERGENCE_WINDOW: usize = 10;
/// Conjugacy loss threshold on `⟨r_{n+1}, r_n⟩ / ‖r_n‖²`.
const RESTART_THRESHOLD: f64 = 0.5;

impl Minimizer {
    /// Builds the problem with the configured reference medium.
    pub fn new(cfg: SchemeConfig, phases: PhaseMap, load: MacroscopicLoad) -> Result<Self> {
        cfg.validate()?;
        let reference = match &cfg.reference {
            ReferenceChoice::Default => default_reference(&phases, cfg.functional, &load)?,
            ReferenceChoice::Scalar(v) => Stiffness::scaled_identity(phases.physics(), phases.grid().ndim(), *v)?,
            ReferenceChoice::Custom(s) => s.clone(),
        };
        let problem = HomogProblem::new(phases, load, reference)?;
        Self::with_problem(cfg, problem)
    }

    /// Uses the problem's own reference medium; `cfg.reference` is ignored.
    pub fn with_problem(cfg: SchemeConfig, problem: HomogProblem) -> Result<Self> {
        cfg.validate()?;
        let linear = problem.phases().is_linear();
        if cfg.scheme == Scheme::LinearCg && !linear {
            return Err(Error::Config("linear conjugate gradient needs linear phases; use nonlinear CG".into()));
        }
        if cfg.functional == Functional::N && !linear {
            return Err(Error::Config("the functional N is defined for linear phases only".into()));
        }
        let load_energy = problem.load_energy();
        if load_energy <= 0.0 {
            return Err(Error::Config("the macroscopic load must be nonzero".into()));
        }
        let x = initial_iterate(&cfg, &problem)?;
        let (current, state) = {
            let obj = Objective::new(cfg.functional, &problem)?;
            let current = obj.eval(&x)?;
            let state = match cfg.scheme {
                Scheme::FixedStep | Scheme::OptimalStep => State::Plain,
                Scheme::LinearCg => {
                    let r = scaled(&current.grad, -1.0);
                    let rr = obj.dot(&r, &r)?;
                    State::Cg { p: r.clone(), r, rr }
                }
                Scheme::NonlinearCg(_) => {
                    let gg = obj.dot(&current.grad, &current.grad)?;
                    State::Ncg { d: scaled(&current.grad, -1.0), gg, last_step: 1.0, last_slope: -gg }
                }
            };
            (current, state)
        };
        let mut m = Self {
            cfg,
            problem,
            x,
            current,
            state,
            n: 0,
            trace: IterationTrace::default(),
            grad_scale: load_energy.sqrt(),
            value_scale: 0.5 * load_energy,
            rising: 0,
            div_reported: false,
            stop: None,
        };
        m.record()?;
        Ok(m)
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn problem(&self) -> &HomogProblem {
        &self.problem
    }

    pub fn iterate(&self) -> &[TensorField] {
        &self.x
    }

    pub fn iteration(&self) -> usize {
        self.n
    }

    pub fn trace(&self) -> &IterationTrace {
        &self.trace
    }

    pub fn last_record(&self) -> &TraceRecord {
        self.trace.records.last().expect("initial record")
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    fn record(&mut self) -> Result<()> {
        let obj = Objective::new(self.cfg.functional, &self.problem)?;
        let gnorm = obj.dot(&self.current.grad, &self.current.grad)?.max(0.0).sqrt();
        let record = TraceRecord {
            n: self.n,
            value: self.current.value,
            grad_norm: gnorm / self.grad_scale,
            parts: self.current.parts,
            div_norm: self.current.div_norm,
            leff: self.current.effective_form / self.problem.load().norm_squared(),
        };
        if let Some(tol) = self.cfg.tol_div {
            let mut l0_load = vec![0.0; self.problem.load().value().len()];
            self.problem.reference().apply(self.problem.load().value(), &mut l0_load);
            let scale = l0_load.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !self.div_reported && record.div_norm <= tol * scale {
                self.div_reported = true;
                self.trace.events.push(TraceEvent { n: self.n, message: "divergence level reached".into() });
            }
        }
        self.trace.records.push(record);
        Ok(())
    }

    /// Which stopping criterion holds at the current iterate, if any.
    pub fn check_stop(&self) -> Option<StopReason> {
        let r = self.last_record();
        if r.grad_norm <= self.cfg.tol_grad {
            return Some(StopReason::Gradient);
        }
        if matches!(self.cfg.functional, Functional::N | Functional::P)
            && r.value <= self.cfg.tol_value * self.value_scale
        {
            return Some(StopReason::Value);
        }
        if self.n >= self.cfg.max_iter {
            return Some(StopReason::MaxIter);
        }
        None
    }

    /// Performs one iteration unless a stopping criterion already holds.
    /// Returns the criterion once the run is over.
    pub fn step(&mut self) -> Result<Option<StopReason>> {
        if let Some(stop) = self.stop {
            return Ok(Some(stop));
        }
        if let Some(stop) = self.check_stop() {
            self.stop = Some(stop);
            return Ok(Some(stop));
        }
        let previous = self.current.value;
        match self.cfg.scheme {
            Scheme::FixedStep => self.fixed_step()?,
            Scheme::OptimalStep => self.optimal_step()?,
            Scheme::LinearCg => self.cg_step()?,
            Scheme::NonlinearCg(rule) => self.ncg_step(rule)?,
        }
        self.n += 1;
        self.record()?;
        if self.current.value > previous {
            self.rising += 1;
        } else {
            self.rising = 0;
        }
        if self.cfg.scheme == Scheme::FixedStep && self.rising >= DIVERGENCE_WINDOW {
            return Err(Error::Diverged {
                iterations: self.n,
                reason: format!(
                    "J increased for {DIVERGENCE_WINDOW} consecutive iterations; choose a reference medium \
                     between the phase moduli, e.g. their arithmetic mean"
                ),
            });
        }
        Ok(None)
    }

    fn fixed_step(&mut self) -> Result<()> {
        axpy(&mut self.x, -1.0, &self.current.grad);
        self.current = Objective::new(self.cfg.functional, &self.problem)?.eval(&self.x)?;
        Ok(())
    }

    fn optimal_step(&mut self) -> Result<()> {
        let obj = Objective::new(self.cfg.functional, &self.problem)?;
        if obj.is_quadratic() {
            let p = &self.current.grad;
            let tp = obj.apply_t(p)?;
            let ptp = obj.dot(&tp, p)?;
            if !(ptp > 0.0) {
                return Err(Error::Breakdown(format!("⟨Tp, p⟩ = {ptp:e} is not positive")));
            }
            let rho = -obj.dot(p, p)? / ptp;
            let p = p.clone();
            axpy(&mut self.x, rho, &p);
            self.current = obj.eval(&self.x)?;
        } else {
            let d = scaled(&self.current.grad, -1.0);
            let (_, x, ev) = line_search(&obj, &self.x, &self.current, &d, 1.0)?;
            self.x = x;
            self.current = ev;
        }
        Ok(())
    }

    fn cg_step(&mut self) -> Result<()> {
        let obj = Objective::new(self.cfg.functional, &self.problem)?;
        let State::Cg { r, p, rr } = &mut self.state else { unreachable!("CG state") };
        let tp = obj.apply_t(p)?;
        let ptp = obj.dot(p, &tp)?;
        if !(ptp > 0.0) {
            return Err(Error::Breakdown(format!("⟨Tp, p⟩ = {ptp:e} is not positive")));
        }
        let alpha = *rr / ptp;
        axpy(&mut self.x, alpha, p);
        self.current = obj.eval(&self.x)?;
        let r_new = scaled(&self.current.grad, -1.0);
        let rr_new = obj.dot(&r_new, &r_new)?;
        let overlap = obj.dot(&r_new, r)? / *rr;
        if overlap > RESTART_THRESHOLD {
            *p = r_new.clone();
            self.trace.events.push(TraceEvent { n: self.n + 1, message: format!("restart (overlap {overlap:.3})") });
        } else {
            let beta = rr_new / *rr;
            for (pi, ri) in p.iter_mut().zip(&r_new) {
                pi.scale(beta);
                pi.axpy(1.0, ri);
            }
        }
        *r = r_new;
        *rr = rr_new;
        Ok(())
    }

    fn ncg_step(&mut self, rule: BetaRule) -> Result<()> {
        let obj = Objective::new(self.cfg.functional, &self.problem)?;
        let State::Ncg { d, gg, last_step, last_slope } = &mut self.state else { unreachable!("NCG state") };
        let mut slope = obj.dot(&self.current.grad, d)?;
        if !(slope < 0.0) {
            *d = scaled(&self.current.grad, -1.0);
            slope = -*gg;
            self.trace.events.push(TraceEvent { n: self.n + 1, message: "restart (not a descent direction)".into() });
        }
        let guess = (*last_step * *last_slope / slope).clamp(1e-12, 1e12);
        let (alpha, x, ev) = line_search(&obj, &self.x, &self.current, d, guess)?;
        let g_old = std::mem::replace(&mut self.current, ev).grad;
        self.x = x;
        let g = &self.current.grad;
        let gg_new = obj.dot(g, g)?;
        let overlap = obj.dot(g, &g_old)? / *gg;
        let beta = match rule {
            BetaRule::FletcherReeves => gg_new / *gg,
            BetaRule::PolakRibiere => ((gg_new - obj.dot(g, &g_old)?) / *gg).max(0.0),
        };
        if overlap > RESTART_THRESHOLD {
            *d = scaled(g, -1.0);
            self.trace.events.push(TraceEvent { n: self.n + 1, message: format!("restart (overlap {overlap:.3})") });
        } else {
            for (di, gi) in d.iter_mut().zip(g) {
                di.scale(beta);
                di.axpy(-1.0, gi);
            }
        }
        *last_step = alpha;
        *last_slope = slope;
        *gg = gg_new;
        Ok(())
    }

    /// Runs to completion.
    pub fn run(self) -> Result<SolveOutcome> {
        self.run_with(|_, _| Ok(()))
    }

    /// Runs to completion, calling `observer` after the initial evaluation
    /// and after every iteration.
    pub fn run_with(
        mut self,
        mut observer: impl FnMut(&TraceRecord, &[TensorField]) -> Result<()>,
    ) -> Result<SolveOutcome> {
        observer(self.last_record(), &self.x)?;
        let stop = loop {
            if let Some(stop) = self.step()? {
                break stop;
            }
            observer(self.last_record(), &self.x)?;
        };
        self.finish(stop)
    }

    fn finish(self, stop: StopReason) -> Result<SolveOutcome> {
        let obj = Objective::new(self.cfg.functional, &self.problem)?;
        let mean_stress = obj.mean_stress(&self.x)?;
        Ok(SolveOutcome {
            iterations: self.n,
            stop,
            effective_form: self.current.effective_form,
            mean_stress,
            reference: self.problem.reference().clone(),
            trace: self.trace,
            fields: self.x,
        })
    }
}

fn initial_iterate(cfg: &SchemeConfig, problem: &HomogProblem) -> Result<Iterate> {
    let grid = *problem.grid();
    let physics = problem.physics();
    let load = problem.load();
    match (&cfg.init, cfg.functional) {
        (InitChoice::Fields(fields), _) => {
            for f in fields {
                if f.grid() != &grid || f.physics() != physics {
                    return Err(Error::Config("initial field does not match the problem".into()));
                }
            }
            Ok(fields.clone())
        }
        (InitChoice::Default, Functional::P) => {
            let mut l0_load = vec![0.0; load.value().len()];
            problem.reference().apply(load.value(), &mut l0_load);
            Ok(vec![TensorField::uniform(grid, physics, &l0_load)?, load.as_field(grid)?])
        }
        (InitChoice::UnitStress, Functional::P) => {
            let ones = vec![1.0; load.value().len()];
            Ok(vec![TensorField::uniform(grid, physics, &ones)?, load.as_field(grid)?])
        }
        (InitChoice::UnitStress, _) => {
            Err(Error::Config("the unit-stress initialization applies to the functional P only".into()))
        }
        (InitChoice::Default, _) => Ok(vec![TensorField::zeros(grid, physics)]),
    }
}

/// Minimizes `φ(α) = F(x + α d)` by bracketing the root of `φ'` and
/// refining it with Illinois false position, which is exact after one
/// secant step when `φ` is quadratic. Returns the step, the new iterate and
/// its evaluation.
fn line_search(obj: &Objective, x: &[TensorField], at_x: &Eval, d: &[TensorField], guess: f64) -> Result<(f64, Iterate, Eval)> {
    let s0 = obj.dot(&at_x.grad, d)?;
    if !(s0 < 0.0) {
        return Err(Error::LineSearch(format!("direction is not a descent direction (slope {s0:e})")));
    }
    let probe = |alpha: f64| -> Result<(Iterate, Eval, f64)> {
        let mut y: Iterate = x.to_vec();
        axpy(&mut y, alpha, d);
        let ev = obj.eval(&y)?;
        let s = obj.dot(&ev.grad, d)?;
        Ok((y, ev, s))
    };
    let accept = |s: f64| s.abs() <= LINE_SEARCH_SLOPE_TOL * s0.abs();
    let mut evals = 0;

    // Bracket: lo has negative slope, hi nonnegative.
    let (mut a_lo, mut s_lo) = (0.0, s0);
    let mut alpha = guess;
    let mut best: Option<(f64, Iterate, Eval)> = None;
    let (mut a_hi, mut s_hi);
    loop {
        let (y, ev, s) = probe(alpha)?;
        evals += 1;
        if accept(s) {
            return Ok((alpha, y, ev));
        }
        if s >= 0.0 {
            a_hi = alpha;
            s_hi = s;
            if best.as_ref().is_none_or(|b| ev.value < b.2.value) {
                best = Some((alpha, y, ev));
            }
            break;
        }
        let next = if s > s_lo { alpha - s * (alpha - a_lo) / (s - s_lo) } else { 2.0 * alpha };
        a_lo = alpha;
        s_lo = s;
        best = Some((alpha, y, ev));
        alpha = next.clamp(2.0 * a_lo, 100.0 * a_lo);
        if evals >= LINE_SEARCH_MAX_EVALS {
            return Err(Error::LineSearch("could not bracket the minimum".into()));
        }
    }

    // Illinois false position on φ'.
    let mut side = 0i8;
    while evals < LINE_SEARCH_MAX_EVALS {
        let a = a_lo - s_lo * (a_hi - a_lo) / (s_hi - s_lo);
        let a = if a > a_lo && a < a_hi { a } else { 0.5 * (a_lo + a_hi) };
        let (y, ev, s) = probe(a)?;
        evals += 1;
        let width = a_hi - a_lo;
        if accept(s) || width <= LINE_SEARCH_STEP_TOL * a {
            return Ok((a, y, ev));
        }
        let better = best.as_ref().is_none_or(|b| ev.value < b.2.value);
        if s < 0.0 {
            a_lo = a;
            s_lo = s;
            if side == -1 {
                s_hi *= 0.5;
            }
            side = -1;
        } else {
            a_hi = a;
            s_hi = s;
            if side == 1 {
                s_lo *= 0.5;
            }
            side = 1;
        }
        if better {
            best = Some((a, y, ev));
        }
    }
    match best {
        Some((a, y, ev)) if ev.value <= at_x.value => Ok((a, y, ev)),
        _ => Err(Error::LineSearch(format!("no decrease within {LINE_SEARCH_MAX_EVALS} evaluations"))),
    }
}

/// Runs one configuration on a microstructure and load.
pub fn solve(cfg: &SchemeConfig, phases: &PhaseMap, load: &MacroscopicLoad) -> Result<SolveOutcome> {
    Minimizer::new(cfg.clone(), phases.clone(), load.clone())?.run()
}

/// Runs one configuration on an assembled problem, keeping its reference
/// medium.
pub fn solve_problem(cfg: &SchemeConfig, problem: HomogProblem) -> Result<SolveOutcome> {
    Minimizer::with_problem(cfg.clone(), problem)?.run()
}
