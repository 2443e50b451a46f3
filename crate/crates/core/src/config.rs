//! Run specifications and figure presets.
//!
//! A run is described by a TOML document. Every key is optional; an empty
//! document gives a single-top echo at `J = 200`, `α = 30`, `δ = 10⁻³` from the
//! coherent state at `(θ, φ) = (1, 1)`.
//!
//! ```toml
//! experiment = "echo"   # echo | renorm-echo | classical-echo | predict | sigma | sweep | figure
//! name = "run"          # output subdirectory
//! out = "out"
//! seed = 1
//! workers = 1
//!
//! [model]
//! kind = "single"       # single | coupled
//! j = 200               # even integer
//! alpha = 30.0          # single-top kick strength
//! eps = 20.0            # coupled-tops coupling
//! symmetry_classes = 1
//! dimension_cap = 12000
//!
//! [echo]
//! delta = 1e-3
//! state = "cis"         # cis | ris
//! theta = 1.0
//! phi = 1.0
//! n_max = 100000        # omitted: chosen from the predicted decay
//! grid = "log"          # log | linear
//! per_decade = 60
//! max_samples = 512
//! step = 1              # linear grid spacing, ignored on the log grid
//! norm_checks = 16
//! plateau_prefactor = 0.97   # renorm-echo only; omitted: exact plateau
//!
//! [classical]
//! trajectories = 100000
//! n_max = 10
//! estimator = "grid"    # grid | kernel
//! bands = 128
//! sectors = 256
//!
//! [sigma]
//! n_cut = 50
//! ensemble = 100000
//! value = 5.1e-3        # omitted: tabulated value for the model family
//!
//! [sweep]
//! deltas = [1e-3, 1e-2]
//! states = ["cis", "ris"]
//! seeds = [1]
//! renormalized = false
//!
//! [figure]
//! name = "fig1a"        # fig1a | fig1b | fig2 | fig3a | fig3b
//! scale = 1.0
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::classical_echo::OverlapEstimator;
use crate::echo::{linear_grid, log_grid, EchoMode, EchoRunConfig, DEFAULT_MAX_SAMPLES, DEFAULT_PER_DECADE};
use crate::error::{FreezeError, Result};
use crate::models::{coupled_tops_capped, single_top_capped, InitialState, ModelKind, TopModel, DEFAULT_DIMENSION_CAP};
use crate::semiclassics::{
    crossover_delta, heisenberg_time, kappa_cl_sq, DecayRegime, PredictionSet, SigmaSource, StateKind, SIGMA_COUPLED_TOPS,
    SIGMA_SINGLE_TOP,
};
use crate::spin::SpinRep;

/// Decay of `F/F_plat` that the automatic `n_max` is chosen to reach.
pub const AUTO_DECAY_TARGET: f64 = 1e-3;
/// Largest automatic `n_max`.
pub const AUTO_N_MAX_CAP: u64 = 10_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Echo,
    RenormEcho,
    ClassicalEcho,
    Predict,
    Sigma,
    Sweep,
    Figure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    Single,
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateChoice {
    Cis,
    Ris,
}

impl From<StateChoice> for StateKind {
    fn from(s: StateChoice) -> Self {
        match s {
            StateChoice::Cis => StateKind::Cis,
            StateChoice::Ris => StateKind::Ris,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridChoice {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    Grid,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureName {
    Fig1a,
    Fig1b,
    Fig2,
    Fig3a,
    Fig3b,
}

impl FigureName {
    pub const ALL: [FigureName; 5] = [Self::Fig1a, Self::Fig1b, Self::Fig2, Self::Fig3a, Self::Fig3b];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fig1a => "fig1a",
            Self::Fig1b => "fig1b",
            Self::Fig2 => "fig2",
            Self::Fig3a => "fig3a",
            Self::Fig3b => "fig3b",
        }
    }
}

impl fmt::Display for FigureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FigureName {
    type Err = FreezeError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| FreezeError::InvalidConfig(format!("unknown figure `{s}` (expected fig1a, fig1b, fig2, fig3a or fig3b)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelChoice,
    pub j: u32,
    pub alpha: f64,
    pub eps: f64,
    pub symmetry_classes: usize,
    pub dimension_cap: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { kind: ModelChoice::Single, j: 200, alpha: 30.0, eps: 20.0, symmetry_classes: 1, dimension_cap: DEFAULT_DIMENSION_CAP }
    }
}

impl ModelSpec {
    pub fn hbar(&self) -> f64 {
        1.0 / self.j as f64
    }

    pub fn degrees_of_freedom(&self) -> usize {
        match self.kind {
            ModelChoice::Single => 1,
            ModelChoice::Coupled => 2,
        }
    }

    /// Subspace dimension `N` without building the model.
    pub fn subspace_dim(&self) -> usize {
        let j = self.j as usize;
        match self.kind {
            ModelChoice::Single => j,
            ModelChoice::Coupled => j * (j + 1),
        }
    }

    pub fn model_kind(&self) -> ModelKind {
        match self.kind {
            ModelChoice::Single => ModelKind::Single { alpha: self.alpha },
            ModelChoice::Coupled => ModelKind::Coupled { eps: self.eps },
        }
    }

    pub fn tabulated_sigma(&self) -> f64 {
        match self.kind {
            ModelChoice::Single => SIGMA_SINGLE_TOP,
            ModelChoice::Coupled => SIGMA_COUPLED_TOPS,
        }
    }

    pub fn build(&self) -> Result<TopModel> {
        let rep = SpinRep::new(self.j as f64)?;
        let model = match self.kind {
            ModelChoice::Single => single_top_capped(rep, self.alpha, self.dimension_cap)?,
            ModelChoice::Coupled => coupled_tops_capped(rep, self.eps, self.dimension_cap)?,
        };
        Ok(model.with_symmetry_classes(self.symmetry_classes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoSpec {
    pub delta: f64,
    pub state: StateChoice,
    pub theta: f64,
    pub phi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u64>,
    pub grid: GridChoice,
    pub per_decade: usize,
    pub max_samples: usize,
    pub step: u64,
    pub norm_checks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plateau_prefactor: Option<f64>,
}

impl Default for EchoSpec {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            state: StateChoice::Cis,
            theta: 1.0,
            phi: 1.0,
            n_max: None,
            grid: GridChoice::Log,
            per_decade: DEFAULT_PER_DECADE,
            max_samples: DEFAULT_MAX_SAMPLES,
            step: 1,
            norm_checks: 16,
            plateau_prefactor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSpec {
    pub trajectories: usize,
    pub n_max: u64,
    pub estimator: EstimatorChoice,
    pub bands: usize,
    pub sectors: usize,
}

impl Default for ClassicalSpec {
    fn default() -> Self {
        Self { trajectories: 100_000, n_max: 10, estimator: EstimatorChoice::Grid, bands: 128, sectors: 256 }
    }
}

impl ClassicalSpec {
    pub fn overlap_estimator(&self) -> OverlapEstimator {
        match self.estimator {
            EstimatorChoice::Grid => OverlapEstimator::Grid { bands: self.bands, sectors: self.sectors },
            EstimatorChoice::Kernel => OverlapEstimator::Kernel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSpec {
    pub n_cut: usize,
    pub ensemble: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl Default for SigmaSpec {
    fn default() -> Self {
        Self { n_cut: 50, ensemble: 100_000, value: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub deltas: Vec<f64>,
    pub states: Vec<StateChoice>,
    pub seeds: Vec<u64>,
    pub renormalized: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { deltas: Vec::new(), states: vec![StateChoice::Cis], seeds: vec![1], renormalized: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<FigureName>,
    pub scale: f64,
}

impl Default for FigureSpec {
    fn default() -> Self {
        Self { name: None, scale: 1.0 }
    }
}

/// A complete, validated run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub experiment: Experiment,
    pub name: String,
    pub out: String,
    pub seed: u64,
    pub workers: usize,
    pub model: ModelSpec,
    pub echo: EchoSpec,
    pub classical: ClassicalSpec,
    pub sigma: SigmaSpec,
    pub sweep: SweepSpec,
    pub figure: FigureSpec,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            experiment: Experiment::Echo,
            name: "run".into(),
            out: "out".into(),
            seed: 1,
            workers: 1,
            model: ModelSpec::default(),
            echo: EchoSpec::default(),
            classical: ClassicalSpec::default(),
            sigma: SigmaSpec::default(),
            sweep: SweepSpec::default(),
            figure: FigureSpec::default(),
        }
    }
}

/// All problems found in a configuration, one message per problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s):", self.0.len())?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl From<ConfigErrors> for FreezeError {
    fn from(e: ConfigErrors) -> Self {
        FreezeError::InvalidConfig(e.to_string())
    }
}

/// Parse a TOML run description, apply defaults and validate it.
pub fn parse_and_validate(text: &str) -> std::result::Result<RunSpec, ConfigErrors> {
    let mut root: Table = text.parse().map_err(|e: toml::de::Error| ConfigErrors(vec![format!("syntax: {}", e.message())]))?;
    let mut r = Reader::default();
    let d = RunSpec::default();

    let experiment = r.choice(&mut root, "", "experiment", d.experiment, EXPERIMENTS);
    let name = r.string(&mut root, "", "name").unwrap_or(d.name);
    let out = r.string(&mut root, "", "out").unwrap_or(d.out);
    let seed = r.uint(&mut root, "", "seed").unwrap_or(d.seed);
    let workers = r.uint(&mut root, "", "workers").map_or(d.workers, |w| w as usize);

    let mut t = r.section(&mut root, "model");
    let m = ModelSpec::default();
    let model = ModelSpec {
        kind: r.choice(&mut t, "model", "kind", m.kind, MODELS),
        j: r.uint(&mut t, "model", "j").map_or(m.j, |j| j.min(u32::MAX as u64) as u32),
        alpha: r.float(&mut t, "model", "alpha").unwrap_or(m.alpha),
        eps: r.float(&mut t, "model", "eps").unwrap_or(m.eps),
        symmetry_classes: r.uint(&mut t, "model", "symmetry_classes").map_or(m.symmetry_classes, |x| x as usize),
        dimension_cap: r.uint(&mut t, "model", "dimension_cap").map_or(m.dimension_cap, |x| x as usize),
    };
    r.finish(t, "model");

    let mut t = r.section(&mut root, "echo");
    let e = EchoSpec::default();
    let echo = EchoSpec {
        delta: r.float(&mut t, "echo", "delta").unwrap_or(e.delta),
        state: r.choice(&mut t, "echo", "state", e.state, STATES),
        theta: r.float(&mut t, "echo", "theta").unwrap_or(e.theta),
        phi: r.float(&mut t, "echo", "phi").unwrap_or(e.phi),
        n_max: r.uint(&mut t, "echo", "n_max"),
        grid: r.choice(&mut t, "echo", "grid", e.grid, GRIDS),
        per_decade: r.uint(&mut t, "echo", "per_decade").map_or(e.per_decade, |x| x as usize),
        max_samples: r.uint(&mut t, "echo", "max_samples").map_or(e.max_samples, |x| x as usize),
        step: r.uint(&mut t, "echo", "step").unwrap_or(e.step),
        norm_checks: r.uint(&mut t, "echo", "norm_checks").map_or(e.norm_checks, |x| x as usize),
        plateau_prefactor: r.float(&mut t, "echo", "plateau_prefactor"),
    };
    r.finish(t, "echo");

    let mut t = r.section(&mut root, "classical");
    let c = ClassicalSpec::default();
    let classical = ClassicalSpec {
        trajectories: r.uint(&mut t, "classical", "trajectories").map_or(c.trajectories, |x| x as usize),
        n_max: r.uint(&mut t, "classical", "n_max").unwrap_or(c.n_max),
        estimator: r.choice(&mut t, "classical", "estimator", c.estimator, ESTIMATORS),
        bands: r.uint(&mut t, "classical", "bands").map_or(c.bands, |x| x as usize),
        sectors: r.uint(&mut t, "classical", "sectors").map_or(c.sectors, |x| x as usize),
    };
    r.finish(t, "classical");

    let mut t = r.section(&mut root, "sigma");
    let s = SigmaSpec::default();
    let sigma = SigmaSpec {
        n_cut: r.uint(&mut t, "sigma", "n_cut").map_or(s.n_cut, |x| x as usize),
        ensemble: r.uint(&mut t, "sigma", "ensemble").map_or(s.ensemble, |x| x as usize),
        value: r.float(&mut t, "sigma", "value"),
    };
    r.finish(t, "sigma");

    let mut t = r.section(&mut root, "sweep");
    let w = SweepSpec::default();
    let sweep = SweepSpec {
        deltas: r.list(&mut t, "sweep", "deltas", "numbers", as_float).unwrap_or(w.deltas),
        states: r.list(&mut t, "sweep", "states", "\"cis\" or \"ris\"", |v| lookup(v, STATES)).unwrap_or(w.states),
        seeds: r.list(&mut t, "sweep", "seeds", "nonnegative integers", as_uint).unwrap_or(w.seeds),
        renormalized: r.boolean(&mut t, "sweep", "renormalized").unwrap_or(w.renormalized),
    };
    r.finish(t, "sweep");

    let mut t = r.section(&mut root, "figure");
    let figure = FigureSpec {
        name: r.optional_choice(&mut t, "figure", "name", FIGURES),
        scale: r.float(&mut t, "figure", "scale").unwrap_or(1.0),
    };
    r.finish(t, "figure");
    r.finish(root, "");

    let spec = RunSpec { experiment, name, out, seed, workers, model, echo, classical, sigma, sweep, figure };
    let mut errors = r.errors;
    errors.extend(spec.problems());
    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(ConfigErrors(errors))
    }
}

impl RunSpec {
    /// TOML text that parses back to `self`.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FreezeError::InvalidConfig(format!("cannot serialize run spec: {e}")))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run spec is plain data")
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigErrors> {
        let errors = self.problems();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errors))
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut e = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                e.push(msg);
            }
        };
        let m = &self.model;
        need(self.workers >= 1, "workers must be at least 1".into());
        need(self.seed <= i64::MAX as u64, format!("seed = {} exceeds {}", self.seed, i64::MAX));
        need(!self.name.is_empty() && !self.name.contains(['/', '\\']), format!("name = {:?} must be a plain directory name", self.name));
        need(!self.out.is_empty(), "out must not be empty".into());

        if m.j % 2 == 1 {
            e.push(format!(
                "model.j = {} is odd; the odd-even parity subspace H_OE requires an even integer J (parity requirement)",
                m.j
            ));
        } else if m.j == 0 {
            e.push("model.j must be a positive even integer".into());
        }
        let mut need = |ok: bool, msg: String| {
            if !ok {
                e.push(msg);
            }
        };
        need(m.alpha.is_finite(), format!("model.alpha = {} must be finite", m.alpha));
        need(m.eps.is_finite(), format!("model.eps = {} must be finite", m.eps));
        need(m.symmetry_classes >= 1, "model.symmetry_classes must be at least 1".into());
        need(
            m.j == 0 || m.subspace_dim() <= m.dimension_cap,
            format!("model subspace dimension {} exceeds model.dimension_cap = {}", m.subspace_dim(), m.dimension_cap),
        );

        let x = &self.echo;
        need(x.delta.is_finite(), format!("echo.delta = {} must be finite", x.delta));
        need((0.0..=std::f64::consts::PI).contains(&x.theta), format!("echo.theta = {} must lie in [0, π]", x.theta));
        need(x.phi.is_finite(), format!("echo.phi = {} must be finite", x.phi));
        need(x.n_max.is_none_or(|n| n >= 1), "echo.n_max must be at least 1".into());
        need(x.per_decade >= 1, "echo.per_decade must be at least 1".into());
        need(x.max_samples >= 2, "echo.max_samples must be at least 2".into());
        need(x.step >= 1, "echo.step must be at least 1".into());
        need(
            x.plateau_prefactor.is_none_or(|p| p > 0.0 && p <= 1.0),
            format!("echo.plateau_prefactor = {:?} must lie in (0, 1]", x.plateau_prefactor),
        );
        need(
            x.plateau_prefactor.is_none() || matches!(self.experiment, Experiment::RenormEcho | Experiment::Sweep),
            "echo.plateau_prefactor only applies to renorm-echo runs".into(),
        );

        let c = &self.classical;
        need(c.trajectories >= 2, "classical.trajectories must be at least 2".into());
        need(c.bands >= 1 && c.sectors >= 1, "classical.bands and classical.sectors must be at least 1".into());
        if self.experiment == Experiment::ClassicalEcho {
            need(m.kind == ModelChoice::Single, "classical-echo is only available for the single top (model.kind = \"single\")".into());
            need(x.state == StateChoice::Cis, "classical-echo needs a coherent initial state; a random state has no classical analogue".into());
        }

        let s = &self.sigma;
        need(s.n_cut >= 10, format!("sigma.n_cut = {} must be at least 10", s.n_cut));
        need(s.ensemble >= 2, "sigma.ensemble must be at least 2".into());
        need(s.value.is_none_or(|v| v.is_finite() && v >= 0.0), format!("sigma.value = {:?} must be finite and nonnegative", s.value));

        let w = &self.sweep;
        need(w.deltas.iter().all(|d| d.is_finite()), "sweep.deltas must be finite".into());
        need(w.seeds.iter().all(|&s| s <= i64::MAX as u64), format!("sweep.seeds must not exceed {}", i64::MAX));
        if self.experiment == Experiment::Sweep {
            need(!w.deltas.is_empty(), "sweep runs need a nonempty sweep.deltas".into());
            need(!w.states.is_empty(), "sweep.states must not be empty".into());
            need(!w.seeds.is_empty(), "sweep.seeds must not be empty".into());
        }

        let f = &self.figure;
        need(f.scale > 0.0 && f.scale <= 1.0, format!("figure.scale = {} must lie in (0, 1]", f.scale));
        if self.experiment == Experiment::Figure {
            need(f.name.is_some(), "figure runs need figure.name".into());
        }
        e
    }

    pub fn initial_state(&self) -> InitialState {
        match self.echo.state {
            StateChoice::Cis => InitialState::Cis { theta: self.echo.theta, phi: self.echo.phi },
            StateChoice::Ris => InitialState::Ris { seed: self.seed },
        }
    }

    pub fn sigma_value(&self) -> (f64, SigmaSource) {
        match self.sigma.value {
            Some(v) => (v, SigmaSource::User),
            None => (self.model.tabulated_sigma(), SigmaSource::Tabulated),
        }
    }

    /// Predictions computed from the spec alone, without building the model.
    pub fn predictions(&self) -> Result<PredictionSet> {
        let (sigma, source) = self.sigma_value();
        let m = &self.model;
        PredictionSet::build(self.echo.delta, m.hbar(), m.degrees_of_freedom(), m.subspace_dim(), m.symmetry_classes, sigma, source)
    }

    /// `echo.n_max`, or the automatic choice when it is unset.
    pub fn resolved_n_max(&self) -> Result<u64> {
        match self.echo.n_max {
            Some(n) => Ok(n),
            None => Ok(auto_n_max(&self.predictions()?, self.echo.state.into())),
        }
    }

    pub fn echo_mode(&self) -> EchoMode {
        match self.experiment {
            Experiment::RenormEcho => EchoMode::Renormalized,
            Experiment::Sweep if self.sweep.renormalized => EchoMode::Renormalized,
            _ => EchoMode::Direct,
        }
    }

    pub fn echo_config(&self) -> Result<EchoRunConfig> {
        let n_max = self.resolved_n_max()?;
        let times = match self.echo.grid {
            GridChoice::Log => log_grid(n_max, self.echo.per_decade, self.echo.max_samples),
            GridChoice::Linear => linear_grid(n_max, self.echo.step),
        };
        let mut cfg = EchoRunConfig::new(self.echo.delta, self.initial_state(), n_max)
            .with_mode(self.echo_mode())
            .with_sample_times(times)
            .with_norm_checks(self.echo.norm_checks);
        cfg.plateau_prefactor = self.echo.plateau_prefactor;
        Ok(cfg)
    }

    /// Member runs of a sweep, keyed by their names; order is deterministic.
    pub fn sweep_members(&self) -> Vec<RunSpec> {
        let mut out = Vec::new();
        let experiment = if self.sweep.renormalized { Experiment::RenormEcho } else { Experiment::Echo };
        for (i, &delta) in self.sweep.deltas.iter().enumerate() {
            for &state in &self.sweep.states {
                let seeds: &[u64] = if state == StateChoice::Ris { &self.sweep.seeds } else { &self.sweep.seeds[..1.min(self.sweep.seeds.len())] };
                for &seed in seeds {
                    let mut m = self.clone();
                    m.experiment = experiment;
                    m.echo.delta = delta;
                    m.echo.state = state;
                    m.seed = seed;
                    let tag = if state == StateChoice::Cis { "cis".to_string() } else { format!("ris-s{seed}") };
                    m.name = format!("{}-d{i:02}-{tag}", self.name);
                    m.sweep = SweepSpec::default();
                    out.push(m);
                }
            }
        }
        out
    }
}

/// Smallest `n ≥ max(4·t₂, 100)` by which the predicted decay has brought
/// `F/F_plat` down to [`AUTO_DECAY_TARGET`].
pub fn auto_n_max(pred: &PredictionSet, kind: StateKind) -> u64 {
    let plateau = pred.plateau(kind);
    let reached = |n: f64| plateau <= 0.0 || pred.decay(n, kind).fidelity <= AUTO_DECAY_TARGET * plateau;
    let cap = AUTO_N_MAX_CAP as f64;
    let n = if reached(cap) {
        let (mut lo, mut hi) = (1.0f64, cap);
        while hi - lo > 1.0 {
            let mid = (lo * hi).sqrt().max(lo + 1.0).min(hi - 1.0).floor();
            if reached(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    } else {
        cap
    };
    n.max(4.0 * pred.t2).max(100.0).min(cap).ceil() as u64
}

/// The runs needed to redraw one figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureBundle {
    pub figure: FigureName,
    pub scale: f64,
    pub runs: Vec<RunSpec>,
    pub notes: Vec<String>,
}

/// Figure presets at a reduced size: `J` is scaled by `scale` (rounded to an
/// even integer) and `δ` rescaled to keep `δJ` fixed.
pub fn figure_preset(name: FigureName, scale: f64) -> Result<FigureBundle> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(FreezeError::InvalidConfig(format!("scale = {scale} must lie in (0, 1]")));
    }
    let even = |j: f64| ((j * scale / 2.0).round() as u32).max(1) * 2;
    let mut notes = Vec::new();
    let mut base = RunSpec::default();
    base.figure = FigureSpec { name: Some(name), scale };
    let delta_j = match name {
        Fig1a | Fig2 => 1.0,
        Fig1b => 10.0,
        Fig3a => 7.5,
        Fig3b => 2.0,
    };
    use FigureName::*;
    match name {
        Fig1a | Fig1b | Fig2 => {
            base.model = ModelSpec { kind: ModelChoice::Single, j: even(1000.0), alpha: 30.0, ..ModelSpec::default() };
        }
        Fig3a | Fig3b => {
            base.model = ModelSpec { kind: ModelChoice::Coupled, j: even(100.0), eps: 20.0, ..ModelSpec::default() };
        }
    }
    let j = base.model.j as f64;
    base.echo.delta = delta_j / j;
    notes.push(format!("J = {}, delta*J = {delta_j}", base.model.j));

    if matches!(name, Fig3a | Fig3b) {
        let m = &base.model;
        let t_h = heisenberg_time(m.subspace_dim(), m.symmetry_classes);
        let star = crossover_delta(kappa_cl_sq(m.degrees_of_freedom()), m.tabulated_sigma(), t_h);
        let want = if name == Fig3a { DecayRegime::Exponential } else { DecayRegime::Gaussian };
        let regime = if base.echo.delta > star { DecayRegime::Exponential } else { DecayRegime::Gaussian };
        if regime != want {
            let adjusted = if want == DecayRegime::Exponential { 1.5 * star } else { star / 1.5 };
            notes.push(format!(
                "delta = {:.4e} falls in the {regime:?} regime at this size (crossover {star:.4e}); using {adjusted:.4e}",
                base.echo.delta
            ));
            base.echo.delta = adjusted;
        }
    }

    let stem = name.as_str();
    let run = |experiment: Experiment, tag: &str, state: StateChoice| {
        let mut r = base.clone();
        r.experiment = experiment;
        r.echo.state = state;
        r.name = format!("{stem}-{tag}");
        r
    };
    let runs = match name {
        Fig1a | Fig1b => vec![
            run(Experiment::Echo, "cis", StateChoice::Cis),
            run(Experiment::Echo, "ris", StateChoice::Ris),
            run(Experiment::ClassicalEcho, "classical", StateChoice::Cis),
            run(Experiment::Predict, "predict", StateChoice::Cis),
        ],
        Fig2 | Fig3a | Fig3b => vec![
            run(Experiment::Echo, "direct", StateChoice::Cis),
            run(Experiment::RenormEcho, "renorm", StateChoice::Cis),
            run(Experiment::Predict, "predict", StateChoice::Cis),
        ],
    };
    Ok(FigureBundle { figure: name, scale, runs, notes })
}

const EXPERIMENTS: &[(&str, Experiment)] = &[
    ("echo", Experiment::Echo),
    ("renorm-echo", Experiment::RenormEcho),
    ("classical-echo", Experiment::ClassicalEcho),
    ("predict", Experiment::Predict),
    ("sigma", Experiment::Sigma),
    ("sweep", Experiment::Sweep),
    ("figure", Experiment::Figure),
];
const MODELS: &[(&str, ModelChoice)] = &[("single", ModelChoice::Single), ("coupled", ModelChoice::Coupled)];
const STATES: &[(&str, StateChoice)] = &[("cis", StateChoice::Cis), ("ris", StateChoice::Ris)];
const GRIDS: &[(&str, GridChoice)] = &[("log", GridChoice::Log), ("linear", GridChoice::Linear)];
const ESTIMATORS: &[(&str, EstimatorChoice)] = &[("grid", EstimatorChoice::Grid), ("kernel", EstimatorChoice::Kernel)];
const FIGURES: &[(&str, FigureName)] = &[
    ("fig1a", FigureName::Fig1a),
    ("fig1b", FigureName::Fig1b),
    ("fig2", FigureName::Fig2),
    ("fig3a", FigureName::Fig3a),
    ("fig3b", FigureName::Fig3b),
];

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_uint(v: &Value) -> Option<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Some(*i as u64),
        _ => None,
    }
}

fn lookup<T: Copy>(v: &Value, options: &[(&str, T)]) -> Option<T> {
    let s = v.as_str()?;
    options.iter().find(|(k, _)| *k == s).map(|&(_, t)| t)
}

/// Pulls keys out of TOML tables, recording every problem instead of stopping.
#[derive(Default)]
struct Reader {
    errors: Vec<String>,
}

fn path(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

impl Reader {
    fn section(&mut self, root: &mut Table, name: &str) -> Table {
        match root.remove(name) {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(other) => {
                self.errors.push(format!("`{name}` must be a table, found {}", other.type_str()));
                Table::new()
            }
        }
    }

    fn take<T>(&mut self, t: &mut Table, section: &str, key: &str, expected: &str, f: impl Fn(&Value) -> Option<T>) -> Option<T> {
        let v = t.remove(key)?;
        let got = f(&v);
        if got.is_none() {
            self.errors.push(format!("{} must be {expected}, found {v}", path(section, key)));
        }
        got
    }

    fn float(&mut self, t: &mut Table, section: &str, key: &str) -> Option<f64> {
        self.take(t, section, key, "a number", as_float)
    }

    fn uint(&mut self, t: &mut Table, section: &str, key: &str) -> Option<u64> {
        self.take(t, section, key, "a nonnegative integer", as_uint)
    }

    fn boolean(&mut self, t: &mut Table, section: &str, key: &str) -> Option<bool> {
        self.take(t, section, key, "true or false", Value::as_bool)
    }

    fn string(&mut self, t: &mut Table, section: &str, key: &str) -> Option<String> {
        self.take(t, section, key, "a string", |v| v.as_str().map(str::to_string))
    }

    fn optional_choice<T: Copy>(&mut self, t: &mut Table, section: &str, key: &str, options: &[(&str, T)]) -> Option<T> {
        let names: Vec<String> = options.iter().map(|(k, _)| format!("\"{k}\"")).collect();
        self.take(t, section, key, &format!("one of {}", names.join(", ")), |v| lookup(v, options))
    }

    fn choice<T: Copy>(&mut self, t: &mut Table, section: &str, key: &str, default: T, options: &[(&str, T)]) -> T {
        self.optional_choice(t, section, key, options).unwrap_or(default)
    }

    fn list<T>(&mut self, t: &mut Table, section: &str, key: &str, expected: &str, f: impl Fn(&Value) -> Option<T>) -> Option<Vec<T>> {
        self.take(t, section, key, &format!("an array of {expected}"), |v| v.as_array()?.iter().map(&f).collect())
    }

    fn finish(&mut self, rest: Table, section: &str) {
        for key in rest.keys() {
            self.errors.push(format!("unknown key `{}`", path(section, key)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_documented_defaults() {
        let s = parse_and_validate("").unwrap();
        assert_eq!(s.experiment, Experiment::Echo);
        assert_eq!(s.model.kind, ModelChoice::Single);
        assert_eq!(s.model.j, 200);
        assert_eq!(s.model.alpha, 30.0);
        assert_eq!(s.echo.delta, 1e-3);
        assert_eq!(s.initial_state(), InitialState::Cis { theta: 1.0, phi: 1.0 });
    }

    #[test]
    fn negative_delta_is_kept_verbatim() {
        let s = parse_and_validate("[echo]\ndelta = -0.0025").unwrap();
        assert_eq!(s.echo.delta, -0.0025);
    }

    #[test]
    fn odd_j_mentions_parity() {
        let err = parse_and_validate("[model]\nj = 201").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(err.0[0].contains("H_OE") && err.0[0].contains("parity"), "{err}");
    }

    #[test]
    fn all_errors_are_reported() {
        let text = r#"
            colour = "red"
            [model]
            j = "big"
            alpha = 1.0
            spin = 3
            [echo]
            theta = 4.0
            state = "thermal"
            [figure]
            scale = 2.0
        "#;
        let err = parse_and_validate(text).unwrap_err();
        let joined = err.to_string();
        for needle in ["colour", "model.j", "model.spin", "echo.theta", "echo.state", "figure.scale"] {
            assert!(joined.contains(needle), "missing {needle} in {joined}");
        }
        assert_eq!(err.0.len(), 6, "{joined}");
    }

    #[test]
    fn inconsistent_combinations_are_rejected() {
        let err = parse_and_validate("experiment = \"classical-echo\"\n[model]\nkind = \"coupled\"\nj = 20\n[echo]\nstate = \"ris\"").unwrap_err();
        assert_eq!(err.0.len(), 2, "{err}");
        assert!(parse_and_validate("[echo]\nplateau_prefactor = 0.9").is_err());
        assert!(parse_and_validate("experiment = \"renorm-echo\"\n[echo]\nplateau_prefactor = 0.9").is_ok());
        assert!(parse_and_validate("experiment = \"sweep\"").is_err());
        assert!(parse_and_validate("experiment = \"figure\"").is_err());
        assert!(parse_and_validate("[echo]\nstep = 0").is_err());
        assert!(parse_and_validate("[model]\nkind = \"coupled\"\nj = 200").is_err());
    }

    #[test]
    fn round_trip_through_toml() {
        let mut s = RunSpec::default();
        s.experiment = Experiment::Sweep;
        s.sweep.deltas = vec![1e-3, -0.1 + 0.2];
        s.sweep.states = vec![StateChoice::Cis, StateChoice::Ris];
        s.sweep.seeds = vec![3, 4];
        s.echo.n_max = Some(12345);
        s.echo.phi = std::f64::consts::PI / 3.0;
        s.figure.name = Some(FigureName::Fig3b);
        let text = s.to_toml().unwrap();
        assert_eq!(parse_and_validate(&text).unwrap(), s);
    }

    #[test]
    fn sweep_members_are_keyed_and_ordered() {
        let s = parse_and_validate("experiment = \"sweep\"\n[sweep]\ndeltas = [1e-3, 2e-3]\nstates = [\"cis\", \"ris\"]\nseeds = [5, 6]").unwrap();
        let names: Vec<String> = s.sweep_members().into_iter().map(|m| m.name).collect();
        assert_eq!(names, ["run-d00-cis", "run-d00-ris-s5", "run-d00-ris-s6", "run-d01-cis", "run-d01-ris-s5", "run-d01-ris-s6"]);
    }

    #[test]
    fn auto_n_max_reaches_the_decay() {
        let s = RunSpec::default();
        let p = s.predictions().unwrap();
        let n = s.resolved_n_max().unwrap();
        assert!(n as f64 >= 4.0 * p.t2);
        assert!(p.decay(n as f64, StateKind::Cis).fidelity <= AUTO_DECAY_TARGET * p.f_plat_cis * 1.0001);
        assert!(p.decay(n as f64 - 2.0, StateKind::Cis).fidelity > AUTO_DECAY_TARGET * p.f_plat_cis);
    }

    #[test]
    fn presets_follow_the_figure_parameters() {
        let b = figure_preset(FigureName::Fig1a, 1.0).unwrap();
        assert_eq!(b.runs.len(), 4);
        let r = &b.runs[0];
        assert_eq!((r.model.j, r.model.alpha, r.echo.delta), (1000, 30.0, 1e-3));
        let kinds: Vec<_> = b.runs.iter().map(|r| (r.experiment, r.echo.state)).collect();
        assert!(kinds.contains(&(Experiment::Echo, StateChoice::Ris)));
        assert!(kinds.contains(&(Experiment::ClassicalEcho, StateChoice::Cis)));

        let b = figure_preset(FigureName::Fig2, 1.0).unwrap();
        let kinds: Vec<_> = b.runs.iter().map(|r| r.experiment).collect();
        assert_eq!(kinds, [Experiment::Echo, Experiment::RenormEcho, Experiment::Predict]);

        let b = figure_preset(FigureName::Fig3a, 0.5).unwrap();
        let r = &b.runs[0];
        assert_eq!((r.model.kind, r.model.j, r.model.eps), (ModelChoice::Coupled, 50, 20.0));
        assert_eq!(r.predictions().unwrap().decay_regime, DecayRegime::Exponential);
        let b = figure_preset(FigureName::Fig3b, 0.5).unwrap();
        assert_eq!(b.runs[0].predictions().unwrap().decay_regime, DecayRegime::Gaussian);

        for f in FigureName::ALL {
            for run in figure_preset(f, 0.2).unwrap().runs {
                run.validate().unwrap();
            }
        }
        assert!(figure_preset(FigureName::Fig1b, 0.0).is_err());
    }

    #[test]
    fn tiny_scale_forces_the_regime() {
        let b = figure_preset(FigureName::Fig3b, 0.1).unwrap();
        assert_eq!(b.runs[0].model.j, 10);
        assert_eq!(b.runs[0].predictions().unwrap().decay_regime, DecayRegime::Gaussian);
        let b = figure_preset(FigureName::Fig3a, 0.1).unwrap();
        assert_eq!(b.runs[0].predictions().unwrap().decay_regime, DecayRegime::Exponential);
    }
}
