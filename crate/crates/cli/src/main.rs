use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use toml::Table;

use freeze_cli::{run_spec, set_flag, spec_from_layers};

/// Fidelity echoes, plateau predictions and figure presets for kicked tops.
#[derive(Parser, Debug)]
#[command(name = "freeze", version)]
struct Cli {
    /// TOML run description; its keys override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; each run writes `<out>/<name>/`.
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Desk-scale factor for figure presets, in (0, 1].
    #[arg(long, global = true)]
    scale: Option<f64>,
    /// Run directory name; defaults to the experiment kind.
    #[arg(long, global = true)]
    name: Option<String>,
    /// Print the validated run spec as TOML and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Quantum fidelity series.
    Echo {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        echo: EchoFlags,
        /// Use the renormalized propagator.
        #[arg(long)]
        renorm: bool,
    },
    /// Plateau, crossover and decay predictions.
    Predict {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        echo: EchoFlags,
        /// Transport coefficient to use instead of the tabulated one.
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Monte Carlo transport coefficient.
    Sigma {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        n_cut: Option<u64>,
        #[arg(long)]
        ensemble: Option<u64>,
    },
    /// Classical fidelity of a phase-space patch.
    Classical {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        echo: EchoFlags,
        #[arg(long)]
        trajectories: Option<u64>,
        #[arg(long, value_enum)]
        estimator: Option<Estimator>,
    },
    /// All runs needed for one figure.
    Figure {
        #[arg(value_enum)]
        figure: Option<Figure>,
    },
    /// Echo runs over a grid of strengths, states and seeds.
    Sweep {
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        echo: EchoFlags,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        deltas: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_enum)]
        states: Vec<State>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        renorm: bool,
    },
}

#[derive(Args, Debug, Default)]
struct ModelFlags {
    #[arg(long, value_enum)]
    model: Option<Model>,
    #[arg(long)]
    j: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct EchoFlags {
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long, value_enum)]
    state: Option<State>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    phi: Option<f64>,
    #[arg(long)]
    n_max: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Model {
    Single,
    Coupled,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum State {
    Cis,
    Ris,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Estimator {
    Grid,
    Kernel,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Figure {
    Fig1a,
    Fig1b,
    Fig2,
    Fig3a,
    Fig3b,
}

fn name_of<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

fn int(v: u64) -> i64 {
    i64::try_from(v).unwrap_or(i64::MAX)
}

impl ModelFlags {
    fn apply(&self, t: &mut Table) {
        if let Some(m) = self.model {
            set_flag(t, "model", "kind", name_of(m));
        }
        if let Some(j) = self.j {
            set_flag(t, "model", "j", int(j));
        }
        if let Some(a) = self.alpha {
            set_flag(t, "model", "alpha", a);
        }
        if let Some(e) = self.eps {
            set_flag(t, "model", "eps", e);
        }
    }
}

impl EchoFlags {
    fn apply(&self, t: &mut Table) {
        if let Some(d) = self.delta {
            set_flag(t, "echo", "delta", d);
        }
        if let Some(s) = self.state {
            set_flag(t, "echo", "state", name_of(s));
        }
        if let Some(x) = self.theta {
            set_flag(t, "echo", "theta", x);
        }
        if let Some(x) = self.phi {
            set_flag(t, "echo", "phi", x);
        }
        if let Some(n) = self.n_max {
            set_flag(t, "echo", "n_max", int(n));
        }
    }
}

fn flag_table(cli: &Cli) -> Table {
    let mut t = Table::new();
    if let Some(s) = cli.seed {
        set_flag(&mut t, "", "seed", int(s));
    }
    if let Some(o) = &cli.out {
        set_flag(&mut t, "", "out", o.clone());
    }
    if let Some(w) = cli.workers {
        set_flag(&mut t, "", "workers", int(w as u64));
    }
    if let Some(n) = &cli.name {
        set_flag(&mut t, "", "name", n.clone());
    }
    if let Some(s) = cli.scale {
        set_flag(&mut t, "figure", "scale", s);
    }
    let experiment = match &cli.command {
        Command::Echo { model, echo, renorm } => {
            model.apply(&mut t);
            echo.apply(&mut t);
            if *renorm { "renorm-echo" } else { "echo" }
        }
        Command::Predict { model, echo, sigma } => {
            model.apply(&mut t);
            echo.apply(&mut t);
            if let Some(s) = sigma {
                set_flag(&mut t, "sigma", "value", *s);
            }
            "predict"
        }
        Command::Sigma { model, n_cut, ensemble } => {
            model.apply(&mut t);
            if let Some(n) = n_cut {
                set_flag(&mut t, "sigma", "n_cut", int(*n));
            }
            if let Some(e) = ensemble {
                set_flag(&mut t, "sigma", "ensemble", int(*e));
            }
            "sigma"
        }
        Command::Classical { model, echo, trajectories, estimator } => {
            model.apply(&mut t);
            if let Some(d) = echo.delta {
                set_flag(&mut t, "echo", "delta", d);
            }
            if let Some(x) = echo.theta {
                set_flag(&mut t, "echo", "theta", x);
            }
            if let Some(x) = echo.phi {
                set_flag(&mut t, "echo", "phi", x);
            }
            if let Some(s) = echo.state {
                set_flag(&mut t, "echo", "state", name_of(s));
            }
            if let Some(n) = echo.n_max {
                set_flag(&mut t, "classical", "n_max", int(n));
            }
            if let Some(n) = trajectories {
                set_flag(&mut t, "classical", "trajectories", int(*n));
            }
            if let Some(e) = estimator {
                set_flag(&mut t, "classical", "estimator", name_of(*e));
            }
            "classical-echo"
        }
        Command::Figure { figure } => {
            if let Some(f) = figure {
                set_flag(&mut t, "figure", "name", name_of(*f));
            }
            "figure"
        }
        Command::Sweep { model, echo, deltas, states, seeds, renorm } => {
            model.apply(&mut t);
            echo.apply(&mut t);
            if !deltas.is_empty() {
                set_flag(&mut t, "sweep", "deltas", deltas.clone());
            }
            if !states.is_empty() {
                set_flag(&mut t, "sweep", "states", states.iter().map(|&s| name_of(s)).collect::<Vec<_>>());
            }
            if !seeds.is_empty() {
                set_flag(&mut t, "sweep", "seeds", seeds.iter().map(|&s| int(s)).collect::<Vec<_>>());
            }
            if *renorm {
                set_flag(&mut t, "sweep", "renormalized", true);
            }
            "sweep"
        }
    };
    set_flag(&mut t, "", "experiment", experiment);
    if cli.name.is_none() {
        set_flag(&mut t, "", "name", experiment);
    }
    t
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(p) => Some(std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let spec = spec_from_layers(flag_table(cli), config.as_deref())?;
    if cli.dry_run {
        print!("{}", spec.to_toml()?);
        return Ok(());
    }
    for report in run_spec(&spec)? {
        println!("{}\t{}\t{}", report.name, report.dir.display(), report.summary);
    }
    Ok(())
}
