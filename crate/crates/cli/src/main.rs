use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use abacus_core::abacus::{Abacus, ProfileSpec, QubitState};
use abacus_core::evolve::{Engine, GridEngine, ModalEngine, TwoComponentState};
use abacus_core::io::{self, GateSpec, Instruction, RunManifest};
use abacus_core::oscillator::{GridSpec, PhysicalConfig};
use abacus_core::pointint::{
    fd_coupled_levels, fd_oracle_levels, richardson, robin_levels, scattering_amplitudes, spectrum, FdGrid,
    PointInteraction,
};
use abacus_core::verify::{self, Level, VerifyOptions};
use abacus_core::{AbacusError, UnitaryGate};

#[derive(Parser)]
#[command(name = "abacus", version, about = "Quantum abacus simulator and gate compiler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a schedule on |0> or |1> and write the trace.
    Run(RunArgs),
    /// Energy levels of a separating angle or a gate.
    Spectrum(SpectrumArgs),
    /// Transmission and reflection probabilities versus k.
    Scatter(ScatterArgs),
    /// Run the acceptance checks.
    Verify(VerifyArgs),
    /// Execute a qubit program (prepare / gate / cnot / readout).
    Program(ProgramArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum EngineFlag {
    Modal,
    Grid,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ProfileFlag {
    Bump,
    Ground,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LevelFlag {
    Quick,
    Full,
}

/// Options shared by the simulation commands. Every flag has a config-file
/// key of the same name (with underscores).
#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    engine: Option<EngineFlag>,
    #[arg(long)]
    grid_nodes: Option<usize>,
    /// Grid extent in units of the oscillator length.
    #[arg(long)]
    xmax: Option<f64>,
    /// Grid-engine time step (absolute time units).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    profile: Option<ProfileFlag>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Modal truncation.
    #[arg(long)]
    modes: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    engine: Option<EngineFlag>,
    grid_nodes: Option<usize>,
    xmax: Option<f64>,
    dt: Option<f64>,
    seed: Option<u64>,
    profile: Option<ProfileFlag>,
    format: Option<Format>,
    modes: Option<usize>,
    out: Option<PathBuf>,
    threshold: Option<f64>,
    physics: Option<PhysicalConfig>,
}

/// Fully resolved settings.
struct Settings {
    engine: EngineFlag,
    grid: GridSpec,
    dt: Option<f64>,
    seed: u64,
    profile: ProfileFlag,
    format: Format,
    modes: usize,
    out: Option<PathBuf>,
    threshold: f64,
    physics: Option<PhysicalConfig>,
}

impl Settings {
    fn resolve(c: &Common, out: Option<PathBuf>) -> Result<Settings, AbacusError> {
        let file: ConfigFile = match &c.config {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
                .map_err(|e| AbacusError::Parse(format!("config: {e}")))?,
            None => ConfigFile::default(),
        };
        let defaults = GridSpec::default();
        let grid = GridSpec {
            nodes: c.grid_nodes.or(file.grid_nodes).unwrap_or(defaults.nodes),
            x_max_over_ell: c.xmax.or(file.xmax).unwrap_or(defaults.x_max_over_ell),
        };
        if grid.nodes < 16 || grid.x_max_over_ell.is_nan() || grid.x_max_over_ell <= 0.0 {
            return Err(AbacusError::InvalidConfig("grid needs >= 16 nodes and positive extent".into()));
        }
        Ok(Settings {
            engine: c.engine.or(file.engine).unwrap_or(EngineFlag::Modal),
            grid,
            dt: c.dt.or(file.dt),
            seed: c.seed.or(file.seed).unwrap_or(VerifyOptions::DEFAULT_SEED),
            profile: c.profile.or(file.profile).unwrap_or(ProfileFlag::Bump),
            format: c.format.or(file.format).unwrap_or(Format::Csv),
            modes: c.modes.or(file.modes).unwrap_or(ModalEngine::DEFAULT_TRUNCATION),
            out: out.or(file.out),
            threshold: file.threshold.unwrap_or(Abacus::DEFAULT_THRESHOLD),
            physics: file.physics,
        })
    }

    fn steps_per_half_period(&self, cfg: &PhysicalConfig) -> Result<usize, AbacusError> {
        match self.dt {
            None => Ok(GridEngine::DEFAULT_STEPS),
            Some(dt) if dt > 0.0 && dt.is_finite() => Ok(((cfg.tau() / dt).round() as usize).max(1)),
            Some(_) => Err(AbacusError::InvalidConfig("dt must be positive".into())),
        }
    }

    fn abacus(&self, cfg: PhysicalConfig, check_accuracy: bool) -> Result<Abacus, AbacusError> {
        let engine = match self.engine {
            EngineFlag::Modal => Engine::Modal(ModalEngine::new(cfg, self.grid, self.modes)),
            EngineFlag::Grid => Engine::Grid(
                GridEngine::new(cfg, self.steps_per_half_period(&cfg)?).with_accuracy_check(check_accuracy),
            ),
        };
        Ok(Abacus::new(engine, self.grid.build(&cfg), self.modes))
    }

    fn profile_spec(&self) -> ProfileSpec {
        match self.profile {
            ProfileFlag::Bump => ProfileSpec::default(),
            ProfileFlag::Ground => ProfileSpec::Ground,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    schedule: PathBuf,
    /// Initial bit: 0 prepares (f, 0), 1 prepares (0, f).
    #[arg(long, default_value_t = 0)]
    bit: u8,
    /// Output directory for the trace, snapshots, and manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Repeat each grid-engine step at dt/2 and fail if they disagree.
    #[arg(long)]
    check_accuracy: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Separating angle for a single Robin half line.
    #[arg(long, conflicts_with = "gate")]
    theta: Option<f64>,
    /// Gate name (NOT, HADAMARD, BLOCH(mu,nu), ...) or JSON matrix.
    #[arg(long, allow_hyphen_values = true)]
    gate: Option<String>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Use the finite-difference oracle (Richardson-extrapolated).
    #[arg(long)]
    fd: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ScatterArgs {
    /// Gate name or JSON matrix.
    #[arg(long, allow_hyphen_values = true)]
    gate: String,
    #[arg(long, default_value_t = 1e-2)]
    k_min: f64,
    #[arg(long, default_value_t = 1e2)]
    k_max: f64,
    /// Number of log-spaced wave numbers.
    #[arg(long, default_value_t = 50)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "quick")]
    level: LevelFlag,
    /// Comma-separated subset of criteria, e.g. `1,5`.
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<u8>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ProgramArgs {
    #[arg(long)]
    program: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Scatter(a) => cmd_scatter(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Program(a) => cmd_program(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &AbacusError) -> u8 {
    match e {
        AbacusError::Parse(_) | AbacusError::Json(_) => 2,
        AbacusError::AccuracyBreakdown { .. } => 4,
        e if e.is_contract_violation() => 3,
        _ => 1,
    }
}

fn write_artifact(dir: &Path, name: &str, contents: &str, listed: &mut Vec<String>) -> Result<(), AbacusError> {
    std::fs::write(dir.join(name), contents)?;
    listed.push(name.to_string());
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), AbacusError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<ExitCode, AbacusError> {
    let s = Settings::resolve(&a.common, a.out.clone())?;
    let schedule = io::read_schedule(&a.schedule)?;
    let cfg = schedule.cfg;
    let ab = s.abacus(cfg, a.check_accuracy)?;
    let q = ab.prepare(s.profile_spec(), a.bit)?;
    let (run, states) = run_with_states(&ab, &schedule, &q)?;
    let readout = ab.readout(&run);

    let mut artifacts = Vec::new();
    if let Some(dir) = &s.out {
        std::fs::create_dir_all(dir)?;
        write_artifact(dir, "trace.csv", &io::trace_csv(&states.1), &mut artifacts)?;
        for (k, st) in std::iter::once(&q.state).chain(states.0.iter()).enumerate() {
            let g = st.to_grid(&ab.grid, &cfg);
            write_artifact(dir, &format!("snapshot_{k:03}.csv"), &io::grid_state_csv(&g), &mut artifacts)?;
        }
    }
    let manifest = RunManifest {
        config: cfg,
        engine: match s.engine {
            EngineFlag::Modal => "modal".into(),
            EngineFlag::Grid => "grid".into(),
        },
        grid_nodes: s.grid.nodes,
        x_max: s.grid.x_max_over_ell,
        dt: match &ab.engine {
            Engine::Grid(g) => Some(g.dt()),
            Engine::Modal(_) => None,
        },
        truncation: matches!(s.engine, EngineFlag::Modal).then_some(s.modes),
        seed: s.seed,
        profile: s.profile_spec(),
        initial_bit: a.bit,
        threshold: s.threshold,
        trace: states.1,
        global_phase: [run.global_phase.re, run.global_phase.im],
        final_readout: readout,
        artifacts,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    if let Some(dir) = &s.out {
        std::fs::write(dir.join("manifest.json"), &json)?;
    }
    match s.format {
        Format::Json => println!("{json}"),
        Format::Csv => println!("p0,p1\n{:.12},{:.12}", readout.p0, readout.p1),
    }
    Ok(ExitCode::SUCCESS)
}

type Trace = (Vec<TwoComponentState>, Vec<abacus_core::evolve::Snapshot>);

fn run_with_states(
    ab: &Abacus,
    schedule: &abacus_core::evolve::Schedule,
    q: &QubitState,
) -> Result<(QubitState, Trace), AbacusError> {
    let r = abacus_core::evolve::run_schedule(schedule, &q.state, &ab.engine, &ab.grid)?;
    let out = QubitState {
        state: r.final_state,
        profile: q.profile.clone(),
        global_phase: q.global_phase * r.global_phase,
    };
    Ok((out, (r.states, r.trace)))
}

fn parse_gate_arg(text: &str) -> Result<UnitaryGate, AbacusError> {
    let spec: GateSpec = if text.trim_start().starts_with('[') {
        serde_json::from_str(text).map_err(|e| AbacusError::Parse(format!("gate: {e}")))?
    } else {
        GateSpec::Named(text.to_string())
    };
    spec.resolve()
}

fn cmd_spectrum(a: SpectrumArgs) -> Result<ExitCode, AbacusError> {
    let s = Settings::resolve(&a.common, a.out.clone())?;
    let cfg = s.physics.unwrap_or_default();
    let fd = FdGrid::default();
    let result = match (a.theta, &a.gate) {
        (Some(theta), _) => {
            if a.fd {
                richardson(
                    &fd_oracle_levels(theta, &cfg, &fd, a.count)?,
                    &fd_oracle_levels(theta, &cfg, &fd.halved(), a.count)?,
                )
            } else {
                robin_levels(theta, &cfg, a.count)?
            }
        }
        (None, Some(g)) => {
            let pi = PointInteraction::new(parse_gate_arg(g)?, cfg.l0)?;
            if a.fd {
                richardson(
                    &fd_coupled_levels(&pi, &cfg, &fd, a.count)?,
                    &fd_coupled_levels(&pi, &cfg, &fd.halved(), a.count)?,
                )
            } else {
                spectrum(&pi, &cfg, a.count)?
            }
        }
        (None, None) => return Err(AbacusError::Parse("give --theta or --gate".into())),
    };
    let text = match s.format {
        Format::Csv => io::spectrum_csv(&result),
        Format::Json => serde_json::to_string_pretty(&result)? + "\n",
    };
    emit(s.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_scatter(a: ScatterArgs) -> Result<ExitCode, AbacusError> {
    let s = Settings::resolve(&a.common, a.out.clone())?;
    let cfg = s.physics.unwrap_or_default();
    if !(a.k_min > 0.0 && a.k_max >= a.k_min && a.points >= 1) {
        return Err(AbacusError::InvalidConfig("need 0 < k_min <= k_max and points >= 1".into()));
    }
    let pi = PointInteraction::new(parse_gate_arg(&a.gate)?, cfg.l0)?;
    let ratio = (a.k_max / a.k_min).ln();
    let rows = (0..a.points)
        .map(|j| {
            let frac = if a.points == 1 { 0.0 } else { j as f64 / (a.points - 1) as f64 };
            scattering_amplitudes(&pi, a.k_min * (ratio * frac).exp())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let text = match s.format {
        Format::Csv => io::scatter_csv(&rows),
        Format::Json => {
            let table: Vec<[f64; 3]> = rows.iter().map(|r| [r.k, r.transmission(), r.reflection()]).collect();
            serde_json::to_string_pretty(&table)? + "\n"
        }
    };
    emit(s.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: VerifyArgs) -> Result<ExitCode, AbacusError> {
    let s = Settings::resolve(&a.common, None)?;
    let cfg = s.physics.unwrap_or_default();
    let mut opts = VerifyOptions::new(match a.level {
        LevelFlag::Quick => Level::Quick,
        LevelFlag::Full => Level::Full,
    });
    opts.seed = s.seed;
    opts.cfg = cfg;
    opts.grid = s.grid;
    opts.truncation = s.modes;
    opts.steps_per_half_period = s.steps_per_half_period(&cfg)?;
    let ids: Vec<u8> = if a.criteria.is_empty() {
        verify::CRITERIA.iter().map(|c| c.0).collect()
    } else {
        a.criteria.clone()
    };
    let reports = verify::run_selected(&ids, &opts);
    match s.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&reports)?),
        Format::Csv => {
            for r in &reports {
                println!("{r}");
            }
        }
    }
    let ok = reports.iter().all(|r| r.passed());
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

#[derive(Serialize)]
struct ProgramReadout {
    qubit: usize,
    p0: f64,
    p1: f64,
    profile_fidelity: [f64; 2],
}

#[derive(Serialize)]
struct CnotRecord {
    control: usize,
    target: usize,
    applied: bool,
}

#[derive(Serialize)]
struct PhaseRecord {
    step: usize,
    qubit: usize,
    global_phase: [f64; 2],
}

#[derive(Serialize)]
struct ProgramResult {
    readouts: Vec<ProgramReadout>,
    cnot: Vec<CnotRecord>,
    global_phase_log: Vec<PhaseRecord>,
}

fn cmd_program(a: ProgramArgs) -> Result<ExitCode, AbacusError> {
    let s = Settings::resolve(&a.common, a.out.clone())?;
    let cfg = s.physics.unwrap_or_default();
    let program = io::parse_program(&std::fs::read_to_string(&a.program)?)?;
    let ab = s.abacus(cfg, false)?;
    let mut qubits: Vec<Option<QubitState>> = Vec::new();
    let mut result = ProgramResult {
        readouts: Vec::new(),
        cnot: Vec::new(),
        global_phase_log: Vec::new(),
    };
    let get = |qs: &[Option<QubitState>], k: usize| -> Result<QubitState, AbacusError> {
        qs.get(k)
            .cloned()
            .flatten()
            .ok_or_else(|| AbacusError::StateMismatch(format!("qubit {k} used before prepare")))
    };
    for (step, ins) in program.into_iter().enumerate() {
        match ins {
            Instruction::Prepare { qubit, bit, profile } => {
                if qubits.len() <= qubit {
                    qubits.resize(qubit + 1, None);
                }
                qubits[qubit] = Some(ab.prepare(profile.unwrap_or_else(|| s.profile_spec()), bit)?);
            }
            Instruction::Gate { qubit, gate } => {
                let q = ab.apply_gate(&gate.resolve()?, &get(&qubits, qubit)?)?;
                result.global_phase_log.push(PhaseRecord {
                    step,
                    qubit,
                    global_phase: [q.global_phase.re, q.global_phase.im],
                });
                qubits[qubit] = Some(q);
            }
            Instruction::Cnot {
                control,
                target,
                threshold,
            } => {
                if control == target {
                    return Err(AbacusError::InvalidConfig("cnot control and target must differ".into()));
                }
                let out = ab.cnot_trigger(
                    &get(&qubits, control)?,
                    &get(&qubits, target)?,
                    threshold.unwrap_or(s.threshold),
                )?;
                result.cnot.push(CnotRecord {
                    control,
                    target,
                    applied: out.applied,
                });
                qubits[control] = Some(out.control);
                qubits[target] = Some(out.target);
            }
            Instruction::Readout { qubit } => {
                let r = ab.readout(&get(&qubits, qubit)?);
                result.readouts.push(ProgramReadout {
                    qubit,
                    p0: r.p0,
                    p1: r.p1,
                    profile_fidelity: r.profile_fidelity,
                });
            }
        }
    }
    let json = serde_json::to_string_pretty(&result)? + "\n";
    emit(s.out.as_deref(), &json)?;
    Ok(ExitCode::SUCCESS)
}
