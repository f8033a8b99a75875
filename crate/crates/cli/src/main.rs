use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cylwig::analysis::{hudson_certify, hudson_sweep, negativity, Classification, Controls, DEFAULT_TOLERANCE};
use cylwig::io::{self, StateInput};
use cylwig::numerics::AngleGrid;
use cylwig::phase_space::{
    default_pad, overlap, reconstruct_density_with, star_product, wigner_from_angle, wigner_from_oam,
    ReconstructionMethod, ReconstructionStatus, StarMethod, WignerGrid,
};
use cylwig::states::{
    apply_phase_function, coherent_state, displace, lower_charge, oam_eigenstate, random_pure_state,
    von_mises_state, OamWindow, PureState,
};
use cylwig::Error;

mod render;

#[derive(Parser)]
#[command(name = "cylwig", version, about = "Wigner functions on the discrete cylinder (angle x OAM)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a state and write it as JSON.
    State(StateArgs),
    /// Compute the Wigner grid of a state or density file.
    Wigner(WignerArgs),
    /// Classify one state by the sign of its Wigner function.
    Check(CheckArgs),
    /// Classify a batch of seeded random states, one JSON report per line.
    Scan(ScanArgs),
    /// Recover a density matrix from a Wigner grid.
    Reconstruct(ReconstructArgs),
    /// Print the trace overlap of two grids.
    Overlap(OverlapArgs),
    /// Wigner grid of the product of two operators.
    Star(StarArgs),
    /// Render a grid as a binary PPM image.
    Render(RenderArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Eigen,
    Coherent,
    Vonmises,
    Random,
}

#[derive(Args)]
struct StateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// OAM window as a:b.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_window)]
    window: OamWindow,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    l0: i64,
    /// Mean angle in radians.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    phi0: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Transform applied after construction, in order given:
    /// displace:LD:PHI, lower, or phase:A:B for e^{i(Aℓ+Bℓ²)}.
    #[arg(long, allow_hyphen_values = true)]
    apply: Vec<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WignerMethod {
    Oam,
    Angle,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct GridControls {
    /// Number of angle nodes; defaults to 4·span+4.
    #[arg(long)]
    nphi: Option<usize>,
    /// ℓ padding on each side; defaults to 8·span.
    #[arg(long)]
    pad: Option<usize>,
}

impl GridControls {
    fn resolve(&self, window: OamWindow) -> Result<(AngleGrid, usize), Error> {
        let grid = match self.nphi {
            Some(n) => AngleGrid::new(n)?,
            None => AngleGrid::for_span(window.span()),
        };
        Ok((grid, self.pad.unwrap_or_else(|| default_pad(window))))
    }
}

#[derive(Args)]
struct WignerArgs {
    input: PathBuf,
    #[command(flatten)]
    grid: GridControls,
    #[arg(long, value_enum, default_value = "oam")]
    method: WignerMethod,
    #[arg(long, value_enum, default_value = "csv")]
    format: GridFormat,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    input: PathBuf,
    #[command(flatten)]
    grid: GridControls,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_window)]
    window: OamWindow,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    grid: GridControls,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReconstructMethod {
    LeastSquares,
    KernelSum,
}

#[derive(Args)]
struct ReconstructArgs {
    input: PathBuf,
    /// Target window; defaults to the grid's source window.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_window)]
    window: Option<OamWindow>,
    #[arg(long, value_enum, default_value = "least-squares")]
    method: ReconstructMethod,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OverlapArgs {
    first: PathBuf,
    second: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum StarKind {
    Operator,
    Direct,
}

#[derive(Args)]
struct StarArgs {
    first: PathBuf,
    second: PathBuf,
    #[arg(long, value_enum, default_value = "operator")]
    method: StarKind,
    #[arg(long, value_enum, default_value = "csv")]
    format: GridFormat,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    input: PathBuf,
    /// Colour range: auto, or min:max with min <= 0 <= max.
    #[arg(long, default_value = "auto", allow_hyphen_values = true)]
    range: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn parse_window(s: &str) -> Result<OamWindow, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got {s:?}"))?;
    let a: i64 = a.trim().parse().map_err(|_| format!("bad window start {a:?}"))?;
    let b: i64 = b.trim().parse().map_err(|_| format!("bad window end {b:?}"))?;
    OamWindow::new(a, b).map_err(|e| e.to_string())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, bytes).map_err(|e| invalid(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn check_tolerance(tol: f64) -> Result<(), Failure> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(invalid(format!("tolerance must be finite and non-negative, got {tol}")));
    }
    Ok(())
}

fn apply_transform(state: PureState, spec: &str) -> Result<PureState, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<f64, Failure> {
        let v: f64 = s.parse().map_err(|_| invalid(format!("bad number {s:?} in --apply {spec}")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(invalid(format!("non-finite number in --apply {spec}")))
        }
    };
    match parts.as_slice() {
        ["lower"] => Ok(lower_charge(&state)),
        ["displace", l, phi] => {
            let l: i64 = l.parse().map_err(|_| invalid(format!("bad shift {l:?} in --apply {spec}")))?;
            Ok(displace(&state, l, num(phi)?))
        }
        ["phase", a, b] => {
            let (a, b) = (num(a)?, num(b)?);
            Ok(apply_phase_function(&state, |l| a * l as f64 + b * (l * l) as f64))
        }
        _ => Err(invalid(format!("unknown transform {spec:?}"))),
    }
}

fn grid_text(w: &WignerGrid, format: GridFormat) -> String {
    match format {
        GridFormat::Csv => io::wigner_to_csv(w),
        GridFormat::Json => io::wigner_to_json(w),
    }
}

fn cmd_state(a: StateArgs) -> Result<(), Failure> {
    let mut state = match a.kind {
        Kind::Eigen => oam_eigenstate(a.l0, a.window)?,
        Kind::Coherent => coherent_state(a.l0, a.phi0, a.sigma, a.window)?,
        Kind::Vonmises => von_mises_state(a.kappa, a.window)?,
        Kind::Random => random_pure_state(a.window, a.seed),
    };
    for t in &a.apply {
        state = apply_transform(state, t)?;
    }
    emit(a.output.as_deref(), io::state_to_json(&state).as_bytes())
}

fn cmd_wigner(a: WignerArgs) -> Result<(), Failure> {
    let input = io::read_state_input(&read_text(&a.input)?)?;
    let window = match &input {
        StateInput::Pure(s) => s.window(),
        StateInput::Mixed(d) => d.window(),
    };
    let (grid, pad) = a.grid.resolve(window)?;
    let w = match (a.method, &input) {
        (WignerMethod::Oam, _) => wigner_from_oam(&input.density(), pad, grid)?,
        (WignerMethod::Angle, StateInput::Pure(s)) => wigner_from_angle(s, pad, grid)?,
        (WignerMethod::Angle, StateInput::Mixed(_)) => {
            return Err(invalid("the angle method needs a pure-state input"))
        }
    };
    emit(a.output.as_deref(), grid_text(&w, a.format).as_bytes())
}

fn cmd_check(a: CheckArgs) -> Result<(), Failure> {
    check_tolerance(a.tol)?;
    let report = match io::read_state_input(&read_text(&a.input)?)? {
        StateInput::Pure(s) => {
            let controls = Controls {
                n_phi: a.grid.nphi,
                pad: a.grid.pad,
                tolerance: a.tol,
            };
            hudson_certify(&s, &controls)?
        }
        StateInput::Mixed(d) => {
            let (grid, pad) = a.grid.resolve(d.window())?;
            negativity(&wigner_from_oam(&d, pad, grid)?, a.tol)
        }
    };
    let line = serde_json::to_string(&report).expect("report serializes") + "\n";
    emit(a.output.as_deref(), line.as_bytes())
}

fn cmd_scan(a: ScanArgs) -> Result<(), Failure> {
    check_tolerance(a.tol)?;
    let controls = Controls {
        n_phi: a.grid.nphi,
        pad: a.grid.pad,
        tolerance: a.tol,
    };
    controls.resolve(a.window)?;
    let reports = hudson_sweep(a.window, a.samples, a.seed, &controls)?;
    let mut text = String::new();
    let mut counts = [0usize; 3];
    for r in &reports {
        text.push_str(&serde_json::to_string(r).expect("report serializes"));
        text.push('\n');
        counts[match r.classification {
            Classification::OamEigenstate => 0,
            Classification::NegativeWitnessed => 1,
            Classification::Inconclusive => 2,
        }] += 1;
    }
    let summary = serde_json::json!({
        "summary": {
            "samples": reports.len(),
            "oam_eigenstate": counts[0],
            "negative_witnessed": counts[1],
            "inconclusive": counts[2],
        }
    });
    text.push_str(&summary.to_string());
    text.push('\n');
    emit(a.output.as_deref(), text.as_bytes())
}

fn cmd_reconstruct(a: ReconstructArgs) -> Result<(), Failure> {
    let w = io::read_wigner(&read_text(&a.input)?)?;
    let target = a.window.unwrap_or(w.source());
    let method = match a.method {
        ReconstructMethod::LeastSquares => ReconstructionMethod::LeastSquares,
        ReconstructMethod::KernelSum => ReconstructionMethod::KernelSum,
    };
    let rec = reconstruct_density_with(&w, target, method)?;
    if rec.status == ReconstructionStatus::HighResidual {
        eprintln!("warning: reconstruction residual {:e} exceeds 1e-6", rec.residual);
    }
    emit(a.output.as_deref(), io::density_to_json(&rec.density).as_bytes())
}

fn cmd_overlap(a: OverlapArgs) -> Result<(), Failure> {
    let x = io::read_wigner(&read_text(&a.first)?)?;
    let y = io::read_wigner(&read_text(&a.second)?)?;
    println!("{:.16e}", overlap(&x, &y)?);
    Ok(())
}

fn cmd_star(a: StarArgs) -> Result<(), Failure> {
    let x = io::read_wigner(&read_text(&a.first)?)?;
    let y = io::read_wigner(&read_text(&a.second)?)?;
    let method = match a.method {
        StarKind::Operator => StarMethod::Operator,
        StarKind::Direct => StarMethod::Direct,
    };
    let w = star_product(&x, &y, method)?;
    emit(a.output.as_deref(), grid_text(&w, a.format).as_bytes())
}

fn cmd_render(a: RenderArgs) -> Result<(), Failure> {
    let w = io::read_wigner(&read_text(&a.input)?)?;
    let range = render::Range::parse(&a.range).map_err(invalid)?;
    emit(a.output.as_deref(), &render::ppm(&w, range))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::State(a) => cmd_state(a),
        Command::Wigner(a) => cmd_wigner(a),
        Command::Check(a) => cmd_check(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Overlap(a) => cmd_overlap(a),
        Command::Star(a) => cmd_star(a),
        Command::Render(a) => cmd_render(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
