//! Command-line front end.
//!
//! ```text
//! coldcavity pump --intensities 1,5,10 --delta 40
//! coldcavity steady --preset kerr_pure
//! coldcavity map --config run.cfg --format svg
//! coldcavity scan --preset fig3 --out runs/
//! coldcavity convert --config lab.cfg --format json
//! ```
//!
//! Exit status: 0 on success, 1 for usage and input errors, 2 when the
//! numerics fail.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::dynamics::{
    self, CycleReport, MechanismReport, ScanKind, ScanTrace, StaircaseReport, SwitchEvent,
};
use crate::emit::{self, Series};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::presets::{self, Scenario, PRESET_NAMES};
use crate::steady::{self, FixedPoint};
use crate::units::{self, Derived, PhysicalConfig};
use crate::zeeman::{self, SublevelPopulations};

/// Preset names that expand to several runs.
pub const PRESET_GROUPS: &[(&str, &[&str])] = &[
    ("fig3", &["fig3_p1", "fig3_p2", "fig3_p3", "fig3_p4"]),
    ("fig6", &["fig6_p1", "fig6_p2", "fig6_p3", "fig6_p4"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Parser)]
#[command(name = "coldcavity", version, about = "Bistability and self-pulsing of optically pumped cold atoms in a cavity")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// key=value run configuration
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Named scenario (fig3 and fig6 expand to four runs each)
    #[arg(long, global = true, value_name = "NAME", value_parser = preset_names())]
    pub preset: Option<String>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Relative integration tolerance, in [1e-12, 1e-3]
    #[arg(long, global = true, default_value_t = 1e-8, value_parser = parse_tol)]
    pub tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stretched-state pumping curves and the β table
    Pump(PumpArgs),
    /// Steady states and branch diagram
    Steady(SteadyArgs),
    /// Stability classes over (Φ₀, drive)
    Map(MapArgs),
    /// Time-domain run
    Scan,
    /// Physical configuration to model parameters
    Convert,
}

#[derive(Debug, Args)]
pub struct PumpArgs {
    /// Normalized intensities, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,12,15,20,30,40,60")]
    pub intensities: Vec<f64>,
    /// Normalized detuning 2Δ/Γ
    #[arg(long, default_value_t = 40.0, allow_hyphen_values = true)]
    pub delta: f64,
    /// Length of the common time grid (default: long enough for the weakest intensity)
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 2001)]
    pub samples: usize,
    /// Also write all 20 sublevel populations
    #[arg(long)]
    pub populations: bool,
}

#[derive(Debug, Args)]
pub struct SteadyArgs {
    /// Φ₀ grid points of the branch diagram
    #[arg(long, default_value_t = 401)]
    pub points: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub phi0_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi0_end: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long, default_value_t = 121)]
    pub nphi: usize,
    #[arg(long, default_value_t = 60)]
    pub ndrive: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub phi0_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub phi0_end: Option<f64>,
    /// Lowest resonant intensity t²a_in²/γ_cav² on the drive axis
    #[arg(long, default_value_t = 20.0)]
    pub intensity_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub intensity_max: f64,
}

fn preset_names() -> clap::builder::PossibleValuesParser {
    let mut names: Vec<&'static str> = PRESET_NAMES.to_vec();
    names.extend(PRESET_GROUPS.iter().map(|(g, _)| *g));
    clap::builder::PossibleValuesParser::new(names)
}

fn parse_tol(s: &str) -> std::result::Result<f64, String> {
    let tol: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (1e-12..=1e-3).contains(&tol) {
        Ok(tol)
    } else {
        Err(format!("{tol} is outside [1e-12, 1e-3]"))
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Pump(args) => pump(g, args),
        Command::Steady(args) => steady_cmd(g, args),
        Command::Map(args) => map_cmd(g, args),
        Command::Scan => scan(g),
        Command::Convert => convert(g),
    }
}

/// The scenarios selected by `--preset` and `--config`; a config file applies
/// to every run of a preset group.
pub fn resolve_scenarios(preset: Option<&str>, config: Option<&Path>) -> Result<Vec<Scenario>> {
    let config = config.map(Config::load).transpose()?;
    let names: Vec<&str> = match preset {
        Some(name) => PRESET_GROUPS
            .iter()
            .find(|(g, _)| *g == name)
            .map(|(_, members)| members.to_vec())
            .unwrap_or_else(|| vec![name]),
        None => Vec::new(),
    };
    if names.is_empty() {
        return Ok(vec![match &config {
            Some(c) => c.scenario(None)?,
            None => presets::base_scenario()?,
        }]);
    }
    names
        .par_iter()
        .map(|name| {
            let base = presets::preset_scenario(name)?;
            match &config {
                Some(c) => c.scenario(Some(base)),
                None => Ok(base),
            }
        })
        .collect()
}

fn single_scenario(g: &GlobalArgs) -> Result<Scenario> {
    let mut all = resolve_scenarios(g.preset.as_deref(), g.config.as_deref())?;
    if all.len() != 1 {
        return Err(Error::invalid(
            "preset",
            format!("`{}` names several runs; only `scan` accepts a group", g.preset.as_deref().unwrap_or("")),
        ));
    }
    Ok(all.remove(0))
}

// ---------------------------------------------------------------- pump

#[derive(Debug, Serialize)]
struct BetaRow {
    intensity: f64,
    delta: f64,
    beta: f64,
    rate: f64,
    asymptote: f64,
}

#[derive(Debug, Serialize)]
struct PumpCurve {
    intensity: f64,
    times: Vec<f64>,
    stretched: Vec<f64>,
}

fn pump(g: &GlobalArgs, args: &PumpArgs) -> Result<()> {
    if args.intensities.is_empty() || args.intensities.iter().any(|&i| !(i > 0.0 && i.is_finite())) {
        return Err(Error::invalid("intensities", "need a list of positive intensities"));
    }
    let weakest = args.intensities.iter().copied().fold(f64::INFINITY, f64::min);
    let horizon = args.horizon.unwrap_or_else(|| zeeman::pumping_horizon(weakest, args.delta));
    let start = SublevelPopulations::uniform_ground();
    let curves = args
        .intensities
        .par_iter()
        .map(|&i| zeeman::evolve_populations(&start, i, args.delta, horizon, args.samples, args.populations))
        .collect::<Result<Vec<_>>>()?;
    // each β uses a window matched to its own rise time
    let table = args
        .intensities
        .par_iter()
        .map(|&i| {
            let traj = zeeman::evolve_populations(&start, i, args.delta, zeeman::pumping_horizon(i, args.delta), 4001, false)?;
            let fit = zeeman::fit_rise(&traj.times, &traj.stretched)?;
            Ok(BetaRow {
                intensity: i,
                delta: args.delta,
                beta: fit.rate / i,
                rate: fit.rate,
                asymptote: fit.asymptote,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    match g.format {
        Format::Csv => {
            for (i, traj) in args.intensities.iter().zip(&curves) {
                emit::emit_csv(&emit::pump_csv(traj), &g.out.join(format!("pump_I{i}.csv")))?;
            }
            let mut csv = String::from("intensity,delta,beta,rate,asymptote\n");
            for r in &table {
                let row = [r.intensity, r.delta, r.beta, r.rate, r.asymptote].map(emit::fmt_f64);
                csv.push_str(&row.join(","));
                csv.push('\n');
            }
            emit::emit_csv(&csv, &g.out.join("beta.csv"))?;
        }
        Format::Json => {
            let curves: Vec<PumpCurve> = args
                .intensities
                .iter()
                .zip(&curves)
                .map(|(&intensity, t)| PumpCurve {
                    intensity,
                    times: t.times.clone(),
                    stretched: t.stretched.clone(),
                })
                .collect();
            emit::emit_json(&serde_json::json!({ "curves": curves, "beta": table }), &g.out.join("pump.json"))?;
        }
        Format::Svg => {
            let series: Vec<Series<'_>> = args
                .intensities
                .iter()
                .zip(&curves)
                .map(|(i, t)| Series {
                    label: format!("I = {i}"),
                    x: &t.times,
                    y: &t.stretched,
                })
                .collect();
            emit::emit_svg(&emit::svg_lines(&series, "t (1/Γ)", "N"), &g.out.join("pump.svg"))?;
        }
    }
    for r in &table {
        println!("I = {:>8.3}  beta = {:.6e}  N_inf = {:.4}", r.intensity, r.beta, r.asymptote);
    }
    Ok(())
}

// ---------------------------------------------------------------- steady

#[derive(Debug, Serialize)]
struct SteadySummary<'a> {
    scenario: &'a str,
    params: &'a ModelParams,
    fixed_points: &'a [FixedPoint],
    bistability_threshold: Option<f64>,
    kerr_cusp_intensity: Option<f64>,
    turning_points: &'a [f64],
    /// Φ₀ intervals with three or more steady states.
    multistable_intervals: Vec<(f64, f64)>,
}

fn span_of(s: &Scenario) -> Result<(f64, f64)> {
    let p = &s.protocol;
    if p.kind == ScanKind::LinearPhaseRamp && p.phi0_start != p.phi0_end {
        Ok((p.phi0_start.min(p.phi0_end), p.phi0_start.max(p.phi0_end)))
    } else {
        let phase_l = s.params.linear_phase()?.abs();
        Ok((s.params.phi0 - 1.5 * phase_l, s.params.phi0 + 1.5 * phase_l))
    }
}

/// Φ₀ intervals where the diagram has at least three steady states, with
/// edges refined to the nearest turning points.
fn multistable_intervals(d: &steady::BranchDiagram) -> Vec<(f64, f64)> {
    let mut edges = vec![d.phi0_grid[0]];
    edges.extend(&d.turning_points);
    edges.push(*d.phi0_grid.last().expect("grid has at least two points"));
    let count_at = |phi0: f64| {
        let k = d
            .phi0_grid
            .iter()
            .position(|&x| x >= phi0)
            .unwrap_or(d.phi0_grid.len() - 1);
        d.branches[k].iter().map(|p| p.multiplicity as usize).sum::<usize>()
    };
    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in edges.windows(2) {
        if w[1] > w[0] && count_at(0.5 * (w[0] + w[1])) >= 3 {
            match out.last_mut() {
                Some(last) if last.1 == w[0] => last.1 = w[1],
                _ => out.push((w[0], w[1])),
            }
        }
    }
    out
}

fn steady_cmd(g: &GlobalArgs, args: &SteadyArgs) -> Result<()> {
    let s = single_scenario(g)?;
    let (lo, hi) = span_of(&s)?;
    let (lo, hi) = (args.phi0_start.unwrap_or(lo), args.phi0_end.unwrap_or(hi));
    let points = steady::find_fixed_points(&s.params)?;
    let diagram = steady::branch_diagram(&s.params, lo, hi, args.points)?;
    let summary = SteadySummary {
        scenario: &s.name,
        params: &s.params,
        fixed_points: &points,
        bistability_threshold: steady::bistability_threshold(&s.params).ok(),
        kerr_cusp_intensity: steady::kerr_cusp_intensity(&s.params).ok(),
        turning_points: &diagram.turning_points,
        multistable_intervals: multistable_intervals(&diagram),
    };
    match g.format {
        Format::Csv => emit::emit_csv(&emit::branch_csv(&diagram), &g.out.join("branches.csv"))?,
        Format::Json => emit::emit_json(&diagram, &g.out.join("branches.json"))?,
        Format::Svg => {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (phi0, pts) in diagram.phi0_grid.iter().zip(&diagram.branches) {
                for p in pts {
                    xs.push(*phi0);
                    ys.push(p.intensity);
                }
            }
            // branches fold back on themselves, so draw points rather than lines
            emit::emit_svg(&emit::svg_scatter(&xs, &ys, "Φ₀ (rad)", "I"), &g.out.join("branches.svg"))?;
        }
    }
    emit::emit_json(&summary, &g.out.join("steady.json"))?;

    println!("{}: {} steady state(s) at phi0 = {:.6}", s.name, points.len(), s.params.phi0);
    for p in &points {
        println!("  I = {:.6e}  p = {:.6}  {}", p.intensity, p.orientation, p.stability);
    }
    if summary.multistable_intervals.is_empty() {
        println!("no 3-root region in [{lo:.4}, {hi:.4}]");
    }
    for (a, b) in &summary.multistable_intervals {
        println!("3-root region: phi0 in [{a:.6}, {b:.6}]");
    }
    Ok(())
}

// ---------------------------------------------------------------- map

fn map_cmd(g: &GlobalArgs, args: &MapArgs) -> Result<()> {
    let s = single_scenario(g)?;
    if !(args.intensity_min > 0.0 && args.intensity_max > args.intensity_min) {
        return Err(Error::invalid("intensity_min", "need 0 < intensity_min < intensity_max"));
    }
    let (lo, hi) = span_of(&s)?;
    let phi0_axis = steady::linspace(args.phi0_start.unwrap_or(lo), args.phi0_end.unwrap_or(hi), args.nphi);
    let drive_axis: Vec<f64> = steady::linspace(args.intensity_min, args.intensity_max, args.ndrive)
        .into_iter()
        .map(|i| s.params.drive_for_resonant_intensity(i))
        .collect();
    let map = steady::instability_map(&s.params, &phi0_axis, &drive_axis)?;
    match g.format {
        Format::Csv => emit::emit_csv(&emit::map_csv(&map), &g.out.join("map.csv"))?,
        Format::Json => emit::emit_json(&map, &g.out.join("map.json"))?,
        Format::Svg => emit::emit_svg(&emit::map_svg(&map), &g.out.join("map.svg"))?,
    }
    let pulsing = map.cells.iter().filter(|c| c.is_self_pulsing()).count();
    let failed = map.cells.iter().filter(|c| c.classes.is_err()).count();
    println!("{}: {} cells, {pulsing} self-pulsing, {failed} failed", s.name, map.cells.len());
    Ok(())
}

// ---------------------------------------------------------------- scan

/// Analysis of one leg of a run. Fields that could not be computed carry
/// the reason instead.
#[derive(Debug, Serialize)]
pub struct LegSummary {
    pub leg: &'static str,
    pub file: String,
    pub switches: Vec<SwitchEvent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle: Option<CycleReport>,
    /// Why no cycle analysis was possible (e.g. a window that is too short).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub staircase: Option<StaircaseReport>,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub params: ModelParams,
    pub protocol: dynamics::ScanProtocol,
    pub resonant_intensity: f64,
    pub legs: Vec<LegSummary>,
}

/// Fraction of a trace skipped before looking for a limit cycle.
pub const SETTLE_FRACTION: f64 = 0.3;

fn analyse_leg(s: &Scenario, leg: &'static str, file: String, trace: &ScanTrace) -> LegSummary {
    let cycle = dynamics::detect_limit_cycle(trace, SETTLE_FRACTION);
    let mechanism = match (&cycle, s.protocol.kind) {
        (Ok(c), ScanKind::StaticPhase) if c.detected => dynamics::cycle_mechanism(trace, SETTLE_FRACTION).ok(),
        _ => None,
    };
    let staircase = (s.params.gamma_p == 0.0 && s.params.beta > 0.0).then(|| dynamics::analyse_staircase(trace, 0.5, 0.02, 50.0));
    LegSummary {
        leg,
        file,
        switches: dynamics::detect_switches(trace),
        cycle_error: cycle.as_ref().err().map(ToString::to_string),
        cycle: cycle.ok(),
        mechanism,
        staircase,
    }
}

fn write_trace(format: Format, trace: &ScanTrace, path_stem: &Path) -> Result<String> {
    let (ext, contents) = match format {
        Format::Csv => ("csv", emit::trace_csv(trace)),
        Format::Json => ("json", {
            let mut t = serde_json::to_string_pretty(trace)?;
            t.push('\n');
            t
        }),
        Format::Svg => ("svg", emit::trace_svg(trace)),
    };
    let path = path_stem.with_extension(ext);
    emit::emit_csv(&contents, &path)?;
    Ok(path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
}

/// Integrates one scenario and writes its traces under `out`. Only phase
/// ramps are run back and forth.
pub fn run_scenario(s: &Scenario, out: &Path, format: Format, tol: f64) -> Result<RunSummary> {
    let mut legs = Vec::new();
    if s.round_trip && s.protocol.kind == ScanKind::LinearPhaseRamp {
        let (fwd, bwd) = dynamics::hysteresis_loop(&s.params, &s.protocol, &s.initial, tol)?;
        let f = write_trace(format, &fwd, &out.join(format!("{}_forward", s.name)))?;
        let b = write_trace(format, &bwd, &out.join(format!("{}_backward", s.name)))?;
        legs.push(analyse_leg(s, "forward", f, &fwd));
        legs.push(analyse_leg(s, "backward", b, &bwd));
    } else {
        let trace = dynamics::integrate(&s.params, &s.protocol, &s.initial, tol)?;
        let f = write_trace(format, &trace, &out.join(&s.name))?;
        legs.push(analyse_leg(s, "forward", f, &trace));
    }
    Ok(RunSummary {
        name: s.name.clone(),
        params: s.params,
        protocol: s.protocol,
        resonant_intensity: s.params.resonant_intensity(),
        legs,
    })
}

fn scan(g: &GlobalArgs) -> Result<()> {
    let scenarios = resolve_scenarios(g.preset.as_deref(), g.config.as_deref())?;
    let runs = scenarios
        .par_iter()
        .map(|s| run_scenario(s, &g.out, g.format, g.tol))
        .collect::<Result<Vec<_>>>()?;
    emit::emit_json(&serde_json::json!({ "runs": runs }), &g.out.join("summary.json"))?;
    for r in &runs {
        for leg in &r.legs {
            let up = leg.switches.iter().filter(|e| e.direction == dynamics::SwitchDirection::Up).count();
            let down = leg.switches.len() - up;
            let cycle = match (&leg.cycle, &leg.cycle_error) {
                (Some(c), _) if c.detected => format!("limit cycle, period {:.4}", c.period),
                (_, Some(e)) => e.clone(),
                _ => "no limit cycle".to_string(),
            };
            println!("{} [{}]: {up} up, {down} down switch(es); {cycle}", r.name, leg.leg);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- convert

#[derive(Debug, Serialize)]
struct Conversion {
    physical: PhysicalConfig,
    derived: Derived,
    params: ModelParams,
    resonant_intensity: f64,
}

fn convert(g: &GlobalArgs) -> Result<()> {
    let s = single_scenario(g)?;
    let physical = s.physical.ok_or_else(|| {
        Error::InconsistentConfig("the scenario has no physical configuration (model keys override it)".into())
    })?;
    let c = Conversion {
        physical,
        derived: physical.derived()?,
        params: s.params,
        resonant_intensity: s.params.resonant_intensity(),
    };
    match g.format {
        Format::Json | Format::Svg => emit::emit_json(&c, &g.out.join("params.json"))?,
        Format::Csv => {
            let p = &c.params;
            let rows = [
                ("delta", p.delta),
                ("phi0", p.phi0),
                ("gamma_cav", p.gamma_cav),
                ("kappa", p.kappa),
                ("cooperativity", p.cooperativity),
                ("beta", p.beta),
                ("gamma_p", p.gamma_p),
                ("drive", p.drive),
                ("mirror_transmission", p.mirror_transmission),
                ("resonant_intensity", c.resonant_intensity),
            ];
            let mut csv = String::from("key,value\n");
            for (k, v) in rows {
                csv.push_str(&format!("{k},{}\n", emit::fmt_f64(v)));
            }
            emit::emit_csv(&csv, &g.out.join("params.csv"))?;
        }
    }
    let _ = units::to_dimensionless(&physical)?;
    println!(
        "C = {:.6}  kappa = {:.6}  gamma_cav = {:.6}  delta = {:.6}  I_in = {:.6}",
        c.params.cooperativity, c.params.kappa, c.params.gamma_cav, c.params.delta, c.resonant_intensity
    );
    Ok(())
}
