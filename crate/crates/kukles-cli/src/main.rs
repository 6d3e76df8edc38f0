//! Command-line front end for the kukles toolkit.

mod svg;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use kukles::bifurcation::{
    continue_cycle, eight_loop_find, hopf_value, separatrices, EightLoopConfig, FocusId,
    HomoclinicConfig, StepConfig,
};
use kukles::cycles::{
    count_cycles, detect_big_cycle, find_cycle, CycleConfig, LimitCycle, Section,
};
use kukles::integrate::{sample_orbit, IntegratorConfig};
use kukles::model::{
    finite_singularities, infinite_directions, CanonicalParams, ParamId, QCase, SingularityKind,
    State,
};
use kukles::scan::{
    census, portrait, run_scenario, write_census_jsonl, GridSpec, ScenarioConfig, Seeding, Window,
};

#[derive(Parser)]
#[command(
    name = "kukles",
    version,
    about = "Numerical toolkit for the Kukles cubic system: singularities, limit cycles, \
             continuation and bifurcation scans"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON configuration file (parameter, integrator and command blocks).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative integration tolerance override.
    #[arg(long, global = true)]
    rtol: Option<f64>,
    /// Absolute integration tolerance override.
    #[arg(long, global = true)]
    atol: Option<f64>,
}

#[derive(Args, Clone, Copy, Default)]
struct ParamArgs {
    /// Canonical q case: 1, 2 or 3.
    #[arg(long = "q-case", value_parser = clap::value_parser!(u8).range(1..=3))]
    q_case: Option<u8>,
    /// Case-1 parameter a (nonzero).
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Case-2 parameter b.
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum FocusArg {
    #[value(name = "O", alias = "o")]
    O,
    #[value(name = "A", alias = "a")]
    A,
}

#[derive(Subcommand)]
enum Cmd {
    /// Finite singularities and directions at infinity.
    Singularities {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Phase portrait from a seed lattice plus separatrices.
    Portrait {
        #[command(flatten)]
        params: ParamArgs,
        /// Window as x_min,x_max,y_min,y_max.
        #[arg(long, value_delimiter = ',', num_args = 1..=4, allow_hyphen_values = true, default_values_t = [-1.0, 3.0, -2.0, 2.0])]
        window: Vec<f64>,
        #[arg(long, default_value_t = 8)]
        nx: usize,
        #[arg(long, default_value_t = 6)]
        ny: usize,
        #[arg(long = "t-max", default_value_t = 60.0)]
        t_max: f64,
        /// Overlay limit cycles found around the anti-saddles.
        #[arg(long)]
        with_cycles: bool,
        #[arg(long, value_enum, default_value_t = Format::Svg)]
        format: Format,
    },
    /// Limit cycles around O and A plus the big-cycle scan.
    Cycles {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long = "r-min", default_value_t = 1e-3)]
        r_min: f64,
        #[arg(long = "r-max", default_value_t = 0.95)]
        r_max: f64,
        #[arg(long = "n-seeds", default_value_t = 40)]
        n_seeds: usize,
    },
    /// Critical parameter value where a focus trace vanishes.
    Hopf {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum)]
        focus: FocusArg,
        /// Free parameter: alpha0, alpha2, beta or gamma.
        #[arg(long)]
        free: ParamId,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Pseudo-arclength continuation of a cycle branch.
    Continue {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum)]
        focus: FocusArg,
        #[arg(long)]
        free: ParamId,
        /// Initial guess for the cycle's section coordinate.
        #[arg(long = "r-guess")]
        r_guess: f64,
        /// Parameter range as lo,hi (continued toward hi).
        #[arg(long, value_delimiter = ',', num_args = 1..=2, allow_hyphen_values = true)]
        range: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Separatrix branches of the saddle.
    Separatrix {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1e-7)]
        epsilon: f64,
        #[arg(long = "t-max", default_value_t = 100.0)]
        t_max: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// One-sided homoclinic values of α₂ over a bracket.
    Eightloop {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long = "alpha2-lo", allow_negative_numbers = true)]
        alpha2_lo: f64,
        #[arg(long = "alpha2-hi", allow_negative_numbers = true)]
        alpha2_hi: f64,
    },
    /// Cycle-distribution census over a parameter grid.
    Census,
    /// The staged bifurcation scenario at the configured base.
    Scenario,
}

/// Top-level configuration document; unknown keys are rejected.
#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    params: Option<CanonicalParams>,
    integrator: Option<IntegratorConfig>,
    cycles: Option<CycleConfig>,
    census: Option<GridSpec>,
    scenario: Option<ScenarioConfig>,
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", p.display()))
        }
    }
}

fn build_params(args: &ParamArgs, file: &RunConfig) -> Result<CanonicalParams> {
    let mut p = file.params.unwrap_or(CanonicalParams {
        q_case: QCase::Case1 { a: 2.0 },
        c: 0.0,
        d: 0.0,
        alpha0: 0.0,
        alpha2: 0.0,
        beta: 0.0,
        gamma: 0.0,
    });
    if let Some(case) = args.q_case {
        p.q_case = match case {
            1 => QCase::Case1 {
                a: args
                    .a
                    .ok_or_else(|| anyhow!("--q-case 1 requires --a <nonzero>"))?,
            },
            2 => QCase::Case2 {
                b: args.b.unwrap_or(0.0),
            },
            _ => QCase::Case3,
        };
    } else if let Some(a) = args.a {
        p.q_case = QCase::Case1 { a };
    } else if let Some(b) = args.b {
        p.q_case = QCase::Case2 { b };
    }
    if let Some(v) = args.c {
        p.c = v;
    }
    if let Some(v) = args.d {
        p.d = v;
    }
    if let Some(v) = args.alpha0 {
        p.alpha0 = v;
    }
    if let Some(v) = args.alpha2 {
        p.alpha2 = v;
    }
    if let Some(v) = args.beta {
        p.beta = v;
    }
    if let Some(v) = args.gamma {
        p.gamma = v;
    }
    p.validate()
        .map_err(|e| anyhow!("invalid parameters: {e}"))?;
    Ok(p)
}

fn integrator_config(cli: &Cli, file: &RunConfig) -> IntegratorConfig {
    let mut cfg = file.integrator.unwrap_or_default();
    if let Some(rtol) = cli.rtol {
        cfg.rtol = rtol;
    }
    if let Some(atol) = cli.atol {
        cfg.atol = atol;
    }
    cfg
}

fn cycle_config(cli: &Cli, file: &RunConfig) -> CycleConfig {
    let mut cfg = file.cycles.unwrap_or_default();
    cfg.integrator = integrator_config(cli, file);
    cfg
}

fn write_output(out: &Option<PathBuf>, content: &[u8]) -> Result<()> {
    match out {
        None => {
            std::io::stdout().write_all(content)?;
            Ok(())
        }
        Some(path) => {
            fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))?;
            Ok(())
        }
    }
}

fn focus_section(p: &CanonicalParams, which: FocusArg) -> Result<(Section, State)> {
    let sings = finite_singularities(p);
    let anchor = match which {
        FocusArg::O => sings
            .iter()
            .find(|s| s.location.x.abs() < 1e-12 && s.det > 0.0)
            .map(|s| s.location)
            .ok_or_else(|| anyhow!("no anti-saddle at the origin"))?,
        FocusArg::A => sings
            .iter()
            .find(|s| s.location.x.abs() > 1e-12 && s.det > 0.0)
            .map(|s| s.location)
            .ok_or_else(|| anyhow!("no second anti-saddle for these parameters"))?,
    };
    Ok((
        Section::horizontal(anchor, matches!(which, FocusArg::O)),
        anchor,
    ))
}

fn run(cli: &Cli) -> Result<()> {
    let file = load_config(&cli.config)?;
    match &cli.cmd {
        Cmd::Singularities { params } => {
            let p = build_params(params, &file)?;
            let report = serde_json::json!({
                "params": p,
                "finite": finite_singularities(&p),
                "infinite_directions": infinite_directions(&p),
                "vertical_direction": true,
            });
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            write_output(&cli.out, text.as_bytes())
        }
        Cmd::Portrait {
            params,
            window,
            nx,
            ny,
            t_max,
            with_cycles,
            format,
        } => {
            let p = build_params(params, &file)?;
            let icfg = IntegratorConfig {
                t_max: *t_max,
                ..integrator_config(cli, &file)
            };
            let window = Window {
                x_min: window[0],
                x_max: window[1],
                y_min: window[2],
                y_max: window[3],
            };
            let seeding = Seeding { nx: *nx, ny: *ny };
            let orbits = portrait(&p, &window, &seeding, &icfg);
            match format {
                Format::Svg => {
                    let sings = finite_singularities(&p);
                    let mut cycles = Vec::new();
                    if *with_cycles {
                        let ccfg = cycle_config(cli, &file);
                        for which in [FocusArg::O, FocusArg::A] {
                            if let Ok((sec, _)) = focus_section(&p, which) {
                                for c in count_cycles(&p, &sec, 1e-3, 0.95, 40, &ccfg).cycles {
                                    let pts = sample_orbit(
                                        &p,
                                        sec.point(c.section_coord),
                                        c.period,
                                        256,
                                        &ccfg.integrator,
                                    );
                                    cycles.push((c, pts));
                                }
                            }
                        }
                        let big = detect_big_cycle(&p, &ccfg);
                        for c in big.all {
                            let sings_c: Vec<State> = sings.iter().map(|s| s.location).collect();
                            let centroid = sings_c.iter().fold(State::new(0.0, 0.0), |a, s| a + *s)
                                * (1.0 / sings_c.len() as f64);
                            let sec = Section::horizontal(centroid, true);
                            let pts = sample_orbit(
                                &p,
                                sec.point(c.section_coord),
                                c.period,
                                256,
                                &ccfg.integrator,
                            );
                            cycles.push((c, pts));
                        }
                    }
                    let svg = svg::SvgPortrait {
                        window,
                        orbits: &orbits,
                        singularities: &sings,
                        cycles: &cycles,
                    }
                    .render();
                    write_output(&cli.out, svg.as_bytes())
                }
                Format::Csv => {
                    let mut buf = Vec::new();
                    writeln!(buf, "orbit,t,x,y")?;
                    for (k, orbit) in orbits.iter().enumerate() {
                        for (t, s) in &orbit.trajectory.samples {
                            writeln!(buf, "{},{},{},{}", k, t, s.x, s.y)?;
                        }
                    }
                    write_output(&cli.out, &buf)
                }
                Format::Json => {
                    let mut text = serde_json::to_string(&orbits)?;
                    text.push('\n');
                    write_output(&cli.out, text.as_bytes())
                }
                Format::Text => bail!("portrait supports svg, csv or json output"),
            }
        }
        Cmd::Cycles {
            params,
            r_min,
            r_max,
            n_seeds,
        } => {
            let p = build_params(params, &file)?;
            let ccfg = cycle_config(cli, &file);
            let mut around_o: Vec<LimitCycle> = Vec::new();
            let mut around_a: Vec<LimitCycle> = Vec::new();
            let mut anomalies = Vec::new();
            if let Ok((sec, _)) = focus_section(&p, FocusArg::O) {
                let scan = count_cycles(&p, &sec, *r_min, *r_max, *n_seeds, &ccfg);
                around_o = scan.cycles;
                anomalies.extend(scan.anomalies.into_iter().map(|a| format!("O: {a}")));
            }
            if let Ok((sec, _)) = focus_section(&p, FocusArg::A) {
                let scan = count_cycles(&p, &sec, *r_min, *r_max, *n_seeds, &ccfg);
                around_a = scan.cycles;
                anomalies.extend(scan.anomalies.into_iter().map(|a| format!("A: {a}")));
            }
            let big = detect_big_cycle(&p, &ccfg);
            anomalies.extend(big.anomalies.into_iter().map(|a| format!("big: {a}")));
            let report = serde_json::json!({
                "params": p,
                "config": { "integrator": ccfg.integrator, "r_min": r_min, "r_max": r_max, "n_seeds": n_seeds },
                "around_O": around_o,
                "around_A": around_a,
                "big": big.all,
                "anomalies": anomalies,
            });
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            write_output(&cli.out, text.as_bytes())
        }
        Cmd::Hopf {
            params,
            focus,
            free,
            format,
        } => {
            let p = build_params(params, &file)?;
            let ccfg = cycle_config(cli, &file);
            let which = match focus {
                FocusArg::O => FocusId::O,
                FocusArg::A => FocusId::A,
            };
            let report = hopf_value(&p, which, *free, &ccfg).map_err(|e| anyhow!("{e}"))?;
            let text = match format {
                Format::Json => {
                    let mut t = serde_json::to_string_pretty(&report)?;
                    t.push('\n');
                    t
                }
                _ => format!("{} = {}\n", free, report.critical_param_value),
            };
            write_output(&cli.out, text.as_bytes())
        }
        Cmd::Continue {
            params,
            focus,
            free,
            r_guess,
            range,
            format,
        } => {
            let p = build_params(params, &file)?;
            let ccfg = cycle_config(cli, &file);
            let (sec, _) = focus_section(&p, *focus)?;
            let cycle0 = find_cycle(&p, &sec, *r_guess, &ccfg).map_err(|e| anyhow!("{e}"))?;
            let branch = continue_cycle(
                &p,
                &cycle0,
                &sec,
                *free,
                (range[0], range[1]),
                &StepConfig::default(),
                &ccfg,
            );
            match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    branch.write_csv(&mut buf)?;
                    write_output(&cli.out, &buf)
                }
                _ => {
                    let mut text = serde_json::to_string_pretty(&branch)?;
                    text.push('\n');
                    write_output(&cli.out, text.as_bytes())
                }
            }
        }
        Cmd::Separatrix {
            params,
            epsilon,
            t_max,
            format,
        } => {
            let p = build_params(params, &file)?;
            let icfg = IntegratorConfig {
                t_max: *t_max,
                ..integrator_config(cli, &file)
            };
            let saddle = finite_singularities(&p)
                .into_iter()
                .find(|s| s.kind == SingularityKind::Saddle)
                .ok_or_else(|| anyhow!("these parameters have no saddle"))?;
            let set = separatrices(&p, &saddle, *epsilon, &icfg).map_err(|e| anyhow!("{e}"))?;
            match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    set.write_csv(&mut buf)?;
                    write_output(&cli.out, &buf)
                }
                _ => {
                    let mut text = serde_json::to_string_pretty(&set)?;
                    text.push('\n');
                    write_output(&cli.out, text.as_bytes())
                }
            }
        }
        Cmd::Eightloop {
            params,
            alpha2_lo,
            alpha2_hi,
        } => {
            let p = build_params(params, &file)?;
            let cfg = EightLoopConfig {
                homoclinic: HomoclinicConfig {
                    integrator: integrator_config(cli, &file),
                    ..HomoclinicConfig::default()
                },
                ..EightLoopConfig::default()
            };
            let result =
                eight_loop_find(&p, (*alpha2_lo, *alpha2_hi), &cfg).map_err(|e| anyhow!("{e}"))?;
            let mut text = serde_json::to_string_pretty(&result)?;
            text.push('\n');
            write_output(&cli.out, text.as_bytes())
        }
        Cmd::Census => {
            let grid = file
                .census
                .clone()
                .ok_or_else(|| anyhow!("census requires a `census` block in --config"))?;
            let records = census(&grid);
            let mut buf = Vec::new();
            write_census_jsonl(&grid, &records, &mut buf)?;
            write_output(&cli.out, &buf)
        }
        Cmd::Scenario => {
            let mut cfg = file.scenario.clone().unwrap_or_default();
            if let Some(rtol) = cli.rtol {
                cfg.integrator.rtol = rtol;
            }
            if let Some(atol) = cli.atol {
                cfg.integrator.atol = atol;
            }
            let report = run_scenario(&cfg).map_err(|e| anyhow!("{e}"))?;
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            write_output(&cli.out, text.as_bytes())
        }
    }
}

fn main() -> ExitCode {
    if let Ok(n) = std::env::var("KUKLES_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
