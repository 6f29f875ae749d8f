use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use radial_opf::bench::{self, CompressionMode, ScaleRange, ScalingRule};
use radial_opf::loadflow::{check_operational, read_injections, terminal_currents};
use radial_opf::opf::ModelOptions;
use radial_opf::recovery::{convergence_envelope, oracle_deviation, verify_recovery, RecoveryOptions};
use radial_opf::{
    build_ar_opf, build_r_opf, conditions, data, recover, solve_loadflow, CostModel, FlowLimitRule, GridMatrices,
    OperatingBounds, OpfSolution, RadialGrid,
};

/// AR-OPF toolkit for radial distribution grids.
#[derive(Parser)]
#[command(name = "radial-opf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the exactness conditions C1-C5.
    CheckConditions {
        grid: String,
        /// Injection scale, in the units of the grid's sweep rule.
        #[arg(long)]
        scale: Option<f64>,
        #[command(flatten)]
        flow: FlowArgs,
        /// Print a CSV row instead of the text report.
        #[arg(long)]
        csv: bool,
    },
    /// Matrix inspection.
    Matrices {
        #[command(subcommand)]
        command: MatricesCommand,
    },
    /// Solve the exact power flow for fixed absorptions.
    Loadflow {
        grid: String,
        /// Injection file; nominal loads when omitted.
        #[arg(long)]
        injections: Option<PathBuf>,
        /// Print per-line terminal currents as CSV.
        #[arg(long)]
        csv: bool,
        /// Compare a solution file against the load flow at its injections.
        #[arg(long, conflicts_with = "injections")]
        verify: Option<PathBuf>,
    },
    /// Solve the AR-OPF or the R-OPF.
    Solve {
        grid: String,
        #[arg(long, value_enum, default_value_t = Model::Aropf)]
        model: Model,
        /// Cost file; import at slope 1 when omitted.
        #[arg(long)]
        cost: Option<PathBuf>,
        /// Drop every line shunt before solving.
        #[arg(long)]
        no_shunt: bool,
        #[command(flatten)]
        flow: FlowArgs,
        /// Solution file to write.
        #[arg(long, short, default_value = "solution.txt")]
        out: PathBuf,
    },
    /// Recover a load flow from a relaxed solution.
    Recover {
        solution: PathBuf,
        grid: String,
        /// Per-iteration CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        flow: FlowArgs,
        /// Recovered solution file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Experiments on the bundled or user grids.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
}

#[derive(Subcommand)]
enum MatricesCommand {
    /// Print every matrix as CSV, or write one file per matrix.
    Dump {
        grid: String,
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Line currents of AR-OPF, R-OPF and shunt-free AR-OPF on the 3-bus grid.
    Threebus {
        #[command(flatten)]
        out: OutArgs,
    },
    /// Conditions over a range of injection scales.
    Sweep {
        grid: String,
        #[arg(long)]
        rule: Option<ScalingRule>,
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Feasible-set compression from the auxiliary constraints.
    Compress {
        grid: String,
        #[arg(long)]
        mode: CompressionMode,
        #[arg(long)]
        rule: Option<ScalingRule>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct FlowArgs {
    /// Rule for the line flow limits P_max, Q_max.
    #[arg(long, default_value = "pct110")]
    pmax_rule: FlowLimitRule,
}

#[derive(Args)]
struct OutArgs {
    /// CSV destination; with it the summary goes to stdout, without it the
    /// CSV goes to stdout and the summary to stderr.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl OutArgs {
    fn emit(&self, csv: &str, summary: &str) -> Result<()> {
        match &self.out {
            Some(path) => {
                fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
                println!("{summary}");
            }
            None => {
                print!("{csv}");
                eprintln!("{summary}");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Aropf,
    Ropf,
}

fn load_grid(arg: &str) -> Result<RadialGrid> {
    data::load(arg).with_context(|| format!("loading grid {arg}"))
}

fn bounds(grid: &RadialGrid, flow: &FlowArgs) -> Result<OperatingBounds> {
    OperatingBounds::from_rule(grid, flow.pmax_rule).context("deriving flow limits")
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::CheckConditions { grid, scale, flow, csv } => {
            let grid = load_grid(&grid)?;
            let flow_bounds = bounds(&grid, &flow)?;
            let report = match scale {
                Some(k) => {
                    let point = bench::sweep_point(&grid, ScalingRule::for_grid(&grid), &flow_bounds, k)?;
                    if !csv {
                        println!(
                            "scale {k}: {:.4} MW production, {:.4} MW net injection, max |V_up| {:.4}",
                            point.production_mw, point.net_injection_mw, point.max_voltage
                        );
                    }
                    point.report
                }
                None => conditions::evaluate(&grid, &flow_bounds)?,
            };
            if csv {
                println!("{}\n{}", radial_opf::ConditionReport::CSV_HEADER, report.to_csv_row());
            } else {
                print!("{}", report.to_text());
            }
        }
        Command::Matrices { command: MatricesCommand::Dump { grid, flow, dir } } => {
            let grid = load_grid(&grid)?;
            let m = GridMatrices::build(&grid, &bounds(&grid, &flow)?)?;
            match dir {
                Some(dir) => {
                    for path in m.write_csv(&dir)? {
                        println!("{}", path.display());
                    }
                }
                None => {
                    for (name, mat) in m.named_matrices() {
                        println!("# {name}");
                        print!("{}", radial_opf::matrices::matrix_csv(&mat));
                    }
                }
            }
        }
        Command::Loadflow { grid, injections, csv, verify } => {
            let grid = load_grid(&grid)?;
            let solution = verify.map(|p| OpfSolution::read(&p, &grid)).transpose()?;
            let s = match (&solution, injections) {
                (Some(sol), _) => sol.injections(),
                (None, Some(path)) => read_injections(&path, &grid)?,
                (None, None) => grid.buses.iter().map(|b| (b.p_load, b.q_load)).collect(),
            };
            let state = solve_loadflow(&grid, &s)?;
            let ib = grid.base.i_base();
            let currents = terminal_currents(&state, &grid);
            if csv {
                println!("line,up,top_a,bottom_a,limit_a");
                for &bus in grid.order().iter().filter(|&&b| b > 0) {
                    let l = bus - 1;
                    let line = &grid.lines[l];
                    println!(
                        "{},{},{},{},{}",
                        grid.label(bus),
                        grid.label(line.up),
                        currents[l].0.sqrt() * ib,
                        currents[l].1.sqrt() * ib,
                        line.i_max_sq.sqrt() * ib
                    );
                }
            } else {
                println!("{:>8} {:>12} {:>12} {:>10} {:>10} {:>10}", "bus", "P", "Q", "|V|", "I_top A", "I_bot A");
                for l in 0..grid.len() {
                    println!(
                        "{:>8} {:>12.6} {:>12.6} {:>10.6} {:>10.3} {:>10.3}",
                        grid.label(l + 1),
                        state.p_top[l],
                        state.q_top[l],
                        state.v[l].sqrt(),
                        currents[l].0.sqrt() * ib,
                        currents[l].1.sqrt() * ib
                    );
                }
                println!("converged in {} iterations, residual {:.2e}", state.iterations, state.residual);
                for v in check_operational(&state, &grid) {
                    println!("violation: {v}");
                }
            }
            if let Some(sol) = solution {
                let dev = oracle_deviation(&sol, &state);
                eprintln!("largest deviation from the load flow: {dev:.3e} p.u.");
            }
        }
        Command::Solve { grid, model, cost, no_shunt, flow, out } => {
            let mut grid = load_grid(&grid)?;
            if no_shunt {
                grid = grid.without_shunts();
            }
            let cost = match cost {
                Some(path) => CostModel::read(&path, &grid)?,
                None => CostModel::import_only(grid.len(), 1.0),
            };
            let opts = ModelOptions::default();
            let m = match model {
                Model::Aropf => build_ar_opf(&grid, &bounds(&grid, &flow)?, &cost, &opts)?,
                Model::Ropf => build_r_opf(&grid, &cost, &opts)?,
            };
            let sol = m.solve();
            println!("status {}, objective {:.6}, residual {:.2e}", sol.status, sol.objective, sol.primal_residual);
            if !sol.is_optimal() {
                bail!("solver did not reach an optimum");
            }
            let gaps = sol.exactness_gap(&grid);
            println!("import {:.6} p.u., max relaxation gap {:.3e}", sol.p_top[0], sol.max_gap(&grid));
            for l in sol.inexact_lines(&grid, radial_opf::opf::GAP_THRESHOLD) {
                println!("  inexact line to bus {}: gap {:.3e}", grid.label(l + 1), gaps[l]);
            }
            fs::write(&out, sol.to_text(&grid)).with_context(|| format!("writing {}", out.display()))?;
            println!("solution written to {}", out.display());
        }
        Command::Recover { solution, grid, trace, flow, out } => {
            let grid = load_grid(&grid)?;
            let input = OpfSolution::read(&solution, &grid)?;
            let flow_bounds = bounds(&grid, &flow)?;
            let matrices = GridMatrices::build(&grid, &flow_bounds)?;
            let run = recover(&input, &grid, &matrices, &RecoveryOptions::default())?;
            eprintln!(
                "{} after {} iterations, final gap {:.3e}",
                if run.converged { "converged" } else { "NOT converged" },
                run.iterations(),
                run.final_gap
            );
            let check = verify_recovery(&run, &input, &grid)?;
            eprintln!(
                "import {:.9} -> {:.9} p.u., oracle deviation {:.3e}, {} operational violations",
                check.input_import,
                check.recovered_import,
                check.oracle_deviation,
                check.violations.len()
            );
            if input.aux.is_some() {
                let eta = conditions::check_all(&matrices).eta;
                let env = convergence_envelope(&run, &input, &grid, &matrices, eta)?;
                eprintln!("envelope: {} checks, {} violations", env.checked, env.violations.len());
            }
            if let Some(path) = trace {
                fs::write(&path, run.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            }
            let text = run.recovered.to_text(&grid);
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Bench { command } => match command {
            BenchCommand::Threebus { out } => {
                let grid = data::threebus();
                let profiles = bench::run_threebus_comparison()?;
                let summary = profiles
                    .iter()
                    .map(|p| {
                        format!(
                            "{}: max current {:.2} A ({:+.1} % of the limit), relaxation gap {:.3e}",
                            p.case,
                            p.max_current(),
                            100.0 * p.max_overload(),
                            p.relaxation_gap
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("\n");
                out.emit(&bench::comparison_csv(&grid, &profiles), &summary)?;
            }
            BenchCommand::Sweep { grid, rule, start, stop, points, out } => {
                let grid = load_grid(&grid)?;
                let rule = rule.unwrap_or_else(|| ScalingRule::for_grid(&grid));
                let d = rule.default_range();
                let range = ScaleRange {
                    start: start.unwrap_or(d.start),
                    stop: stop.unwrap_or(d.stop),
                    points: points.unwrap_or(d.points),
                };
                let result = bench::sweep_conditions(&grid, rule, range)?;
                out.emit(&result.to_csv(), &result.summary())?;
            }
            BenchCommand::Compress { grid, mode, rule, out } => {
                let grid = load_grid(&grid)?;
                let rule = rule.unwrap_or_else(|| ScalingRule::for_grid(&grid));
                let result = bench::quantify_compression(&grid, mode, rule)?;
                out.emit(&result.to_csv(&grid), &result.summary())?;
            }
        },
    }
    Ok(())
}
