//! `pkm-motion` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use pkm_motion::engine::{compare_interpolators, plan, FeedSchedule, MotionPlan};
use pkm_motion::io::{compare_csv, export_plan, load_config, load_geometry, load_waypoints, ProjectConfig};
use pkm_motion::kinematics::{kinematics_check, RobotGeometry};
use pkm_motion::{bspline, Error};

#[derive(Parser, Debug)]
#[command(name = "pkm-motion", version, about = "Tool-path interpolation and trajectory planning for a 3T1R parallel robot")]
struct Cli {
    /// Configuration file (TOML). Falls back to $PKM_MOTION_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct PathArgs {
    /// Waypoint CSV (x_mm,y_mm,z_mm,alpha_deg,beta_deg,gamma_deg).
    #[arg(long, short)]
    waypoints: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a plan and write samples, joint table, metrics and plot data.
    Plan {
        #[command(flatten)]
        path: PathArgs,
        /// Output directory (overrides the configuration).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the natural, Taylor and modifier interpolators at constant feed.
    Compare {
        #[command(flatten)]
        path: PathArgs,
        /// Report file; printed to stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Inverse/forward round trips and finite-difference checks.
    Kincheck {
        #[arg(long, default_value_t = 100)]
        poses: usize,
    },
    /// Evaluate a plan at one time or over a range.
    Step {
        #[command(flatten)]
        path: PathArgs,
        /// Single time (s).
        #[arg(long, conflicts_with_all = ["from", "to"])]
        time: Option<f64>,
        #[arg(long, requires = "to")]
        from: Option<f64>,
        #[arg(long, requires = "from")]
        to: Option<f64>,
        /// Step of the range (s); the runtime tick when absent.
        #[arg(long)]
        dt: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn config(cli: &Cli) -> Result<ProjectConfig, Error> {
    let path = cli.config.clone().or_else(|| std::env::var_os("PKM_MOTION_CONFIG").map(PathBuf::from));
    match path {
        Some(p) => load_config(&p),
        None => Ok(ProjectConfig::default()),
    }
}

fn geometry(cfg: &ProjectConfig) -> Result<RobotGeometry, Error> {
    match &cfg.geometry {
        Some(p) => load_geometry(p),
        None => Ok(RobotGeometry::default_machine()),
    }
}

fn build(cfg: &ProjectConfig, waypoints: &Path) -> Result<MotionPlan, Error> {
    let wp = load_waypoints(waypoints)?;
    let g = geometry(cfg)?;
    plan(&wp, &g, &cfg.limits, &cfg.plan)
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let cfg = config(cli)?;
    match &cli.command {
        Command::Plan { path, output } => {
            let p = build(&cfg, &path.waypoints)?;
            let dir = output.clone().unwrap_or_else(|| cfg.output_dir.clone());
            let m = export_plan(&p, &dir)?;
            println!("path length      {:.6} mm", m.path_length_mm);
            println!("duration         {:.6} s", m.total_time_s);
            println!("time scale       {:.9} (binding: {})", m.time_scale, m.binding_constraint);
            println!("joint segments   {}", p.lut.segment_count());
            println!("tracking         {:.3e} mm", m.tracking.max_position_mm);
            println!("artifacts        {}", dir.display());
        }
        Command::Compare { path, output } => {
            let wp = load_waypoints(&path.waypoints)?;
            let degree = cfg.plan.position_degree.min(wp.len().saturating_sub(1));
            let (curve, _) = bspline::fit_interpolating_spline(&wp.positions, degree)?;
            let settings = bspline::ArcLengthSettings { tolerance: cfg.plan.quadrature_tolerance, ..Default::default() };
            let table = bspline::arc_length_table(&curve, settings)?;
            let schedule = FeedSchedule { feed: cfg.compare.feed, period: cfg.compare.period };
            let rows = compare_interpolators(&curve, &table, schedule, &cfg.compare.eps_mse)?;
            let text = compare_csv(&rows);
            match output {
                Some(o) => {
                    std::fs::write(o, &text).map_err(|e| Error::Io { path: o.display().to_string(), message: e.to_string() })?;
                    info!("wrote {}", o.display());
                }
                None => print!("{text}"),
            }
        }
        Command::Kincheck { poses } => {
            let g = geometry(&cfg)?;
            let rep = kinematics_check(&g, cli.seed, *poses)?;
            println!("poses                 {}", rep.poses);
            println!("FK(IK(P)) - P         {:.3e} mm", rep.fk_ik_mm);
            println!("IK(FK(d)) - d         {:.3e} mm", rep.ik_fk_mm);
            println!("velocity vs FD        {:.3e}", rep.velocity_fd_rel);
            println!("recursion inverse     {:.3e}", rep.recursion_inverse_rel);
            println!("d'' vs FD             {:.3e}", rep.d2_fd_rel);
            println!("d''' vs FD            {:.3e}", rep.d3_fd_rel);
            if !rep.passed() {
                println!("FAILED");
                return Ok(ExitCode::from(1));
            }
            println!("ok");
        }
        Command::Step { path, time, from, to, dt } => {
            let p = build(&cfg, &path.waypoints)?;
            let times: Vec<f64> = match (time, from, to) {
                (Some(t), _, _) => vec![*t],
                (None, Some(a), Some(b)) => {
                    let step = dt.unwrap_or(cfg.plan.dt_runtime);
                    if step.is_nan() || step <= 0.0 || b < a {
                        return Err(Error::Config { field: "dt".into(), message: "a range needs from <= to and a positive step".into() });
                    }
                    let n = ((b - a) / step + 1e-9).floor() as usize;
                    (0..=n).map(|i| a + i as f64 * step).collect()
                }
                _ => vec![0.0, p.total_time()],
            };
            println!("t_s,q1_mm,q2_mm,q3_mm,q4_mm,dq1_mm_s,dq2_mm_s,dq3_mm_s,dq4_mm_s,x_mm,y_mm,z_mm,alpha_deg");
            for t in times {
                let s = p.interpolate_step(t)?;
                let d = s.joints;
                let v = s.joint_derivatives[0];
                println!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    t,
                    d[0],
                    d[1],
                    d[2],
                    d[3],
                    v[0],
                    v[1],
                    v[2],
                    v[3],
                    s.pose.p.x,
                    s.pose.p.y,
                    s.pose.p.z,
                    s.pose.alpha.to_degrees()
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
