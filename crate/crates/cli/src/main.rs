use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use chemoplast::output::{analytic_comparison, write_comparison_csv, write_probe_csv, write_vtk_snapshot};
use chemoplast::solver::StepReport;
use chemoplast::{load_config, scenario, AnalyticParams, ConfigError, Coupling, GeometryConfig, ScenarioConfig, Simulation};
use clap::{Parser, ValueEnum};

const COMPARISON_ANGLES: usize = 9;

/// Transient coupled stress-diffusion in elastoplastic plane-strain solids.
#[derive(Debug, Parser)]
#[command(name = "chemoplast", version)]
struct Cli {
    /// Scenario configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Coupling mode; overrides `coupling.mode`.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Plasticity switch; overrides `plasticity.enabled`.
    #[arg(long, value_enum)]
    plasticity: Option<Switch>,
    /// Compare the final hole-boundary fields with the closed-form solution.
    #[arg(long)]
    validate_analytic: bool,
    /// Suppress the per-step summary.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Oneway,
    Twoway,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

type BoxError = Box<dyn std::error::Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chemoplast: {e}");
            ExitCode::FAILURE
        }
    }
}

fn effective_config(cli: &Cli) -> Result<(ScenarioConfig, PathBuf), BoxError> {
    let text = fs::read_to_string(&cli.config).map_err(|e| format!("{}: {e}", cli.config.display()))?;
    let mut cfg = load_config(&text).map_err(|e| format!("{}: {e}", cli.config.display()))?;
    if let Some(m) = cli.mode {
        cfg.coupling = match m {
            Mode::Oneway => Coupling::OneWay,
            Mode::Twoway => Coupling::TwoWay,
        };
    }
    if let Some(p) = cli.plasticity {
        cfg.plasticity = matches!(p, Switch::On);
    }
    let dir = match &cli.output_dir {
        Some(d) => d.clone(),
        None => PathBuf::from(cfg.output_dir.as_deref().unwrap_or("output")),
    };
    cfg.output_dir = Some(dir.to_string_lossy().into_owned());
    cfg.validate()?;
    Ok((cfg, dir))
}

fn run(cli: &Cli) -> Result<(), BoxError> {
    let (cfg, dir) = effective_config(cli)?;
    let hole_radius = match cfg.geometry {
        GeometryConfig::PlateWithHole { radius, .. } => Some(radius),
        GeometryConfig::Annulus { .. } => None,
    };
    if cli.validate_analytic && (hole_radius.is_none() || cfg.traction == 0.0) {
        return Err(ConfigError::Invalid {
            field: "--validate-analytic".into(),
            message: "requires a plate with a hole under remote traction".into(),
        }
        .into());
    }
    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    fs::write(dir.join("effective_config.txt"), cfg.serialize())?;

    let sc = scenario::build(&cfg)?;
    let mut sim = Simulation::new(&sc, cfg.solver_config()?)?;
    let c0 = sim.total_concentration() / sc.mesh.total_area();
    if !cli.quiet {
        println!(
            "{}: {} nodes, {} elements, {} coupling, plasticity {}",
            cfg.kind.name(),
            sc.mesh.n_nodes(),
            sc.mesh.n_elements(),
            cfg.coupling.name(),
            if cfg.plasticity { "on" } else { "off" }
        );
    }

    let mut step = 0usize;
    let mut io_error = None;
    let history = sim.run_with(|s, r: &StepReport| {
        step += 1;
        if !cli.quiet {
            println!(
                "step {step:5}  t_hat {:.6e}  dt_hat {:.3e}  newton {:3}  passes {}  residual {:.3e}",
                sc.scales.t_hat(r.time),
                sc.scales.t_hat(r.dt),
                r.newton_iterations,
                r.stagger_passes,
                r.residual_norm
            );
        }
        if cfg.snapshot_stride > 0 && step % cfg.snapshot_stride == 0 && io_error.is_none() {
            let path = dir.join(format!("snapshot_{step:05}.vtk"));
            io_error = write_vtk_snapshot(&sc.mesh, s.state(), &path).err();
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    for ev in &history.refinements {
        eprintln!(
            "step refined at t_hat {:.6e} (level {}): {}",
            sc.scales.t_hat(ev.time),
            ev.level,
            ev.cause
        );
    }

    write_probe_csv(&history, &dir.join("probes.csv"))?;
    write_vtk_snapshot(&sc.mesh, sim.state(), &dir.join("final.vtk"))?;

    if cli.validate_analytic {
        let radius = hole_radius.expect("checked above");
        let analytic = AnalyticParams::from_material(&sc.params, cfg.traction, radius, c0);
        let betas: Vec<f64> = (0..COMPARISON_ANGLES)
            .map(|i| 0.5 * PI * i as f64 / (COMPARISON_ANGLES - 1) as f64)
            .collect();
        let rows = analytic_comparison(&sc.mesh, sim.state(), &analytic, &betas, &sc.scales)?;
        write_comparison_csv(&rows, &dir.join("analytic_comparison.csv"))?;
        if !cli.quiet {
            for r in &rows {
                println!(
                    "beta {:.4}  sigma_h {:.4e} / {:.4e}  c {:.6e} / {:.6e}",
                    r.beta, r.sigma_h_fe, r.sigma_h_exact, r.c_fe, r.c_exact
                );
            }
        }
    }
    if !cli.quiet {
        println!("outputs written to {}", dir.display());
    }
    Ok(())
}
