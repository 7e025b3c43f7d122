//! Command-line front end: simulation runs, snapshot diagnostics, two-run
//! difference experiments, and the dyadic-estimate self-test.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 numerical
//! blow-up, 4 I/O or snapshot-format error.

use clap::{Parser, Subcommand};
use mvsim::diagnostics::{energy_report, local_energy_scan, EnergyReport};
use mvsim::dynamics::{renormalize_magnetization, step, StepperConfig};
use mvsim::io::{csv_num, parse_config, read_snapshot, write_csv, write_snapshot, RunConfig};
use mvsim::lp::{
    commutator_norm_check, bernstein_verify, embedding_check, negative_characterization_check,
    product_law_check, random_shell, Exponent,
};
use mvsim::model::{ExternalField, ModelParams, SimState};
use mvsim::presets;
use mvsim::spectral::Grid;
use mvsim::twin::{osgood_bound_check, twin_run, TwinEvent};
use mvsim::{MvError, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mvsim", about = "Pseudo-spectral magnetoviscoelastic fluid simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the coupled system and write energy diagnostics + snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report energies and the local exchange-energy scan for a snapshot.
    Diagnose {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        scan_radius: f64,
        #[arg(long, default_value_t = 0.5)]
        eps0: f64,
    },
    /// Run a base and a perturbed trajectory and track their difference.
    Twin {
        #[arg(long)]
        config: PathBuf,
        /// Perturbation spec `field:amplitude` with field one of u, f, m.
        #[arg(long)]
        perturb: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify dyadic-analysis inequalities on random fields.
    LpSelftest {
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(err: &MvError) -> u8 {
    match err {
        MvError::NumericalBlowup { .. }
        | MvError::StepRejected { .. }
        | MvError::MagnetizationCollapse { .. } => 3,
        MvError::Io(_) | MvError::CorruptSnapshot(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("MVSIM_THREADS") {
        if let Ok(t) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::Diagnose { input, scan_radius, eps0 } => cmd_diagnose(&input, scan_radius, eps0),
        Command::Twin { config, perturb, out } => cmd_twin(&config, &perturb, &out),
        Command::LpSelftest { n, trials, out } => cmd_lp_selftest(n, trials, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

const ENERGY_HEADER: &str = "t,kinetic,elastic,exchange,aniso,zeeman,diss_u,diss_f,diss_m,\
e_total,u_sq,f_sq,grad_m_sq,grad_u_sq,grad_f_sq,lap_m_sq,hext_work_rate";

fn energy_row(r: &EnergyReport) -> Vec<f64> {
    vec![
        r.t, r.kinetic, r.elastic, r.exchange, r.aniso, r.zeeman, r.diss_u, r.diss_f, r.diss_m,
        r.e_total, r.u_sq, r.f_sq, r.grad_m_sq, r.grad_u_sq, r.grad_f_sq, r.lap_m_sq,
        r.hext_work_rate,
    ]
}

fn cmd_run(config_path: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(config_path)?;
    let params = cfg.model_params()?;
    let stepper = StepperConfig::with_options(cfg.dt, cfg.renormalize_every, cfg.cfl_safety)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.canonical"), cfg.canonical())?;

    let mut state = cfg.initial_state()?;
    let mut rows = vec![energy_row(&energy_report(&state, &params)?)];
    let steps = cfg.steps();
    let mut outcome: Result<()> = Ok(());
    for i in 1..=steps {
        match step(&state, &stepper, &params) {
            Ok(next) => state = next,
            Err(err) => {
                // Keep the diagnostics so far, record the event, and stop.
                write_snapshot(&state, &out.join("last_good.snap"))?;
                write_csv(
                    &out.join("events.csv"),
                    "step,t,kind",
                    &[vec![(i - 1) as f64, state.t, exit_code(&err) as f64]],
                )?;
                outcome = Err(err);
                break;
            }
        }
        rows.push(energy_row(&energy_report(&state, &params)?));
        if cfg.snapshot_every > 0 && i % cfg.snapshot_every == 0 {
            write_snapshot(&state, &out.join(format!("step_{i:06}.snap")))?;
        }
    }
    write_csv(&out.join("energy.csv"), ENERGY_HEADER, &rows)?;
    write_snapshot(&state, &out.join("final.snap"))?;
    outcome
}

fn cmd_diagnose(input: &Path, scan_radius: f64, eps0: f64) -> Result<()> {
    let state = read_snapshot(input)?;
    let params = ModelParams::default_with(
        ExternalField { constant: [0.0; 3], modes: Vec::new() },
        state.t.max(1.0),
    );
    let report = energy_report(&state, &params)?;
    let scan = local_energy_scan(&state.m, scan_radius, (state.grid().n() / 16).max(1))?;
    println!("metric,value");
    for (name, v) in ENERGY_HEADER.split(',').zip(energy_row(&report)) {
        println!("{name},{}", csv_num(v));
    }
    println!("scan_radius,{}", csv_num(scan.r));
    println!("scan_max,{}", csv_num(scan.max_value));
    println!("scan_argmax_x,{}", csv_num(scan.argmax.0));
    println!("scan_argmax_y,{}", csv_num(scan.argmax.1));
    println!("concentration_flag,{}", u8::from(scan.max_value >= eps0));
    Ok(())
}

fn perturbed_state(cfg: &RunConfig, base: &SimState, spec: &str) -> Result<SimState> {
    let (field, amp) = spec.split_once(':').ok_or_else(|| {
        MvError::InvalidArgument(format!("perturbation spec must be field:amplitude, got {spec:?}"))
    })?;
    let eps: f64 = amp.trim().parse().map_err(|_| {
        MvError::InvalidArgument(format!("cannot parse perturbation amplitude {amp:?}"))
    })?;
    if !(eps >= 0.0) {
        return Err(MvError::InvalidArgument(format!(
            "perturbation amplitude must be nonnegative, got {eps}"
        )));
    }
    let grid = base.grid();
    let mut s = base.clone();
    match field.trim() {
        "u" => s.u = s.u.add(&presets::random_velocity(grid, 2, cfg.seed + 101, eps)),
        "f" => s.f = s.f.add(&presets::random_deformation(grid, 2, cfg.seed + 201, eps)),
        "m" => {
            let pert = presets::random_smooth(grid, 1, 3, cfg.seed + 301).scaled(eps);
            let mut m = s.m.clone();
            for iy in 0..grid.n() {
                for ix in 0..grid.n() {
                    *m.coeff_mut(0, iy, ix) += pert.coeff(0, iy, ix);
                }
            }
            s.m = renormalize_magnetization(&m)?;
        }
        other => {
            return Err(MvError::InvalidArgument(format!(
                "unknown perturbation field {other:?} (expected u, f, or m)"
            )))
        }
    }
    Ok(s)
}

fn cmd_twin(config_path: &Path, perturb: &str, out: &Path) -> Result<()> {
    let cfg = load_config(config_path)?;
    let params = cfg.model_params()?;
    let stepper = StepperConfig::with_options(cfg.dt, cfg.renormalize_every, cfg.cfl_safety)?;
    std::fs::create_dir_all(out)?;

    let base = cfg.initial_state()?;
    let other = perturbed_state(&cfg, &base, perturb)?;
    let trace = twin_run(base, other, &params, &stepper, cfg.steps())?;
    let osgood = osgood_bound_check(&trace)?;

    let mut rows = Vec::with_capacity(trace.times.len());
    for i in 0..trace.times.len() {
        let c = &trace.components[i];
        let f_hat = if i < osgood.f_hat.len() { osgood.f_hat[i] } else { 0.0 };
        rows.push(vec![
            trace.times[i],
            trace.delta_e[i],
            trace.delta_d[i],
            c.mean_u_sq,
            c.u_h_sq,
            c.f_sq,
            c.m_sq,
            f_hat,
        ]);
    }
    write_csv(
        &out.join("twin.csv"),
        "t,delta_e,delta_d,mean_u_sq,u_h_sq,f_sq,m_sq,f_hat",
        &rows,
    )?;
    write_csv(
        &out.join("osgood.csv"),
        "f_integral,vacuous",
        &[vec![osgood.f_integral, f64::from(u8::from(osgood.vacuous))]],
    )?;
    if let Some(event) = &trace.event {
        let (which, t) = match event {
            TwinEvent::Blowup { which, t } => (*which, *t),
        };
        write_csv(&out.join("events.csv"), "which,t", &[vec![which as f64, t]])?;
        return Err(MvError::NumericalBlowup { t, indicator_history: Vec::new() });
    }
    Ok(())
}

fn cmd_lp_selftest(n: usize, trials: usize, out: &Path) -> Result<()> {
    let grid = Grid::new(n)?;
    let two = Exponent::new(2.0)?;
    let four = Exponent::new(4.0)?;
    let inf = Exponent::Infinity;
    let scales: Vec<i32> = (0..=(n as f64 / 4.0).log2().floor() as i32).collect();

    let mut rows: Vec<(String, f64, bool)> = Vec::new();

    let bern = [
        ("bernstein_l2_to_l4_grad1", 1u32, two, four),
        ("bernstein_l2_to_linf_grad0", 0, two, inf),
        ("bernstein_l2_to_l2_grad2", 2, two, two),
    ];
    for (name, k, p, q) in bern {
        let rep = bernstein_verify(grid, k, p, q, &scales, trials, 7)?;
        rows.push((name.to_string(), rep.trend, rep.pass));
    }

    let hi = (n as f64) / 5.0;
    let mut commutator_max = 0.0f64;
    let mut product_half = 0.0f64;
    let mut product_mixed = 0.0f64;
    let mut negative = 0.0f64;
    let mut embedding = 0.0f64;
    for trial in 0..trials {
        let seed = 1000 + trial as u64;
        let a = random_shell(grid, 1, 1.0, hi, seed);
        let b = random_shell(grid, 1, 1.0, hi, seed + 5000);
        commutator_max = commutator_max.max(commutator_norm_check(&a, &b, 2, two, inf, two)?);
        product_half = product_half.max(product_law_check(&a, &b, 0.5, 0.5)?);
        product_mixed = product_mixed.max(product_law_check(&a, &b, 0.75, -0.25)?);
        negative = negative.max(negative_characterization_check(&a, -0.5, two, two)?);
        embedding = embedding.max(embedding_check(&a, 0.5, two, four, two, two)?);
    }
    for (name, v) in [
        ("commutator_ratio", commutator_max),
        ("product_law_half_half", product_half),
        ("product_law_three_quarter", product_mixed),
        ("negative_characterization", negative),
        ("besov_embedding", embedding),
    ] {
        rows.push((name.to_string(), v, v.is_finite()));
    }

    let mut text = String::from("name,constant,pass\n");
    for (name, v, pass) in &rows {
        text.push_str(&format!("{name},{},{}\n", csv_num(*v), if *pass { "PASS" } else { "FAIL" }));
    }
    std::fs::write(out, text)?;
    if rows.iter().all(|(_, _, pass)| *pass) {
        Ok(())
    } else {
        Err(MvError::InvalidArgument("self-test reported failures".into()))
    }
}
