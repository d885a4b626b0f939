//! Command-line front end: Monte Carlo simulation, tightened-set diagnostics,
//! and an invariant check suite, all driven by a JSON config.
//!
//! Exit codes: 0 success, 1 config/usage error, 2 infeasible start (simulate),
//! 3 empty tightened set (sets), 4 failed invariant (check).
//!
//! Parallelism follows rayon's default thread pool; set `RAYON_NUM_THREADS`
//! to override.

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use safe_smpc::config::{CliConfigFile, ConfigError};
use safe_smpc::polytope::{affine_map, minkowski_sum, Polytope};
use safe_smpc::qp;
use safe_smpc::rmpc::RmpcError;
use safe_smpc::sim::{
    aggregate, write_aggregate_csv, write_trace_csv, ControllerKind, DisturbanceMode, SimError,
};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "safe-smpc", version, about = "Safe stochastic MPC simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllerArg {
    Rmpc,
    Smpc,
    Safe,
}

#[derive(Clone, Copy, ValueEnum)]
enum DisturbanceArg {
    /// Truncated Gaussian sampling.
    Gaussian,
    /// Adversarial: random vertices of the disturbance set.
    Vertices,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run closed-loop Monte Carlo simulations and write CSV/JSON outputs.
    Simulate {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "safe")]
        controller: ControllerArg,
        /// Override the number of runs from the config.
        #[arg(long)]
        runs: Option<u64>,
        /// Override the base seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for trace.csv, aggregate.csv, summary.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "gaussian")]
        disturbance: DisturbanceArg,
    },
    /// Compute the tightened sets and write them as JSON.
    Sets {
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite and report each check.
    Check { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Simulate {
            config,
            controller,
            runs,
            seed,
            out,
            disturbance,
        } => cmd_simulate(&config, controller, runs, seed, &out, disturbance, cli.quiet),
        Cmd::Sets { config, out } => cmd_sets(&config, out.as_deref(), cli.quiet),
        Cmd::Check { config } => cmd_check(&config, cli.quiet),
    };
    ExitCode::from(code)
}

fn fail(msg: impl std::fmt::Display, code: u8) -> u8 {
    eprintln!("error: {msg}");
    code
}

/// Write via a temporary file in the same directory plus an atomic rename, so
/// a failure never leaves a partial file behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

#[derive(Serialize)]
struct Summary {
    avg_cost: f64,
    avg_violations: f64,
    mode_histogram: std::collections::BTreeMap<char, u64>,
}

fn cmd_simulate(
    config: &Path,
    controller: ControllerArg,
    runs: Option<u64>,
    seed: Option<u64>,
    out: &Path,
    disturbance: DisturbanceArg,
    quiet: bool,
) -> u8 {
    let mut cfg = match CliConfigFile::from_path(config) {
        Ok(c) => c,
        Err(e) => return fail(e, 1),
    };
    if let Some(s) = seed {
        cfg.simulation.seed = s;
    }
    let n_runs = runs.unwrap_or(cfg.simulation.n_runs);
    let kind = match controller {
        ControllerArg::Rmpc => ControllerKind::Rmpc,
        ControllerArg::Smpc => ControllerKind::Smpc,
        ControllerArg::Safe => ControllerKind::Safe,
    };
    let dist = match disturbance {
        DisturbanceArg::Gaussian => DisturbanceMode::Gaussian,
        DisturbanceArg::Vertices => DisturbanceMode::Vertices,
    };
    let exp = match cfg.build_experiment(kind, dist) {
        Ok(e) => e,
        Err(e) => return fail(e, 1),
    };
    if !quiet {
        eprintln!("simulating {n_runs} runs x {} steps", exp.n_steps);
    }
    let traces = match exp.run_experiment(n_runs) {
        Ok(t) => t,
        Err(e @ SimError::UnsafeStart) => return fail(e, 2),
        Err(e) => return fail(e, 1),
    };
    let report = aggregate(&traces);
    let summary = Summary {
        avg_cost: report.avg_cost,
        avg_violations: report.avg_violations_per_run,
        mode_histogram: report.mode_histogram.clone(),
    };
    if let Err(e) = std::fs::create_dir_all(out) {
        return fail(e, 1);
    }
    let mut trace_csv = Vec::new();
    let mut agg_csv = Vec::new();
    if write_trace_csv(&traces, &mut trace_csv).is_err()
        || write_aggregate_csv(&report, &mut agg_csv).is_err()
    {
        return fail("failed to render CSV output", 1);
    }
    let summary_json = match serde_json::to_vec_pretty(&summary) {
        Ok(j) => j,
        Err(e) => return fail(e, 1),
    };
    for (name, bytes) in [
        ("trace.csv", &trace_csv),
        ("aggregate.csv", &agg_csv),
        ("summary.json", &summary_json),
    ] {
        if let Err(e) = write_atomic(&out.join(name), bytes) {
            return fail(e, 1);
        }
    }
    if !quiet {
        eprintln!(
            "avg cost {:.6}, avg violations/run {:.4}",
            summary.avg_cost, summary.avg_violations
        );
    }
    println!("{}", String::from_utf8_lossy(&summary_json));
    0
}

#[derive(Serialize)]
struct SetJson {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

fn set_json(p: &Polytope) -> SetJson {
    SetJson {
        a: (0..p.a.nrows())
            .map(|i| (0..p.a.ncols()).map(|j| p.a[(i, j)]).collect())
            .collect(),
        b: p.b.iter().cloned().collect(),
    }
}

#[derive(Serialize)]
struct SetsDump {
    z: SetJson,
    x_bar: SetJson,
    u_bar: SetJson,
    xf: SetJson,
    k: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
}

fn cmd_sets(config: &Path, out: Option<&Path>, quiet: bool) -> u8 {
    let cfg = match CliConfigFile::from_path(config) {
        Ok(c) => c,
        Err(e) => return fail(e, 1),
    };
    let built = match cfg.build_controllers() {
        Ok(b) => b,
        Err(ConfigError::Rmpc(e @ RmpcError::EmptyTightenedSet(_))) => return fail(e, 3),
        Err(e) => return fail(e, 1),
    };
    let rmpc = &built.rmpc;
    let dump = SetsDump {
        z: set_json(&rmpc.z),
        x_bar: set_json(&rmpc.x_bar),
        u_bar: set_json(&rmpc.u_bar),
        xf: set_json(&rmpc.xf),
        k: (0..built.k.nrows())
            .map(|i| (0..built.k.ncols()).map(|j| built.k[(i, j)]).collect())
            .collect(),
        p: (0..built.p_dare.nrows())
            .map(|i| (0..built.p_dare.ncols()).map(|j| built.p_dare[(i, j)]).collect())
            .collect(),
    };
    let json = match serde_json::to_vec_pretty(&dump) {
        Ok(j) => j,
        Err(e) => return fail(e, 1),
    };
    // Diagnostics: the tightened bound on the first state and the tightened
    // input interval for single-input systems.
    let n = rmpc.x_bar.dim();
    let mut e1 = DVector::zeros(n);
    e1[0] = 1.0;
    match rmpc.x_bar.support_value(&e1) {
        Ok(v) => println!("tightened state bound: x1 <= {v:.6}"),
        Err(e) => return fail(e, 1),
    }
    if rmpc.u_bar.dim() == 1 {
        let dir = DVector::from_row_slice(&[1.0]);
        let hi = rmpc.u_bar.support_value(&dir);
        let lo = rmpc.u_bar.support_value(&(-dir));
        match (lo, hi) {
            (Ok(lo), Ok(hi)) => println!("tightened input bounds: {:.6} <= u <= {hi:.6}", -lo),
            _ => return fail("could not evaluate tightened input bounds", 1),
        }
    }
    match out {
        Some(path) => {
            if let Err(e) = write_atomic(path, &json) {
                return fail(e, 1);
            }
            if !quiet {
                eprintln!("sets written to {}", path.display());
            }
        }
        None => println!("{}", String::from_utf8_lossy(&json)),
    }
    0
}

#[derive(Serialize)]
struct CheckReport {
    name: &'static str,
    ok: bool,
    detail: String,
}

fn cmd_check(config: &Path, quiet: bool) -> u8 {
    // Parse without validation so out-of-range parameters surface as named
    // check failures (exit 4), not as a config error (exit 1).
    let text = match std::fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => return fail(e, 1),
    };
    let cfg: CliConfigFile = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => return fail(e, 1),
    };
    let mut checks: Vec<CheckReport> = Vec::new();
    let push = |checks: &mut Vec<CheckReport>, name, res: Result<String, String>| {
        let (ok, detail) = match res {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        checks.push(CheckReport { name, ok, detail });
        ok
    };

    let beta = cfg.controller.beta;
    let beta_ok = push(
        &mut checks,
        "BetaOutOfRange",
        if (0.5..1.0).contains(&beta) {
            Ok(format!("beta = {beta}"))
        } else {
            Err(format!("beta = {beta} outside [0.5, 1)"))
        },
    );
    let shape_ok = push(
        &mut checks,
        "ConfigShape",
        match cfg.validate() {
            Ok(()) => Ok("dimensions consistent".into()),
            // Avoid double-reporting a bad beta as a shape failure.
            Err(e) if beta_ok => Err(e.to_string()),
            Err(_) => Ok("skipped (beta already failed)".into()),
        },
    ) && beta_ok;

    let mut phi_ok = false;
    if shape_ok {
        phi_ok = push(
            &mut checks,
            "UnstablePhi",
            match cfg.closed_loop_spectral_radius() {
                Ok(rho) if rho < 1.0 => Ok(format!("rho(A+BK) = {rho:.6}")),
                Ok(rho) => Err(format!("rho(A+BK) = {rho:.6} >= 1")),
                Err(e) => Err(e.to_string()),
            },
        );
    }

    if shape_ok && phi_ok {
        match cfg.build_controllers() {
            Err(e) => {
                push(&mut checks, "Synthesis", Err(e.to_string()));
            }
            Ok(built) => {
                push(&mut checks, "Synthesis", Ok("controllers built".into()));
                let sys = &built.system;
                let phi = &sys.a + &sys.b * &built.k;

                // DARE residual: P = AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA + Q.
                let p = &built.p_dare;
                let btpb = &sys.b.transpose() * p * &sys.b + &cfg.controller.r;
                let res = match btpb.clone().try_inverse() {
                    Some(inv) => {
                        let gain_term =
                            sys.a.transpose() * p * &sys.b * inv * sys.b.transpose() * p * &sys.a;
                        let resid = (sys.a.transpose() * p * &sys.a - gain_term
                            + &cfg.controller.q
                            - p)
                            .amax();
                        if resid < 1e-8 * (1.0 + p.amax()) {
                            Ok(format!("residual {resid:.3e}"))
                        } else {
                            Err(format!("residual {resid:.3e}"))
                        }
                    }
                    None => Err("R + BᵀPB is singular".into()),
                };
                push(&mut checks, "DareResidual", res);

                // RPI containment: Phi Z + G W ⊆ Z.
                let rmpc = &built.rmpc;
                let rpi = affine_map(&rmpc.z, &phi)
                    .and_then(|pz| {
                        Ok(minkowski_sum(
                            &pz,
                            &affine_map(&built.w_set, &sys.g)?,
                        )?)
                    })
                    .and_then(|s| s.subset_of(&rmpc.z));
                push(
                    &mut checks,
                    "RpiContainment",
                    match rpi {
                        Ok(true) => Ok("Phi Z + G W inside Z".into()),
                        Ok(false) => Err("Phi Z + G W escapes Z".into()),
                        Err(e) => Err(e.to_string()),
                    },
                );

                // Lyapunov descent of the backup value along the undisturbed
                // closed loop from x0 (when x0 is backup-feasible).
                let mut x = cfg.simulation.x0.clone();
                let descent = (|| -> Result<Result<String, String>, String> {
                    if !rmpc.backup_feasible(&x).map_err(|e| e.to_string())? {
                        return Ok(Ok("skipped: x0 outside the backup domain".into()));
                    }
                    let mut prev = f64::INFINITY;
                    for t in 0..20 {
                        let b = rmpc.backup_control(&x).map_err(|e| e.to_string())?;
                        let (u, v) = match (b.u, b.value) {
                            (Some(u), Some(v)) => (u, v),
                            _ => return Ok(Err(format!("backup infeasible at step {t}"))),
                        };
                        if v > prev + 1e-6 * (1.0 + prev.abs()) {
                            return Ok(Err(format!("value rose {prev:.6e} -> {v:.6e} at {t}")));
                        }
                        prev = v;
                        x = &sys.a * &x + &sys.b * &u;
                    }
                    Ok(Ok("nonincreasing over 20 steps".into()))
                })();
                push(
                    &mut checks,
                    "LyapunovDescent",
                    descent.unwrap_or_else(Err),
                );

                // KKT spot check on the backup OCP at x0.
                let kkt = rmpc
                    .build_backup_ocp(&cfg.simulation.x0)
                    .map_err(|e| e.to_string())
                    .and_then(|prob| {
                        let tol = safe_smpc::qp::SolverTolerances::default();
                        let sol = qp::solve_qp(&prob, tol).map_err(|e| e.to_string())?;
                        if sol.status != safe_smpc::qp::QpStatus::Optimal {
                            return Ok(format!("skipped: backup OCP {:?} at x0", sol.status));
                        }
                        qp::kkt_residuals(&prob, &sol, tol)?;
                        Ok("stationarity/feasibility/complementarity within tolerance".into())
                    });
                push(&mut checks, "KktSpotCheck", kkt);
            }
        }
    }

    let report = serde_json::to_string_pretty(&checks).unwrap_or_default();
    println!("{report}");
    if !quiet {
        for c in &checks {
            eprintln!("{} - {}: {}", if c.ok { "ok  " } else { "FAIL" }, c.name, c.detail);
        }
    }
    match checks.iter().find(|c| !c.ok) {
        Some(first) => fail(format!("invariant check failed: {}", first.name), 4),
        None => 0,
    }
}
