//! Closed-loop Monte Carlo engine: truncated-Gaussian disturbance sampling
//! and trajectory rollout under pure RMPC, pure SMPC, or the switching
//! controller, with CSV emission for traces and per-run aggregates.
//!
//! Determinism: the generator is counter-based and keyed per (seed, run,
//! step), so runs can execute in parallel and still produce byte-identical
//! output in run order.

use crate::polytope::{Polytope, PolytopeError};
use crate::qp::QpStatus;
use crate::rmpc::{RmpcError, RmpcSynthesis};
use crate::rng::StreamRng;
use crate::safety::{safe_step, Mode, SafetyError};
use crate::smpc::{SmpcError, SmpcStatus, SmpcSynthesis};
use crate::LinearSystem;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("backup OCP infeasible at the initial state")]
    UnsafeStart,
    #[error("disturbance rejection sampling stalled (acceptance below 1e-4 over 1e5 attempts)")]
    RejectionStall,
    #[error("covariance is not positive semidefinite")]
    InvalidCovariance,
    #[error("backup OCP infeasible at step {0}; tube recursive feasibility is broken")]
    BackupInfeasible(usize),
    #[error("soft SMPC fallback infeasible at step {0}")]
    SoftFallbackFailed(usize),
    #[error("stochastic controller error: {0}")]
    Smpc(#[from] SmpcError),
    #[error("backup controller error: {0}")]
    Rmpc(#[from] RmpcError),
    #[error("polytope error: {0}")]
    Polytope(#[from] PolytopeError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<SafetyError> for SimError {
    fn from(e: SafetyError) -> Self {
        match e {
            SafetyError::UnsafeStart => SimError::UnsafeStart,
            SafetyError::Smpc(e) => SimError::Smpc(e),
            SafetyError::Rmpc(e) => SimError::Rmpc(e),
            SafetyError::Polytope(e) => SimError::Polytope(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Rmpc,
    Smpc,
    Safe,
}

/// How disturbances are drawn each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisturbanceMode {
    /// Truncated Gaussian: w ~ N(0, Σ_w) rejected until w ∈ W.
    Gaussian,
    /// Adversarial: a uniformly random vertex of W.
    Vertices,
}

/// Symmetric PSD square root L with LLᵀ = Σ (tolerates zero eigenvalues,
/// unlike a Cholesky factor).
pub fn psd_sqrt(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>, SimError> {
    let sym = 0.5 * (sigma + sigma.transpose());
    let eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.amax();
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * (1.0 + scale)) {
        return Err(SimError::InvalidCovariance);
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Draw w ~ N(0, Σ_w) truncated to W by rejection. `sigma_sqrt` is any L
/// with LLᵀ = Σ_w (see [`psd_sqrt`]).
pub fn sample_disturbance(
    rng: &mut StreamRng,
    sigma_sqrt: &DMatrix<f64>,
    w_set: &Polytope,
) -> Result<DVector<f64>, SimError> {
    let dim = sigma_sqrt.nrows();
    for _ in 0..100_000 {
        let mut z = DVector::<f64>::zeros(dim);
        let mut i = 0;
        while i < dim {
            let (a, b) = rng.normal_pair();
            z[i] = a;
            if i + 1 < dim {
                z[i + 1] = b;
            }
            i += 2;
        }
        let w = sigma_sqrt * z;
        if w_set.contains(&w)? {
            return Ok(w);
        }
    }
    Err(SimError::RejectionStall)
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    /// Time index of the recorded state: rows carry x_t, u_{t−1}, w_{t−1}.
    pub t: usize,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    /// 'S' stochastic, 'B' backup, 'F' soft SMPC fallback.
    pub mode: char,
    /// x_t ∉ X (the initial state x₀ is never recorded).
    pub violated: bool,
    /// Optimal backup cost, when the backup OCP was solved this step.
    pub j_b_star: Option<f64>,
    pub solver_calls: u32,
}

#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub run: u64,
    pub records: Vec<StepRecord>,
    pub j_sim: f64,
    pub violation_count: u64,
    pub backup_steps: u64,
    pub mode_histogram: BTreeMap<char, u64>,
    pub solver_calls: u64,
}

impl SimulationTrace {
    /// Σ_k ‖x_k‖²_Q + ‖u_{k−1}‖²_R over the stored records; must match
    /// `j_sim` to 1e-9 relative.
    pub fn recompute_cost(&self, q: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
        self.records
            .iter()
            .map(|s| (s.x.transpose() * q * &s.x)[(0, 0)] + (s.u.transpose() * r * &s.u)[(0, 0)])
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run: u64,
    pub j_sim: f64,
    pub violations: u64,
    pub backup_steps: u64,
}

#[derive(Debug, Clone)]
pub struct AggregateReport {
    pub rows: Vec<RunSummary>,
    pub avg_cost: f64,
    pub avg_violations_per_run: f64,
    pub mode_histogram: BTreeMap<char, u64>,
}

/// Everything a batch of closed-loop runs shares. Syntheses are immutable,
/// so runs only need read access.
pub struct Experiment {
    pub system: LinearSystem,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub x_set: Polytope,
    pub w_set: Polytope,
    pub sigma_sqrt: DMatrix<f64>,
    pub w_vertices: Vec<DVector<f64>>,
    pub smpc: Option<SmpcSynthesis>,
    pub rmpc: Option<RmpcSynthesis>,
    pub controller: ControllerKind,
    pub disturbance: DisturbanceMode,
    pub x0: DVector<f64>,
    pub n_steps: usize,
    pub seed: u64,
}

impl Experiment {
    fn draw_disturbance(&self, rng: &mut StreamRng) -> Result<DVector<f64>, SimError> {
        match self.disturbance {
            DisturbanceMode::Gaussian => sample_disturbance(rng, &self.sigma_sqrt, &self.w_set),
            DisturbanceMode::Vertices => {
                let n = self.w_vertices.len() as u64;
                Ok(self.w_vertices[(rng.next_u64() % n) as usize].clone())
            }
        }
    }

    fn control(
        &self,
        x: &DVector<f64>,
        step: usize,
    ) -> Result<(DVector<f64>, char, Option<f64>, u32), SimError> {
        match self.controller {
            ControllerKind::Rmpc => {
                let rmpc = self.rmpc.as_ref().expect("rmpc synthesis required");
                let b = rmpc.backup_control(x)?;
                if b.status != QpStatus::Optimal {
                    return Err(if step == 0 {
                        SimError::UnsafeStart
                    } else {
                        SimError::BackupInfeasible(step)
                    });
                }
                Ok((b.u.unwrap(), 'B', b.value, 1))
            }
            ControllerKind::Smpc => {
                let smpc = self.smpc.as_ref().expect("smpc synthesis required");
                let s = smpc.smpc_control(x)?;
                if s.status == SmpcStatus::Optimal {
                    return Ok((s.u.unwrap(), 'S', None, 1));
                }
                let soft = smpc.smpc_control_soft(x)?;
                if soft.status != SmpcStatus::Optimal {
                    return Err(SimError::SoftFallbackFailed(step));
                }
                Ok((soft.u.unwrap(), 'F', None, 2))
            }
            ControllerKind::Safe => {
                let smpc = self.smpc.as_ref().expect("smpc synthesis required");
                let rmpc = self.rmpc.as_ref().expect("rmpc synthesis required");
                let d = safe_step(x, smpc, rmpc, &self.w_vertices)?;
                let mode = match d.mode {
                    Mode::Stochastic => 'S',
                    Mode::Backup => 'B',
                };
                Ok((d.u, mode, d.backup_value, d.ocp_solves))
            }
        }
    }

    /// One closed-loop run. Records hold the post-step state: row t stores
    /// x_t together with the input and disturbance that produced it.
    pub fn rollout(&self, run: u64) -> Result<SimulationTrace, SimError> {
        if self.controller == ControllerKind::Safe {
            let rmpc = self.rmpc.as_ref().expect("rmpc synthesis required");
            if !rmpc.backup_feasible(&self.x0)? {
                return Err(SimError::UnsafeStart);
            }
        }
        let mut x = self.x0.clone();
        let mut records = Vec::with_capacity(self.n_steps);
        let mut j_sim = 0.0;
        let mut violation_count = 0;
        let mut backup_steps = 0;
        let mut mode_histogram = BTreeMap::new();
        let mut solver_calls = 0;
        for t in 0..self.n_steps {
            let (u, mode, j_b_star, calls) = self.control(&x, t)?;
            let mut rng = StreamRng::new(self.seed.wrapping_add(run), t as u64);
            let w = self.draw_disturbance(&mut rng)?;
            x = self.system.step(&x, &u, &w);
            let violated = !self.x_set.contains(&x)?;
            j_sim += (x.transpose() * &self.q * &x)[(0, 0)]
                + (u.transpose() * &self.r * &u)[(0, 0)];
            violation_count += u64::from(violated);
            backup_steps += u64::from(mode == 'B');
            *mode_histogram.entry(mode).or_insert(0) += 1;
            solver_calls += u64::from(calls);
            records.push(StepRecord {
                t: t + 1,
                x: x.clone(),
                u,
                w,
                mode,
                violated,
                j_b_star,
                solver_calls: calls,
            });
        }
        Ok(SimulationTrace {
            run,
            records,
            j_sim,
            violation_count,
            backup_steps,
            mode_histogram,
            solver_calls,
        })
    }

    /// n_runs independent rollouts (run index offsets the RNG key), executed
    /// in parallel and reduced in run order.
    pub fn run_experiment(&self, n_runs: u64) -> Result<Vec<SimulationTrace>, SimError> {
        (0..n_runs)
            .into_par_iter()
            .map(|run| self.rollout(run))
            .collect()
    }
}

pub fn aggregate(traces: &[SimulationTrace]) -> AggregateReport {
    let rows: Vec<RunSummary> = traces
        .iter()
        .map(|t| RunSummary {
            run: t.run,
            j_sim: t.j_sim,
            violations: t.violation_count,
            backup_steps: t.backup_steps,
        })
        .collect();
    let n = rows.len().max(1) as f64;
    let mut mode_histogram = BTreeMap::new();
    for t in traces {
        for (&m, &c) in &t.mode_histogram {
            *mode_histogram.entry(m).or_insert(0) += c;
        }
    }
    AggregateReport {
        avg_cost: rows.iter().map(|r| r.j_sim).sum::<f64>() / n,
        avg_violations_per_run: rows.iter().map(|r| r.violations as f64).sum::<f64>() / n,
        rows,
        mode_histogram,
    }
}

fn fmt_f64(v: f64) -> String {
    // 17 significant digits round-trip every f64 exactly.
    format!("{v:.16e}")
}

fn vector_headers(prefix: &str, len: usize) -> Vec<String> {
    if len == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=len).map(|i| format!("{prefix}{i}")).collect()
    }
}

/// Trace CSV: run, t, state components, input, disturbance components, mode,
/// violated, J_b_star, solver_calls.
pub fn write_trace_csv<W: Write>(traces: &[SimulationTrace], out: &mut W) -> std::io::Result<()> {
    let (nx, nu, nw) = traces
        .iter()
        .flat_map(|t| t.records.first())
        .map(|s| (s.x.len(), s.u.len(), s.w.len()))
        .next()
        .unwrap_or((2, 1, 2));
    let mut header = vec!["run".to_string(), "t".to_string()];
    header.extend(vector_headers("x", nx));
    header.extend(vector_headers("u", nu));
    header.extend(vector_headers("w", nw));
    header.extend(["mode", "violated", "J_b_star", "solver_calls"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for trace in traces {
        for s in &trace.records {
            let mut row = vec![trace.run.to_string(), s.t.to_string()];
            row.extend(s.x.iter().map(|&v| fmt_f64(v)));
            row.extend(s.u.iter().map(|&v| fmt_f64(v)));
            row.extend(s.w.iter().map(|&v| fmt_f64(v)));
            row.push(s.mode.to_string());
            row.push(u8::from(s.violated).to_string());
            row.push(s.j_b_star.map(fmt_f64).unwrap_or_default());
            row.push(s.solver_calls.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// Aggregate CSV: run, J_sim, violations, backup_steps.
pub fn write_aggregate_csv<W: Write>(report: &AggregateReport, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "run,J_sim,violations,backup_steps")?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.run,
            fmt_f64(r.j_sim),
            r.violations,
            r.backup_steps
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erf::erf;
    use crate::lqr;
    use crate::rmpc::{synthesize_rmpc, TerminalController, TubeInitialState};
    use crate::smpc::DisturbanceModel;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows.len(), rows[0].len(), &rows.concat())
    }

    fn vecd(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    fn benchmark_experiment(
        controller: ControllerKind,
        sigma_scale: f64,
        disturbance: DisturbanceMode,
    ) -> Experiment {
        let sys = LinearSystem::new(
            mat(&[&[1.0, 0.0075], &[-0.143, 0.996]]),
            mat(&[&[4.798], &[0.115]]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let q = mat(&[&[1.0, 0.0], &[0.0, 10.0]]);
        let r = mat(&[&[1.0]]);
        let (k, p) = lqr::lqr_gain(&sys.a, &sys.b, &q, &r).unwrap();
        let p_l = lqr::dlyap(&sys.a, &q).unwrap();
        let x_set = Polytope::new(
            mat(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]),
            vecd(&[2.8, 10.0, 10.0, 10.0]),
        )
        .unwrap();
        let u_set = Polytope::new(mat(&[&[1.0], &[-1.0]]), vecd(&[0.2, 0.2])).unwrap();
        let w_set = Polytope::inf_ball(2, 0.07);
        let sigma = DMatrix::identity(2, 2) * (0.06 * sigma_scale);
        let dist = DisturbanceModel::new(sigma.clone(), w_set.clone()).unwrap();
        let smpc = SmpcSynthesis::new(
            &sys,
            k.clone(),
            11,
            0.8,
            q.clone(),
            r.clone(),
            p,
            &x_set,
            &u_set,
            &dist,
        )
        .unwrap();
        let rmpc = synthesize_rmpc(
            &sys,
            k,
            11,
            q.clone(),
            r.clone(),
            p_l,
            &x_set,
            &u_set,
            &w_set,
            0.6,
            TerminalController::Zero,
            TubeInitialState::Fixed,
        )
        .unwrap();
        let w_vertices = w_set.vertices().unwrap();
        Experiment {
            system: sys,
            q,
            r,
            x_set,
            sigma_sqrt: psd_sqrt(&sigma).unwrap(),
            w_set,
            w_vertices,
            smpc: Some(smpc),
            rmpc: Some(rmpc),
            controller,
            disturbance,
            x0: vecd(&[-1.3, 3.5]),
            n_steps: 80,
            seed: 7,
        }
    }

    #[test]
    fn zero_covariance_gives_zero_disturbance() {
        let mut rng = StreamRng::new(1, 0);
        let l = psd_sqrt(&DMatrix::zeros(2, 2)).unwrap();
        let w_set = Polytope::inf_ball(2, 0.07);
        for _ in 0..10 {
            let w = sample_disturbance(&mut rng, &l, &w_set).unwrap();
            assert_eq!(w.amax(), 0.0);
        }
    }

    #[test]
    fn truncated_sampler_statistics() {
        let l = psd_sqrt(&(DMatrix::identity(2, 2) * 0.06)).unwrap();
        let w_set = Polytope::inf_ball(2, 0.07);
        let n = 100_000usize;
        let mut sum = vecd(&[0.0, 0.0]);
        let mut attempts = 0u64;
        let mut rng = StreamRng::new(42, 0);
        for _ in 0..n {
            // Count attempts by replaying the accept loop manually.
            let w = loop {
                attempts += 1;
                let (a, b) = rng.normal_pair();
                let w = &l * vecd(&[a, b]);
                if w_set.contains(&w).unwrap() {
                    break w;
                }
            };
            assert!(w.amax() <= 0.07 + 1e-12);
            sum += w;
        }
        let mean = sum / n as f64;
        assert!(mean.amax() < 0.003, "mean {mean}");
        // Acceptance probability: Pr(|n| <= 0.07/sqrt(0.06))^2.
        let p1 = erf(0.07 / 0.06f64.sqrt() / 2.0f64.sqrt());
        let expect = p1 * p1;
        let rate = n as f64 / attempts as f64;
        assert!((rate - expect).abs() < 0.005, "rate {rate} vs {expect}");
    }

    #[test]
    fn rejection_stall_is_reported() {
        // Acceptance ~1e-8: unit-variance draws against a 1e-4 box.
        let l = psd_sqrt(&DMatrix::identity(2, 2)).unwrap();
        let w_set = Polytope::inf_ball(2, 1e-4);
        let mut rng = StreamRng::new(3, 0);
        let err = sample_disturbance(&mut rng, &l, &w_set).unwrap_err();
        assert!(matches!(err, SimError::RejectionStall));
    }

    #[test]
    fn autonomous_swing_peaks_below_constraint() {
        // The open loop is (slowly) stable: with u = 0 and no disturbance the
        // benchmark start swings up to x1 ≈ 1.3236 at step 79 and decays.
        // Contrary to a common intuition for this benchmark, the undisturbed
        // autonomous trajectory never reaches x1 = 2.8.
        let exp = benchmark_experiment(ControllerKind::Safe, 1.0, DisturbanceMode::Gaussian);
        let mut x = exp.x0.clone();
        let mut max_x1 = x[0];
        for _ in 0..3000 {
            x = &exp.system.a * &x;
            max_x1 = max_x1.max(x[0]);
        }
        assert!((max_x1 - 1.323609084253615).abs() < 1e-12, "max x1 = {max_x1}");
        assert!(x.amax() < 1.0, "open loop failed to decay: {x}");
    }

    #[test]
    fn zero_disturbance_safe_run_switches_and_recovers() {
        let mut exp = benchmark_experiment(ControllerKind::Safe, 0.0, DisturbanceMode::Gaussian);
        exp.sigma_sqrt = DMatrix::zeros(2, 2);
        let trace = exp.rollout(0).unwrap();
        assert_eq!(trace.violation_count, 0);
        let modes: Vec<char> = trace.records.iter().map(|s| s.mode).collect();
        assert_eq!(modes[0], 'S');
        assert!(modes.contains(&'B'), "backup mode never engaged: {modes:?}");
        assert_eq!(*modes.last().unwrap(), 'S');
        // Once recovered, the controller stays stochastic.
        let last_b = modes.iter().rposition(|&m| m == 'B').unwrap();
        assert!(modes[last_b + 1..].iter().all(|&m| m == 'S'));
        assert!(trace.records.last().unwrap().x.amax() < 1e-2);
    }

    #[test]
    fn zero_disturbance_smpc_and_safe_agree_until_first_switch() {
        let mut safe = benchmark_experiment(ControllerKind::Safe, 0.0, DisturbanceMode::Gaussian);
        safe.sigma_sqrt = DMatrix::zeros(2, 2);
        let mut smpc = benchmark_experiment(ControllerKind::Smpc, 0.0, DisturbanceMode::Gaussian);
        smpc.sigma_sqrt = DMatrix::zeros(2, 2);
        let ts = safe.rollout(0).unwrap();
        let tp = smpc.rollout(0).unwrap();
        let first_b = ts
            .records
            .iter()
            .position(|s| s.mode == 'B')
            .expect("switch expected");
        for t in 0..first_b {
            assert_eq!(ts.records[t].u, tp.records[t].u, "step {t}");
            assert_eq!(ts.records[t].x, tp.records[t].x, "step {t}");
        }
        assert_ne!(ts.records[first_b].u, tp.records[first_b].u);
    }

    #[test]
    fn cost_recomputation_matches() {
        let exp = benchmark_experiment(ControllerKind::Safe, 1.0, DisturbanceMode::Gaussian);
        let trace = exp.rollout(0).unwrap();
        let j = trace.recompute_cost(&exp.q, &exp.r);
        assert!((j - trace.j_sim).abs() <= 1e-9 * j.abs().max(1.0));
        assert!(trace.j_sim.is_finite());
    }

    #[test]
    fn unsafe_start_propagates() {
        let mut exp = benchmark_experiment(ControllerKind::Safe, 1.0, DisturbanceMode::Gaussian);
        exp.x0 = vecd(&[50.0, 50.0]);
        assert!(matches!(exp.rollout(0).unwrap_err(), SimError::UnsafeStart));
    }

    #[test]
    fn single_run_aggregate_duplicates_rollout() {
        let exp = benchmark_experiment(ControllerKind::Rmpc, 1.0, DisturbanceMode::Gaussian);
        let traces = exp.run_experiment(1).unwrap();
        let report = aggregate(&traces);
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.avg_cost, traces[0].j_sim);
        assert_eq!(report.avg_violations_per_run, traces[0].violation_count as f64);
        assert_eq!(report.mode_histogram, traces[0].mode_histogram);
    }

    #[test]
    fn parallel_runs_are_deterministic() {
        let exp = benchmark_experiment(ControllerKind::Safe, 1.0, DisturbanceMode::Gaussian);
        let a = exp.run_experiment(4).unwrap();
        let b = exp.run_experiment(4).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_trace_csv(&a, &mut csv_a).unwrap();
        write_trace_csv(&b, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        let mut agg_a = Vec::new();
        let mut agg_b = Vec::new();
        write_aggregate_csv(&aggregate(&a), &mut agg_a).unwrap();
        write_aggregate_csv(&aggregate(&b), &mut agg_b).unwrap();
        assert_eq!(agg_a, agg_b);
    }

    #[test]
    fn vertex_disturbances_keep_safe_runs_feasible() {
        let exp = benchmark_experiment(ControllerKind::Safe, 1.0, DisturbanceMode::Vertices);
        let trace = exp.rollout(0).unwrap();
        assert_eq!(trace.violation_count, 0);
        for s in &trace.records {
            assert!((s.w.amax() - 0.07).abs() < 1e-12, "not a vertex: {}", s.w);
        }
    }

    #[test]
    fn csv_shapes_and_formats() {
        let mut exp = benchmark_experiment(ControllerKind::Rmpc, 1.0, DisturbanceMode::Gaussian);
        exp.n_steps = 3;
        let traces = exp.run_experiment(2).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&traces, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "run,t,x1,x2,u,w1,w2,mode,violated,J_b_star,solver_calls"
        );
        assert_eq!(lines.len(), 1 + 2 * 3);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 11);
        assert_eq!(fields[0], "0");
        assert_eq!(fields[1], "1");
        assert_eq!(fields[7], "B");
        // 17 significant digits: d.16 digits with exponent.
        assert!(fields[2].contains('e'));
        let mantissa = fields[2].trim_start_matches('-');
        assert_eq!(mantissa.split('.').nth(1).unwrap().split('e').next().unwrap().len(), 16);
    }
}
