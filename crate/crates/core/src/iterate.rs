//! Iteration driver: sequence schedules, the step loop with its stop rules,
//! and convergence diagnostics.
//!
//! Schedules follow
//!   mu_nu = mu_0^{(7/6)^nu},  s_nu = s_0^{(7/6)^nu},
//!   r_nu = r_0 (1 - sum_{i<=nu} 2^{-(i+1)}),  same shape for a_nu, gamma_nu,
//!   M_nu = M_0 (2 - 2^{-nu}),
//!   K_{nu+1} = ([log 1/mu_nu] + 1)^{3 alpha_1},  I_{nu+1} likewise.
//!
//! The printed display M_0(2 - 2^{nu+1}) is negative from nu = 0 on; the
//! driver uses M_0(2 - 2^{-nu}), the sequence consistent with M_+ = M/2 +
//! M_0, and records the substitution in the run metadata.

use crate::error::{KamError, Result};
use crate::kamstep::{
    apply_step, audit_hypotheses, compute_cutoffs, propagate_diophantine, HypothesisReport,
    MeasuredNorms, NormalForm, PropagateReport, StepOptions, StepState, StepWeights,
};
use crate::series::{
    lipschitz_seminorm, majorant_xnorm, DomainWeights, TaylorFourierSeries, XNorm,
};
use crate::spectra::{DiophantineParams, LatticeKind};
use serde::Serialize;

/// Inputs fixed across the whole iteration.
#[derive(Clone, Debug)]
pub struct ScheduleParams {
    pub mu0: f64,
    pub r0: f64,
    pub a0: f64,
    pub gamma0: f64,
    pub m0: f64,
    pub tau: f64,
    pub c_rho: f64,
    pub c1_rho: f64,
    pub sigma: f64,
    pub n: usize,
    pub lattice: LatticeKind,
    pub d: f64,
    pub delta: f64,
    pub nu_max: usize,
    pub log_base: f64,
}

/// Minimal integer alpha with (7/6)^{3 alpha - 1} >= 8.
pub fn minimal_alpha() -> u32 {
    ((1.0 + 8f64.ln() / (7.0f64 / 6.0).ln()) / 3.0).ceil() as u32
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleRow {
    pub nu: usize,
    pub r: f64,
    pub a: f64,
    pub gamma: f64,
    pub m: f64,
    pub s: f64,
    pub mu: f64,
    pub eta: f64,
    /// K_{nu+1}, I_{nu+1}: formula values and the operative (possibly
    /// overridden to the smallest integers passing H1/H2).
    pub k_next_formula: f64,
    pub i_next_formula: f64,
    pub k_next_op: f64,
    pub i_next_op: f64,
    pub cutoff_overridden: bool,
}

#[derive(Clone, Debug)]
pub struct Schedule {
    pub params: ScheduleParams,
    pub alpha1: u32,
    pub alpha2: u32,
    pub mu_star: f64,
    pub rows: Vec<ScheduleRow>,
}

/// Materializes all sequences up to nu_max (+1 for the lookahead scalars).
pub fn build_schedule(params: ScheduleParams) -> Result<Schedule> {
    if !(params.mu0 > 0.0 && params.mu0 < 1.0) {
        return Err(KamError::Config(format!(
            "mu0 must lie in (0,1), got {}",
            params.mu0
        )));
    }
    if params.sigma < 0.75 || params.sigma >= 1.0 {
        return Err(KamError::Config(format!(
            "sigma must lie in [3/4, 1), got {}",
            params.sigma
        )));
    }
    let alpha1 = minimal_alpha();
    let alpha2 = alpha1;
    let mu_star = params.mu0.powf(1.0 - params.sigma);
    let s0 = params.mu0 * params.mu0;
    let mut rows = Vec::with_capacity(params.nu_max + 2);
    let mut shrink = 0.0; // sum_{i<=nu} 2^{-(i+1)}
    for nu in 0..=(params.nu_max + 1) {
        if nu > 0 {
            shrink += 0.5f64.powi(nu as i32 + 1);
        }
        let growth = (7.0f64 / 6.0).powi(nu as i32);
        let mu = params.mu0.powf(growth);
        let s = s0.powf(growth);
        let row = ScheduleRow {
            nu,
            r: params.r0 * (1.0 - shrink),
            a: params.a0 * (1.0 - shrink),
            gamma: params.gamma0 * (1.0 - shrink),
            m: params.m0 * (2.0 - 0.5f64.powi(nu as i32)),
            s,
            mu,
            eta: mu.powf(1.0 / 3.0),
            k_next_formula: 0.0,
            i_next_formula: 0.0,
            k_next_op: 0.0,
            i_next_op: 0.0,
            cutoff_overridden: false,
        };
        rows.push(row);
    }
    let mut schedule = Schedule { params, alpha1, alpha2, mu_star, rows };
    for nu in 0..=schedule.params.nu_max {
        let state = schedule.step_state(nu);
        let audit = compute_cutoffs(&state)?;
        let row = &mut schedule.rows[nu];
        row.k_next_formula = audit.k_formula;
        row.i_next_formula = audit.i_formula;
        row.k_next_op = audit.k_op;
        row.i_next_op = audit.i_op;
        row.cutoff_overridden = audit.overridden;
    }
    Ok(schedule)
}

impl Schedule {
    /// StepState for the cycle nu -> nu + 1.
    pub fn step_state(&self, nu: usize) -> StepState {
        let cur = &self.rows[nu];
        let next = &self.rows[nu + 1];
        StepState {
            nu,
            n: self.params.n,
            lattice: self.params.lattice,
            d: self.params.d,
            delta: self.params.delta,
            tau: self.params.tau,
            c_rho: self.params.c_rho,
            c1_rho: self.params.c1_rho,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            log_base: self.params.log_base,
            r: cur.r,
            a: cur.a,
            gamma: cur.gamma,
            m_lip: cur.m,
            s: cur.s,
            mu: cur.mu,
            eta: cur.eta,
            r_next: next.r,
            a_next: next.a,
            gamma_next: next.gamma,
            m_next: next.m,
            s_next: next.s,
            mu_next: next.mu,
            m0: self.params.m0,
            e: 0.0,
            sigma: self.params.sigma,
            mu_star: self.mu_star,
        }
    }

    /// Weights measuring |X_P| at level nu: monomials on the fixed domain
    /// weight a_0/4, gradients at the shrinking target a_nu.
    pub fn weights(&self, nu: usize, p: f64, p_bar: f64) -> Result<DomainWeights> {
        let row = &self.rows[nu];
        DomainWeights::new(self.params.a0 / 4.0, p, row.a, p_bar, row.r, row.s)
    }
}

/// Stop rules of the driver.
#[derive(Clone, Copy, Debug)]
pub struct StopRule {
    pub nu_max: usize,
    pub norm_floor: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum StopReason {
    Completed,
    NormFloor,
    Excised(String),
    Divergence(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRecord {
    pub nu: usize,
    pub norm: XNorm,
    pub norm_total: f64,
    pub terms: usize,
    pub omega_drift_total: f64,
    pub omega_step_drift: f64,
    pub omega_drift_mdelta: f64,
    pub residual_ratio: Option<f64>,
    pub hypotheses: Option<HypothesisReport>,
    pub propagate: Option<PropagateReport>,
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunTrace {
    pub param_tag: u64,
    pub xi: Vec<f64>,
    pub records: Vec<TraceRecord>,
    pub omega0: Vec<f64>,
    pub omega_star: Vec<f64>,
    pub e_star: f64,
    pub mu_star: f64,
    pub stop: StopReason,
    pub completed_steps: usize,
}

/// Per-sample state of a family run.
struct Lane {
    nf: NormalForm,
    p: TaylorFourierSeries,
    trace: RunTrace,
    live: bool,
}

/// Runs the iteration for a family of parameter samples in lockstep. The
/// family feeds the finite-difference Lipschitz semi-norm of X_{P_nu} that
/// H9 compares against M_+ mu_+; a single sample leaves H9 at zero.
pub fn run_family(
    starts: Vec<(NormalForm, TaylorFourierSeries)>,
    schedule: &Schedule,
    opts: &StepOptions,
    stop: &StopRule,
    p_weights: (f64, f64),
) -> Result<Vec<RunTrace>> {
    let (pw, pbw) = p_weights;
    let mut lanes: Vec<Lane> = Vec::with_capacity(starts.len());
    for (nf, p) in starts {
        p.assert_no_zero_sites()?;
        let w0 = schedule.weights(0, pw, pbw)?;
        let norm = majorant_xnorm(&p, &w0);
        let trace = RunTrace {
            param_tag: p.param_tag.0,
            xi: nf.xi.clone(),
            records: vec![TraceRecord {
                nu: 0,
                norm,
                norm_total: norm.total(),
                terms: p.len(),
                omega_drift_total: 0.0,
                omega_step_drift: 0.0,
                omega_drift_mdelta: 0.0,
                residual_ratio: None,
                hypotheses: None,
                propagate: None,
                wall_ms: 0.0,
            }],
            omega0: nf.omega_initial.clone(),
            omega_star: nf.omega.clone(),
            e_star: nf.e,
            mu_star: schedule.mu_star,
            stop: StopReason::Completed,
            completed_steps: 0,
        };
        lanes.push(Lane { nf, p, trace, live: true });
    }

    let nu_max = stop.nu_max.min(schedule.params.nu_max);
    for nu in 0..nu_max {
        let state = schedule.step_state(nu);
        let weights = StepWeights::from_state(&state, schedule.params.a0 / 4.0, pw, pbw)?;
        let mut outcomes: Vec<Option<(crate::kamstep::StepOutcome, f64)>> = Vec::new();
        for lane in lanes.iter_mut() {
            if !lane.live {
                outcomes.push(None);
                continue;
            }
            let t0 = std::time::Instant::now();
            match apply_step(&lane.nf, &lane.p, &state, &weights, opts) {
                Ok(out) => {
                    outcomes.push(Some((out, t0.elapsed().as_secs_f64() * 1e3)));
                }
                Err(KamError::Excision { k, l, divisor, threshold }) => {
                    lane.live = false;
                    lane.trace.stop = StopReason::Excised(format!(
                        "nu={nu} k={k:?} l={l:?} divisor={divisor:.3e} threshold={threshold:.3e}"
                    ));
                    outcomes.push(None);
                }
                Err(KamError::LieDivergence { order, norm }) => {
                    lane.live = false;
                    lane.trace.stop = StopReason::Divergence(format!(
                        "nu={nu} order={order} norm={norm:.3e}"
                    ));
                    outcomes.push(None);
                }
                Err(e) => return Err(e),
            }
        }

        // family Lipschitz semi-norm of the new perturbations
        let next_fam: Vec<(Vec<f64>, TaylorFourierSeries)> = lanes
            .iter()
            .zip(&outcomes)
            .filter_map(|(lane, out)| {
                out.as_ref().map(|(o, _)| (lane.nf.xi.clone(), o.p_next.clone()))
            })
            .collect();
        let lip = if next_fam.len() >= 2 {
            Some(lipschitz_seminorm(&next_fam, &weights.next)?)
        } else {
            None
        };

        for (lane, outcome) in lanes.iter_mut().zip(outcomes.into_iter()) {
            let (out, apply_ms) = match outcome {
                Some(o) => o,
                None => continue,
            };
            let t0 = std::time::Instant::now();
            let propagate = propagate_diophantine(&out.nf_next, &lane.nf, &state, &out.cutoffs, opts)?;
            let omega_step_drift = out
                .omega_shift
                .iter()
                .map(|v| v.abs())
                .fold(0.0, f64::max);
            let omega_drift_total = out
                .nf_next
                .omega
                .iter()
                .zip(&out.nf_next.omega_initial)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let measured = MeasuredNorms {
                xp: out.p_norm.total(),
                xr: out.r_norm.total(),
                x_tail: out.tail_norm.total(),
                xf: out.f_norm.total(),
                xp_next: out.p_next_norm.total(),
                xp_next_lip: lip,
                omega_drift: omega_step_drift,
                omega_drift_mdelta: out.nf_next.drift_norm_mdelta(schedule.params.delta),
                worst_drift_product: propagate.worst_drift_product,
            };
            let hyp = audit_hypotheses(&state, &out.cutoffs, &measured, &lane.nf.sm.tangential);
            lane.trace.records.push(TraceRecord {
                nu: nu + 1,
                norm: out.p_next_norm,
                norm_total: out.p_next_norm.total(),
                terms: out.p_next.len(),
                omega_drift_total,
                omega_step_drift,
                omega_drift_mdelta: out.nf_next.drift_norm_mdelta(schedule.params.delta),
                residual_ratio: Some(out.residual_ratio),
                hypotheses: Some(hyp),
                propagate: Some(propagate),
                wall_ms: apply_ms + t0.elapsed().as_secs_f64() * 1e3,
            });
            lane.trace.completed_steps = nu + 1;
            lane.nf = out.nf_next;
            lane.p = out.p_next;
            lane.trace.omega_star = lane.nf.omega.clone();
            lane.trace.e_star = lane.nf.e;
            if out.p_next_norm.total() < stop.norm_floor && lane.live {
                lane.live = false;
                lane.trace.stop = StopReason::NormFloor;
            }
        }
        if lanes.iter().all(|l| !l.live) {
            break;
        }
    }

    Ok(lanes.into_iter().map(|l| l.trace).collect())
}

/// Single-sample run.
pub fn run(
    nf: NormalForm,
    p0: TaylorFourierSeries,
    schedule: &Schedule,
    opts: &StepOptions,
    stop: &StopRule,
    p_weights: (f64, f64),
) -> Result<RunTrace> {
    Ok(run_family(vec![(nf, p0)], schedule, opts, stop, p_weights)?
        .pop()
        .expect("one lane in, one trace out"))
}

/// Decay diagnostics of a completed trace.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    /// Fitted exponent beta in log||P_{nu+1}|| ~ beta log||P_nu||.
    pub beta: Option<f64>,
    pub non_convergent: bool,
    pub norms: Vec<f64>,
    pub step_drifts: Vec<f64>,
    pub hypothesis_pass_rate: f64,
    pub drift_budget: f64,
    pub drift_total: f64,
    pub drift_ok: bool,
}

pub fn convergence_report(trace: &RunTrace, gamma0: f64) -> ConvergenceReport {
    let norms: Vec<f64> = trace.records.iter().map(|r| r.norm_total).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for w in norms.windows(2) {
        if w[0] > 0.0 && w[1] > 0.0 {
            xs.push(w[0].ln());
            ys.push(w[1].ln());
        }
    }
    let beta = crate::numerics::origin_slope(&xs, &ys);
    let step_drifts: Vec<f64> = trace
        .records
        .iter()
        .skip(1)
        .map(|r| r.omega_step_drift)
        .collect();
    let mut passed = 0usize;
    let mut total = 0usize;
    for r in &trace.records {
        if let Some(h) = &r.hypotheses {
            total += h.entries().len();
            passed += h.entries().iter().filter(|(_, e)| e.pass).count();
        }
    }
    let drift_budget = gamma0 * trace.mu_star;
    let drift_total = trace
        .records
        .last()
        .map(|r| r.omega_drift_total)
        .unwrap_or(0.0);
    ConvergenceReport {
        non_convergent: beta.map(|b| b <= 1.0).unwrap_or(true),
        beta,
        norms,
        step_drifts,
        hypothesis_pass_rate: if total == 0 { 1.0 } else { passed as f64 / total as f64 },
        drift_budget,
        drift_total,
        drift_ok: drift_total <= drift_budget,
    }
}
