//! One KAM cycle: cutoffs, truncation of the perturbation, homological
//! equation on admissible parameters, Lie transform, normal-form update, and
//! the audit of hypotheses H1)-H9).
//!
//! The constants c_1..c_6 of the step lemmas are never assumed: every
//! H-inequality is evaluated with the implied constant measured from the run
//! itself, so each check compares the genuine operational quantity (flow
//! displacement, frequency drift, contracted norm) against its budget.

use crate::error::{KamError, Result};
use crate::numerics::{exp_poly_tail, smallest_tail_cutoff};
use crate::series::{
    lie_series_sum, majorant_xnorm, poisson_bracket, DomainWeights, LieOptions, ModeKey,
    Site, TaylorFourierSeries, XNorm,
};
use crate::spectra::{
    bracket_ld, classify_l, diophantine_threshold, DiophantineParams, DivisorClass,
    FrequencyMap, LatticeKind, Precision, SpectrumModel,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Scalars of one KAM step, current and next.
#[derive(Clone, Debug, Serialize)]
pub struct StepState {
    pub nu: usize,
    pub n: usize,
    pub lattice: LatticeKind,
    pub d: f64,
    pub delta: f64,
    pub tau: f64,
    pub c_rho: f64,
    pub c1_rho: f64,
    pub alpha1: u32,
    pub alpha2: u32,
    /// Base of the logarithm in the cutoff formulas (natural by default).
    pub log_base: f64,
    pub r: f64,
    pub a: f64,
    pub gamma: f64,
    pub m_lip: f64,
    pub s: f64,
    pub mu: f64,
    pub eta: f64,
    pub r_next: f64,
    pub a_next: f64,
    pub gamma_next: f64,
    pub m_next: f64,
    pub s_next: f64,
    pub mu_next: f64,
    pub m0: f64,
    pub e: f64,
    pub sigma: f64,
    pub mu_star: f64,
}

impl StepState {
    /// K_+ = ([log(1/mu)] + 1)^{3 alpha_1}, and the same with alpha_2 for I_+.
    pub fn formula_cutoffs(&self) -> (f64, f64) {
        let lg = (1.0 / self.mu).ln() / self.log_base.ln();
        let base = lg.floor().max(0.0) + 1.0;
        (
            base.powi(3 * self.alpha1 as i32),
            base.powi(3 * self.alpha2 as i32),
        )
    }
}

/// Result of the cutoff computation with the H1)/H2) tail audit.
#[derive(Clone, Debug, Serialize)]
pub struct CutoffAudit {
    pub k_formula: f64,
    pub i_formula: f64,
    pub k_op: f64,
    pub i_op: f64,
    pub h1_tail_at_formula: f64,
    pub h2_tail_at_formula: f64,
    pub overridden: bool,
}

/// Evaluates the formula cutoffs, audits the tail integrals
/// int_{K+}^inf t^{n+4} e^{-t(r-r+)/16} dt <= mu and
/// int_{I+}^inf t^{rho+4} e^{-t(a-a+)} dt <= mu, and overrides with the
/// smallest integers satisfying them when the formula values fail.
pub fn compute_cutoffs(state: &StepState) -> Result<CutoffAudit> {
    let dr = state.r - state.r_next;
    let da = state.a - state.a_next;
    if dr <= 0.0 || da <= 0.0 {
        return Err(KamError::Config(format!(
            "non-positive domain gaps: r-r+={dr}, a-a+={da}"
        )));
    }
    let (kf, ifl) = state.formula_cutoffs();
    let rho = state.lattice.rho();
    let n_exp = state.n as u32 + 4;
    let rho_exp = rho as u32 + 4;
    let c1 = dr / 16.0;
    let c2 = da;

    // Tail at very large cutoffs underflows; evaluate only below a threshold.
    let tail = |x: f64, n: u32, c: f64| -> f64 {
        if x * c > 1e4 {
            0.0
        } else {
            exp_poly_tail(x, n, c)
        }
    };
    let t1 = tail(kf, n_exp, c1);
    let t2 = tail(ifl, rho_exp, c2);
    let mut k_op = kf;
    let mut i_op = ifl;
    let mut overridden = false;
    if t1 > state.mu {
        k_op = smallest_tail_cutoff(n_exp, c1, state.mu)
            .ok_or_else(|| KamError::Config("no integer cutoff satisfies H1".into()))?
            as f64;
        overridden = true;
    }
    if t2 > state.mu {
        i_op = smallest_tail_cutoff(rho_exp, c2, state.mu)
            .ok_or_else(|| KamError::Config("no integer cutoff satisfies H2".into()))?
            as f64;
        overridden = true;
    }
    Ok(CutoffAudit {
        k_formula: kf,
        i_formula: ifl,
        k_op,
        i_op,
        h1_tail_at_formula: t1,
        h2_tail_at_formula: t2,
        overridden,
    })
}

fn key_in_r_shape(key: &ModeKey, k_cut: f64, i_cut: f64) -> bool {
    if key.k_norm1() as f64 > k_cut {
        return false;
    }
    let mt = key.m_total();
    let qt = key.q_total();
    let qbt = key.qbar_total();
    if qt + qbt == 0 {
        return mt <= 1;
    }
    if mt > 0 {
        return false;
    }
    match qt + qbt {
        1 => true,
        2 => {
            if qt == 1 && qbt == 1 {
                // z_i zbar_j block carries the normal-mode cutoff on the z site
                key.q[0].0.norm1() as f64 <= i_cut
            } else {
                true
            }
        }
        _ => false,
    }
}

/// Splits P into the removable truncation R = R^0 + R^1 + R^2 and the tail
/// P - R. The average part [R] (k = 0 resonant terms) stays inside R and is
/// separated afterwards by `normal_part`. R + tail = P exactly.
pub fn truncate(
    p: &TaylorFourierSeries,
    k_cut: f64,
    i_cut: f64,
) -> (TaylorFourierSeries, TaylorFourierSeries) {
    let r = p.retain(|key| key_in_r_shape(key, k_cut, i_cut));
    let tail = p.retain(|key| !key_in_r_shape(key, k_cut, i_cut));
    (r, tail)
}

/// [R]: the k = 0 terms the generating function cannot remove - the
/// constant, the terms linear in y, and the diagonal z_i zbar_i terms. With
/// `special_form` set, an off-diagonal k = 0 term with |i| = |j| is an input
/// violation and errors.
pub fn normal_part(
    r: &TaylorFourierSeries,
    special_form: bool,
) -> Result<TaylorFourierSeries> {
    let mut violation: Option<ModeKey> = None;
    let avg = r.retain(|key| {
        if key.k_norm1() != 0 {
            return false;
        }
        let qt = key.q_total();
        let qbt = key.qbar_total();
        if qt + qbt == 0 {
            return key.m_total() <= 1;
        }
        if key.m_total() == 0 && qt == 1 && qbt == 1 {
            let zi = &key.q[0].0;
            let zj = &key.qbar[0].0;
            if zi == zj {
                return true;
            }
            if special_form && zi.norm1() == zj.norm1() && violation.is_none() {
                violation = Some(key.clone());
            }
        }
        false
    });
    if let Some(key) = violation {
        return Err(KamError::SpecialForm(format!("{key:?}")));
    }
    Ok(avg)
}

/// Normal-form data at one parameter sample: current frequencies and their
/// accumulated drift.
#[derive(Clone, Debug)]
pub struct NormalForm {
    pub e: f64,
    pub omega: Vec<f64>,
    pub omega_initial: Vec<f64>,
    /// Per-site accumulated drift of the normal frequencies.
    pub drift: BTreeMap<Site, f64>,
    pub fm: FrequencyMap,
    pub sm: SpectrumModel,
    pub xi: Vec<f64>,
    pub precision: Precision,
}

impl NormalForm {
    pub fn new(fm: FrequencyMap, sm: SpectrumModel, xi: Vec<f64>, precision: Precision) -> Self {
        let omega = fm.eval(&xi);
        NormalForm {
            e: 0.0,
            omega: omega.clone(),
            omega_initial: omega,
            drift: BTreeMap::new(),
            fm,
            sm,
            xi,
            precision,
        }
    }

    pub fn frequency(&self, site: &Site) -> Result<f64> {
        Ok(self.sm.eval(site, &self.xi)? + self.drift.get(site).copied().unwrap_or(0.0))
    }

    /// <k, omega> + sum l_i Omega_i with the configured precision.
    pub fn divisor(&self, k: &[i64], l: &[(Site, i64)]) -> Result<f64> {
        match self.precision {
            Precision::Double => {
                let mut v: f64 = k
                    .iter()
                    .zip(&self.omega)
                    .map(|(ki, w)| *ki as f64 * w)
                    .sum();
                for (site, li) in l {
                    v += *li as f64 * self.frequency(site)?;
                }
                Ok(v)
            }
            Precision::Extended => {
                let mut pairs: Vec<(f64, f64)> = k
                    .iter()
                    .zip(&self.omega)
                    .map(|(ki, w)| (*ki as f64, *w))
                    .collect();
                for (site, li) in l {
                    pairs.push((*li as f64, self.frequency(site)?));
                }
                Ok(crate::numerics::dot_compensated(pairs.into_iter()))
            }
        }
    }

    /// sup_i |drift_i| |i|^{-delta}.
    pub fn drift_norm_mdelta(&self, delta: f64) -> f64 {
        self.drift
            .iter()
            .map(|(s, v)| v.abs() * (s.norm1() as f64).powf(-delta))
            .fold(0.0, f64::max)
    }

    /// Materializes N = e + <omega, y> + sum Omega_i z_i zbar_i over `sites`.
    pub fn as_series(
        &self,
        n: usize,
        rho: usize,
        tag: crate::series::ParamTag,
        sites: &[Site],
    ) -> Result<TaylorFourierSeries> {
        let mut out = TaylorFourierSeries::zero(n, rho, tag);
        if self.e != 0.0 {
            out.add_term(ModeKey::constant(n), Complex64::new(self.e, 0.0))?;
        }
        for (j, w) in self.omega.iter().enumerate() {
            let mut key = ModeKey::constant(n);
            key.m[j] = 1;
            out.add_term(key, Complex64::new(*w, 0.0))?;
        }
        for site in sites {
            let mut key = ModeKey::constant(n);
            key.q = vec![(site.clone(), 1)];
            key.qbar = vec![(site.clone(), 1)];
            out.add_term(key, Complex64::new(self.frequency(site)?, 0.0))?;
        }
        Ok(out)
    }
}

/// Solves {N,F} + (R - [R]) = 0 termwise. With the oscillator-oriented
/// bracket the action of N on a monomial is -i(<k,omega> + <l,Omega>) with
/// l = q - qbar, so each coefficient is divided by i times that real
/// combination. Inadmissible keys signal parameter excision, not a numerical
/// failure.
pub fn solve_homological(
    nf: &NormalForm,
    r_active: &TaylorFourierSeries,
    dio: &DiophantineParams,
) -> Result<TaylorFourierSeries> {
    let mut f = TaylorFourierSeries::zero(r_active.n, r_active.rho, r_active.param_tag);
    for (key, coeff) in r_active.iter() {
        let l = key.signed_l();
        let class = classify_l(&l)?;
        if key.k_norm1() == 0 && matches!(class, DivisorClass::Zero) {
            return Err(KamError::ZeroZeroDivisor);
        }
        let thr = diophantine_threshold(&key.k, &class, bracket_ld(&l, dio.d), dio)?;
        let div = nf.divisor(&key.k, &l)?;
        if div.abs() < thr {
            return Err(KamError::Excision {
                k: key.k.clone(),
                l,
                divisor: div,
                threshold: thr,
            });
        }
        // F = (R - [R]) / (i div) = -i (R - [R]) / div
        let val = coeff * Complex64::new(0.0, -1.0) / div;
        f.add_term(key.clone(), val)?;
    }
    Ok(f)
}

/// Gamma(r - r+) = sum_{0 < |k| <= K+} |k|^{4 tau + 4} e^{-|k| (r-r+)/8},
/// by direct summation over lattice shells.
pub fn gamma_sum(dr: f64, tau: f64, n: usize, k_cut: f64) -> f64 {
    let c = dr / 8.0;
    let expo = 4.0 * tau + 4.0;
    let mut sum = 0.0f64;
    let mut kappa = 1i64;
    let peak = (expo / c).ceil() as i64;
    while (kappa as f64) <= k_cut {
        let term = crate::numerics::shell_count(n, kappa as u64)
            * (kappa as f64).powf(expo)
            * (-c * kappa as f64).exp();
        sum += term;
        if kappa > peak && term < sum * 1e-18 {
            break;
        }
        kappa += 1;
        if kappa > 100_000_000 {
            break;
        }
    }
    sum
}

/// C(a - a+) = r sum_{i in Z_1^rho} |i|^{2 c(rho) + 2} e^{-(a-a+)|i|},
/// by direct summation; the tangential sites are excluded from the lattice.
pub fn c_sum(da: f64, c_rho: f64, r: f64, lattice: LatticeKind, tangential: &[Site]) -> f64 {
    let expo = 2.0 * c_rho + 2.0;
    let mut tangential_shells: BTreeMap<i64, f64> = BTreeMap::new();
    for s in tangential {
        *tangential_shells.entry(s.norm1()).or_insert(0.0) += 1.0;
    }
    let mut sum = 0.0f64;
    let mut shell = 1i64;
    let peak = (expo / da).ceil() as i64;
    loop {
        let pop = lattice.shell_population(shell)
            - tangential_shells.get(&shell).copied().unwrap_or(0.0);
        if pop > 0.0 {
            let term = pop * (shell as f64).powf(expo) * (-da * shell as f64).exp();
            sum += term;
            if shell > peak && term < sum * 1e-18 {
                break;
            }
        } else if shell > peak {
            break;
        }
        shell += 1;
        if shell > 100_000_000 {
            break;
        }
    }
    r * sum
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HEntry {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

fn entry(lhs: f64, rhs: f64) -> HEntry {
    HEntry { lhs, rhs, pass: lhs <= rhs }
}

/// Implied constants of the step lemmas, measured from this run.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct MeasuredConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
}

/// Measured quantities of one step feeding the audit.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct MeasuredNorms {
    pub xp: f64,
    pub xr: f64,
    pub x_tail: f64,
    pub xf: f64,
    pub xp_next: f64,
    pub xp_next_lip: Option<f64>,
    pub omega_drift: f64,
    pub omega_drift_mdelta: f64,
    /// max over the scanned (k,l) of |<k,omega_hat> + <l,Omega_hat>| A_{k,l}.
    pub worst_drift_product: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub nu: usize,
    #[serde(rename = "H1")]
    pub h1: HEntry,
    #[serde(rename = "H2")]
    pub h2: HEntry,
    #[serde(rename = "H3")]
    pub h3: HEntry,
    #[serde(rename = "H4")]
    pub h4: HEntry,
    #[serde(rename = "H5")]
    pub h5: HEntry,
    #[serde(rename = "H6")]
    pub h6: HEntry,
    #[serde(rename = "H7")]
    pub h7: HEntry,
    #[serde(rename = "H8")]
    pub h8: HEntry,
    #[serde(rename = "H9")]
    pub h9: HEntry,
    #[serde(rename = "Gamma")]
    pub gamma_sum: f64,
    #[serde(rename = "C")]
    pub c_sum: f64,
    #[serde(rename = "K")]
    pub k_cut: f64,
    #[serde(rename = "I")]
    pub i_cut: f64,
    pub constants: MeasuredConstants,
    pub norms: MeasuredNorms,
}

impl HypothesisReport {
    pub fn entries(&self) -> [(&'static str, HEntry); 9] {
        [
            ("H1", self.h1),
            ("H2", self.h2),
            ("H3", self.h3),
            ("H4", self.h4),
            ("H5", self.h5),
            ("H6", self.h6),
            ("H7", self.h7),
            ("H8", self.h8),
            ("H9", self.h9),
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.entries().iter().all(|(_, e)| e.pass)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.entries()
            .iter()
            .filter(|(_, e)| !e.pass)
            .map(|(name, _)| *name)
            .collect()
    }
}

/// Evaluates Gamma, C and the nine hypotheses with measured constants. Each
/// inequality compares the operational quantity of its lemma against the
/// budget on the right-hand side of the display.
pub fn audit_hypotheses(
    state: &StepState,
    cutoffs: &CutoffAudit,
    norms: &MeasuredNorms,
    tangential: &[Site],
) -> HypothesisReport {
    let dr = state.r - state.r_next;
    let da = state.a - state.a_next;
    let gam = gamma_sum(dr, state.tau, state.n, cutoffs.k_op);
    let cs = c_sum(da, state.c_rho, state.r, state.lattice, tangential);
    let rho = state.lattice.rho();

    let tail = |x: f64, n: u32, c: f64| -> f64 {
        if x * c > 1e4 {
            0.0
        } else {
            exp_poly_tail(x, n, c)
        }
    };
    let h1 = entry(tail(cutoffs.k_op, state.n as u32 + 4, dr / 16.0), state.mu);
    let h2 = entry(tail(cutoffs.i_op, rho as u32 + 4, da), state.mu);

    // H3-H5 bound the flow displacement |X_F| against domain margins.
    let h3 = entry(norms.xf, dr / 8.0);
    let h4 = entry(state.s * state.s * norms.xf, 5.0 * state.s_next * state.s_next);
    let h5 = entry(state.s * norms.xf, state.s_next);

    // H6: Lipschitz budget for the new frequencies.
    let drift = norms.omega_drift.max(norms.omega_drift_mdelta);
    let h6 = entry(
        2.0 * drift / state.gamma * state.m_lip,
        state.m0 - state.m_lip / 2.0,
    );

    // H7: Diophantine survival of the drifted frequencies.
    let h7 = entry(norms.worst_drift_product, state.gamma - state.gamma_next);

    // H8/H9: contraction of the new perturbation.
    let h8 = entry(norms.xp_next, state.gamma_next * state.mu_next);
    let h9 = entry(
        norms.xp_next_lip.unwrap_or(0.0),
        state.m_next * state.mu_next,
    );

    let mgc = state.mu * gam * cs;
    let h7_formula = state.mu
        * (1.0 + cutoffs.k_op).powf(state.tau)
        * cutoffs.k_op
        * cutoffs.i_op.powf(state.c_rho);
    let h8_formula = (state.gamma * state.mu * state.mu
        + state.gamma * state.mu * state.mu * gam / (dr * state.eta * state.eta))
        * cs;
    let constants = MeasuredConstants {
        c1: safe_ratio(norms.x_tail, state.gamma * state.mu * state.mu),
        c2: safe_ratio(norms.xf, mgc),
        c3: safe_ratio(norms.xf, mgc),
        c4: safe_ratio(drift, state.gamma * state.mu),
        c5: safe_ratio(norms.worst_drift_product, h7_formula),
        c6: safe_ratio(norms.xp_next, h8_formula),
    };

    HypothesisReport {
        nu: state.nu,
        h1,
        h2,
        h3,
        h4,
        h5,
        h6,
        h7,
        h8,
        h9,
        gamma_sum: gam,
        c_sum: cs,
        k_cut: cutoffs.k_op,
        i_cut: cutoffs.i_op,
        constants,
        norms: *norms,
    }
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Outcome of applying one KAM step at a fixed parameter sample.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub nf_next: NormalForm,
    pub p_next: TaylorFourierSeries,
    pub generator: TaylorFourierSeries,
    pub cutoffs: CutoffAudit,
    pub p_norm: XNorm,
    pub r_norm: XNorm,
    pub tail_norm: XNorm,
    pub f_norm: XNorm,
    pub p_next_norm: XNorm,
    pub residual_ratio: f64,
    pub omega_shift: Vec<f64>,
    pub special_form_ok: Option<bool>,
}

/// Options of the step driver.
#[derive(Clone, Debug)]
pub struct StepOptions {
    pub dio: DiophantineParams,
    pub special_form: bool,
    pub max_degree: u32,
    pub max_fourier: i64,
    pub prune_floor: f64,
    /// Hard cap for the (k,l) scan of `propagate_diophantine`.
    pub scan_k_cap: i64,
    pub scan_site_cap: i64,
}

/// Weight sets used while measuring one step.
pub struct StepWeights {
    /// Current-step norm of X_P (target a = a_nu).
    pub current: DomainWeights,
    /// Next-step norm of X_{P+} (target a = a_{nu+1}, strip r_+, size s_+).
    pub next: DomainWeights,
}

impl StepWeights {
    pub fn from_state(state: &StepState, a_dom: f64, p: f64, p_bar: f64) -> Result<Self> {
        Ok(StepWeights {
            current: DomainWeights::new(a_dom, p, state.a, p_bar, state.r, state.s)?,
            next: DomainWeights::new(a_dom, p, state.a_next, p_bar, state.r_next, state.s_next)?,
        })
    }
}

/// Executes one KAM cycle on H = N + P:
/// truncate, solve {N,F} + R - [R] = 0, update e, omega, Omega from the
/// average part, and push the remainder through the Lie transform
/// P+ = int_0^1 {R_t, F} o phi_F^t dt + (P - R) o Phi_+ with
/// R_t = (1-t)[R] + t R.
pub fn apply_step(
    nf: &NormalForm,
    p: &TaylorFourierSeries,
    state: &StepState,
    weights: &StepWeights,
    opts: &StepOptions,
) -> Result<StepOutcome> {
    let cutoffs = compute_cutoffs(state)?;
    let (r, tail) = truncate(p, cutoffs.k_op, cutoffs.i_op);
    let avg = normal_part(&r, opts.special_form)?;
    let r_active = r.sub(&avg)?;
    let generator = solve_homological(nf, &r_active, &opts.dio)?;

    // residual identity {N,F} + R - [R] = 0 is the sign oracle of the step
    let mut sites = r.active_sites();
    for s in generator.active_sites() {
        if !sites.contains(&s) {
            sites.push(s);
        }
    }
    let n_series = nf.as_series(p.n, p.rho, p.param_tag, &sites)?;
    let mut residual = poisson_bracket(&n_series, &generator)?;
    residual.add_assign(&r_active)?;
    let r_major = majorant_xnorm(&r, &weights.current).total();
    let residual_ratio = if r_major == 0.0 {
        0.0
    } else {
        majorant_xnorm(&residual, &weights.current).total() / r_major
    };

    // normal-form update from the average part
    let mut nf_next = nf.clone();
    let e_shift = avg.coeff(&ModeKey::constant(p.n));
    nf_next.e += e_shift.re;
    let mut omega_shift = vec![0.0; p.n];
    for j in 0..p.n {
        let mut key = ModeKey::constant(p.n);
        key.m[j] = 1;
        let c = avg.coeff(&key);
        omega_shift[j] = c.re;
        nf_next.omega[j] += c.re;
    }
    for (key, c) in avg.iter() {
        if key.q_total() == 1 && key.qbar_total() == 1 {
            let site = key.q[0].0.clone();
            *nf_next.drift.entry(site).or_insert(0.0) += c.re;
        }
    }

    // new perturbation
    let lie = LieOptions {
        max_degree: opts.max_degree.max(p.max_degree()),
        max_fourier: opts.max_fourier,
        max_order: 32,
        prune_floor: opts.prune_floor,
        weights: weights.current.clone(),
    };
    let b1 = poisson_bracket(&avg, &generator)?;
    let b2 = poisson_bracket(&r, &generator)?;
    let part1 = lie_series_sum(&b1, &generator, |j| 1.0 / ((j as f64 + 1.0) * (j as f64 + 2.0)), &lie)?;
    let part2 = lie_series_sum(&b2, &generator, |j| 1.0 / (j as f64 + 2.0), &lie)?;
    let part3 = lie_series_sum(&tail, &generator, |_| 1.0, &lie)?;
    let mut p_next = part1;
    p_next.add_assign(&part2)?;
    p_next.add_assign(&part3)?;
    if opts.prune_floor > 0.0 {
        p_next.prune(opts.prune_floor);
    }

    let special_form_ok = if opts.special_form {
        Some(crate::pde::check_special_form(&p_next, &tangential_of(&nf.sm)).is_ok())
    } else {
        None
    };

    Ok(StepOutcome {
        p_norm: majorant_xnorm(p, &weights.current),
        r_norm: majorant_xnorm(&r, &weights.current),
        tail_norm: majorant_xnorm(&tail, &weights.current),
        f_norm: majorant_xnorm(&generator, &weights.next_for_f(state)),
        p_next_norm: majorant_xnorm(&p_next, &weights.next),
        nf_next,
        p_next,
        generator,
        cutoffs,
        residual_ratio,
        omega_shift,
        special_form_ok,
    })
}

impl StepWeights {
    /// X_F is measured with the next target weight a_{nu+1} on the current
    /// strip and size, matching the domain the flow must stay inside.
    fn next_for_f(&self, _state: &StepState) -> DomainWeights {
        DomainWeights {
            a: self.current.a,
            p: self.current.p,
            a_bar: self.next.a_bar,
            p_bar: self.next.p_bar,
            r: self.current.r,
            s: self.current.s,
        }
    }
}

fn tangential_of(sm: &SpectrumModel) -> Vec<Site> {
    sm.tangential.iter().cloned().collect()
}

/// Scan report of the gamma_+ Diophantine inequalities after one step.
#[derive(Clone, Debug, Serialize)]
pub struct PropagateReport {
    pub checked: usize,
    pub k_scanned_to: i64,
    pub site_scanned_to: i64,
    pub worst_margin: f64,
    /// max over the scanned set of drift * A_{k,l} (feeds H7).
    pub worst_drift_product: f64,
    pub violation: Option<PropagateViolation>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagateViolation {
    pub k: Vec<i64>,
    pub l: Vec<(Site, i64)>,
    pub divisor: f64,
    pub threshold: f64,
}

/// Cap above which |k|-zones are numerically unmeasurable: the threshold
/// gamma/(1+|k|^tau) falls below the rounding noise of the divisor itself.
pub fn numeric_k_cap(gamma: f64, tau: f64) -> i64 {
    let cap = (gamma / (1e3 * f64::EPSILON)).powf(1.0 / (tau + 1.0));
    (cap.ceil() as i64).max(2)
}

/// Checks the three displayed gamma_+ inequalities for the drifted
/// frequencies over the finite scan set |k| <= min(K_+, numeric cap),
/// |l| <= 2 with Minus-sites |i| < I_+. Returns the first violation if any.
pub fn propagate_diophantine(
    nf_next: &NormalForm,
    old: &NormalForm,
    state: &StepState,
    cutoffs: &CutoffAudit,
    opts: &StepOptions,
) -> Result<PropagateReport> {
    let dio_next = DiophantineParams {
        gamma: state.gamma_next,
        tau: state.tau,
        d: state.d,
        c_rho: state.c_rho,
    };
    let k_max = (cutoffs.k_op.min(numeric_k_cap(state.gamma, state.tau) as f64)
        .min(opts.scan_k_cap as f64)) as i64;
    let site_max = (cutoffs.i_op.min(opts.scan_site_cap as f64)) as i64;

    // candidate sites, tangential excluded
    let mut sites: Vec<Site> = Vec::new();
    for shell in 1..=site_max {
        for s in state.lattice.shell_sites(shell) {
            if !nf_next.sm.is_tangential(&s) {
                sites.push(s);
            }
        }
    }

    // candidate l with |l| <= 2
    let mut ls: Vec<Vec<(Site, i64)>> = vec![vec![]];
    for s in &sites {
        ls.push(vec![(s.clone(), 1)]);
        ls.push(vec![(s.clone(), -1)]);
        ls.push(vec![(s.clone(), 2)]);
        ls.push(vec![(s.clone(), -2)]);
    }
    for i in 0..sites.len() {
        for j in (i + 1)..sites.len() {
            let (a, b) = (sites[i].clone(), sites[j].clone());
            ls.push(vec![(a.clone(), 1), (b.clone(), 1)]);
            ls.push(vec![(a.clone(), -1), (b.clone(), -1)]);
            ls.push(vec![(a.clone(), 1), (b.clone(), -1)]);
            ls.push(vec![(a, -1), (b, 1)]);
        }
    }

    let mut checked = 0usize;
    let mut worst_margin = f64::INFINITY;
    let mut worst_drift_product = 0.0f64;
    let mut violation = None;

    let mut k_vecs: Vec<Vec<i64>> = vec![vec![0; state.n]];
    for kappa in 1..=k_max {
        k_vecs.extend(shell_kvecs(state.n, kappa));
    }

    'outer: for k in &k_vecs {
        let knorm: i64 = k.iter().map(|x| x.abs()).sum();
        for l in &ls {
            if knorm == 0 && l.is_empty() {
                continue;
            }
            let class = classify_l(l)?;
            if let DivisorClass::Minus(site) = &class {
                if site.norm1() as f64 >= cutoffs.i_op {
                    continue;
                }
            }
            let thr = diophantine_threshold(k, &class, bracket_ld(l, state.d), &dio_next)?;
            let div = nf_next.divisor(k, l)?;
            checked += 1;
            let margin = div.abs() - thr;
            if margin < worst_margin {
                worst_margin = margin;
            }
            let drift = (nf_next.divisor(k, l)? - old.divisor(k, l)?).abs();
            let a_kl = state.gamma_next / thr;
            worst_drift_product = worst_drift_product.max(drift * a_kl);
            if margin < 0.0 && violation.is_none() {
                violation = Some(PropagateViolation {
                    k: k.clone(),
                    l: l.clone(),
                    divisor: div,
                    threshold: thr,
                });
                break 'outer;
            }
        }
    }

    Ok(PropagateReport {
        checked,
        k_scanned_to: k_max,
        site_scanned_to: site_max,
        worst_margin,
        worst_drift_product,
        violation,
    })
}

/// All k in Z^n with |k|_1 = kappa.
pub fn shell_kvecs(n: usize, kappa: i64) -> Vec<Vec<i64>> {
    LatticeKind::Signed { rho: n }
        .shell_sites(kappa)
        .into_iter()
        .map(|s| s.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::ParamTag;

    fn toy_state(mu: f64) -> StepState {
        let (r, a, gamma, m) = (1.0, 1.0, 0.1, 1.0);
        StepState {
            nu: 0,
            n: 2,
            lattice: LatticeKind::PositiveLine,
            d: 0.5,
            delta: -1.0,
            tau: 15.0,
            c_rho: 2.5,
            c1_rho: 1.0,
            alpha1: 5,
            alpha2: 5,
            log_base: std::f64::consts::E,
            r,
            a,
            gamma,
            m_lip: m,
            s: mu * mu,
            mu,
            eta: mu.powf(1.0 / 3.0),
            r_next: r / 2.0 + r / 4.0,
            a_next: a / 2.0 + a / 4.0,
            gamma_next: gamma / 2.0 + gamma / 4.0,
            m_next: m / 2.0 + m,
            s_next: mu.powf(1.0 / 3.0) * mu * mu,
            mu_next: mu.powf(7.0 / 6.0),
            m0: m,
            e: 0.0,
            sigma: 0.75,
            mu_star: mu.powf(0.25),
        }
    }

    #[test]
    fn cutoff_formula_and_alpha() {
        // alpha_1 minimal with (7/6)^{3 alpha - 1} >= 8 is 5
        let target = (1.0 + 8f64.ln() / (7f64 / 6.0).ln()) / 3.0;
        assert_eq!(target.ceil() as u32, 5);
        let st = toy_state(1e-4);
        let (k, i) = st.formula_cutoffs();
        // floor(ln 1e4) = 9, so (9+1)^15
        assert_eq!(k, 1e15);
        assert_eq!(i, 1e15);
    }

    #[test]
    fn cutoffs_pass_h1_h2_at_small_mu() {
        let st = toy_state(1e-4);
        let audit = compute_cutoffs(&st).unwrap();
        assert!(!audit.overridden);
        assert_eq!(audit.k_op, audit.k_formula);
    }

    #[test]
    fn cutoffs_overridden_at_large_mu() {
        let st = toy_state(0.5);
        let audit = compute_cutoffs(&st).unwrap();
        // formula gives ([ln 2] + 1)^15 = 1, far too small for the tails
        assert_eq!(audit.k_formula, 1.0);
        assert!(audit.overridden);
        assert!(audit.k_op > 1.0);
        assert!(exp_poly_tail(audit.k_op, 2 + 4, (st.r - st.r_next) / 16.0) <= st.mu);
    }

    #[test]
    fn truncate_partitions_exactly() {
        let mut p = TaylorFourierSeries::zero(1, 1, ParamTag(0));
        let mut add = |k: i64, m: u32, q: Vec<(Site, u32)>, qb: Vec<(Site, u32)>, c: f64| {
            p.add_term(ModeKey { k: vec![k], m: vec![m], q, qbar: qb }, Complex64::new(c, 0.0))
                .unwrap();
        };
        add(1, 0, vec![], vec![], 0.5);
        add(0, 1, vec![], vec![], 0.25);
        add(3, 0, vec![(Site::scalar(2), 1)], vec![], 0.1);
        add(0, 0, vec![(Site::scalar(5), 1)], vec![(Site::scalar(5), 1)], 0.2);
        add(2, 2, vec![], vec![], 0.7); // |m| = 2: tail
        add(12, 0, vec![], vec![], 0.9); // beyond K: tail
        add(0, 0, vec![(Site::scalar(9), 1)], vec![(Site::scalar(2), 1)], 0.3); // z-site beyond I
        let (r, tail) = truncate(&p, 10.0, 8.0);
        let back = r.add(&tail).unwrap();
        assert_eq!(back, p);
        assert_eq!(r.len(), 4);
        assert_eq!(tail.len(), 3);
    }

    #[test]
    fn truncate_beyond_cutoff_all_tail() {
        let mut p = TaylorFourierSeries::zero(1, 1, ParamTag(0));
        p.add_term(
            ModeKey { k: vec![11], m: vec![0], q: vec![], qbar: vec![] },
            Complex64::new(1.0, 0.0),
        )
        .unwrap();
        let (r, tail) = truncate(&p, 10.0, 10.0);
        assert!(r.is_empty());
        assert_eq!(tail, p);
    }

    #[test]
    fn normal_part_extracts_average() {
        let mut r = TaylorFourierSeries::zero(1, 1, ParamTag(0));
        r.add_term(ModeKey::constant(1), Complex64::new(0.1, 0.0)).unwrap();
        let mut ky = ModeKey::constant(1);
        ky.m[0] = 1;
        r.add_term(ky, Complex64::new(0.2, 0.0)).unwrap();
        let mut kd = ModeKey::constant(1);
        kd.q = vec![(Site::scalar(3), 1)];
        kd.qbar = vec![(Site::scalar(3), 1)];
        r.add_term(kd, Complex64::new(0.3, 0.0)).unwrap();
        let mut koff = ModeKey::constant(1);
        koff.k = vec![1];
        r.add_term(koff, Complex64::new(0.4, 0.0)).unwrap();
        let avg = normal_part(&r, false).unwrap();
        assert_eq!(avg.len(), 3);
        // no k = 0 terms at all -> [R] = 0
        let only_fourier = r.retain(|key| key.k_norm1() != 0);
        assert!(normal_part(&only_fourier, false).unwrap().is_empty());
    }

    #[test]
    fn normal_part_flags_special_form_violation() {
        // rho = 2 signed lattice: |i| = |j| with i != j
        let mut r = TaylorFourierSeries::zero(1, 2, ParamTag(0));
        let mut key = ModeKey::constant(1);
        key.q = vec![(Site::new(vec![1, 0]), 1)];
        key.qbar = vec![(Site::new(vec![0, 1]), 1)];
        r.add_term(key, Complex64::new(1.0, 0.0)).unwrap();
        assert!(normal_part(&r, true).is_err());
        assert!(normal_part(&r, false).unwrap().is_empty());
    }

    #[test]
    fn gamma_sum_small_cutoff() {
        // empty sum when K < 1
        assert_eq!(gamma_sum(0.25, 15.0, 2, 0.5), 0.0);
        // single shell: 4 vectors at |k| = 1 in Z^2
        let g = gamma_sum(0.25, 0.0, 2, 1.0);
        let expect = 4.0 * (-0.25f64 / 8.0).exp();
        assert!((g - expect).abs() < 1e-12);
    }

    #[test]
    fn gamma_bounded_by_iteration_lemma_constant() {
        // measured Gamma <= (4[tau]+n+4)! 2^{(nu+6)(4 tau+n+4)} at nu = 0
        let (tau, n) = (12.75f64, 2usize);
        let g = gamma_sum(0.25, tau, n, 1e15);
        let e = 4.0 * tau.floor() + n as f64 + 4.0;
        let bound_ln = crate::numerics::ln_factorial(e as u64)
            + 6.0 * (4.0 * tau + n as f64 + 4.0) * 2f64.ln();
        assert!(g.ln() <= bound_ln, "ln Gamma = {} vs {}", g.ln(), bound_ln);
    }

    #[test]
    fn c_sum_positive_line() {
        // r * sum_{i>=1} i^{2c+2} e^{-da i} matches a direct small sum
        let direct: f64 = (1..200)
            .map(|i| (i as f64).powf(7.0) * (-0.5 * i as f64).exp())
            .sum();
        let got = c_sum(0.5, 2.5, 2.0, LatticeKind::PositiveLine, &[]);
        assert!((got - 2.0 * direct).abs() < 1e-9 * got);
    }

    #[test]
    fn numeric_cap_grows_with_gamma() {
        assert!(numeric_k_cap(0.1, 12.75) >= 2);
        assert!(numeric_k_cap(0.4, 12.75) >= numeric_k_cap(0.01, 12.75));
    }
}
