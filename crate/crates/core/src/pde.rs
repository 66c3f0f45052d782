//! Front-ends building truncated Hamiltonians for the two applications -
//! a nonlinear Schroedinger model with Weyl-law spectrum and a Klein-Gordon
//! model with exponential nonlinearity on a torus - in action-angle /
//! normal-coordinate form, plus their structural checks.
//!
//! Both builders first produce the Hamiltonian in flat lattice coordinates
//! (w, wbar) over all retained sites, then `action_angle_embed` substitutes
//! w = sqrt(A + I) e^{i x} at the tangential sites (linear jet in I) and
//! subtracts the normal form, leaving the KAM-ready perturbation P.

use crate::error::{KamError, Result};
use crate::series::{
    majorant_xnorm, DomainWeights, ModeKey, ParamTag, Site, TaylorFourierSeries, XNorm,
};
use crate::spectra::{FrequencyMap, LatticeKind, SpectrumModel};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeKind {
    Nls,
    KleinGordon,
}

/// Description of one desk-scale model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdeSetup {
    pub kind: PdeKind,
    /// NLS: spatial dimension m entering the Weyl exponent d = 2/m.
    /// Klein-Gordon: dimension rho of the torus lattice.
    pub spatial_dim: u32,
    pub tangential_sites: Vec<Site>,
    pub mode_cutoff: i64,
    /// NLS: coefficients of f(t) = f_1 t + f_2 t^2 + ... (f(0) = 0).
    #[serde(default)]
    pub nonlinearity: Vec<f64>,
    /// Klein-Gordon: coefficient of u e^{alpha u^2}.
    #[serde(default)]
    pub alpha: f64,
    pub series_truncation: u32,
    pub amplitudes: Vec<f64>,
}

impl PdeSetup {
    pub fn lattice(&self) -> LatticeKind {
        match self.kind {
            PdeKind::Nls => LatticeKind::Signed { rho: 1 },
            PdeKind::KleinGordon => LatticeKind::Signed { rho: self.spatial_dim as usize },
        }
    }

    pub fn rho(&self) -> usize {
        self.lattice().rho()
    }

    pub fn n(&self) -> usize {
        self.tangential_sites.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.series_truncation < 4 {
            return Err(KamError::Config(
                "series_truncation must be >= 4 for a nontrivial perturbation".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.tangential_sites {
            if s.dim() != self.rho() {
                return Err(KamError::Config(format!(
                    "tangential site {s} has dimension {} but lattice has rho = {}",
                    s.dim(),
                    self.rho()
                )));
            }
            if s.norm1() > self.mode_cutoff {
                return Err(KamError::Config(format!(
                    "tangential site {s} lies beyond the mode cutoff"
                )));
            }
            if !seen.insert(s.clone()) {
                return Err(KamError::Config(format!("duplicate tangential site {s}")));
            }
        }
        if self.kind == PdeKind::KleinGordon {
            let zero = Site::new(vec![0; self.rho()]);
            if !self.tangential_sites.contains(&zero) {
                return Err(KamError::Config(
                    "Klein-Gordon setups must include the site 0 among the tangential sites"
                        .into(),
                ));
            }
            if self.alpha == 0.0 {
                return Err(KamError::Config(
                    "alpha = 0 degenerates the Klein-Gordon nonlinearity".into(),
                ));
            }
        }
        if self.kind == PdeKind::Nls {
            if self.nonlinearity.is_empty() || self.nonlinearity[0] == 0.0 {
                return Err(KamError::Config(
                    "the NLS nonlinearity needs f'(0) != 0".into(),
                ));
            }
        }
        if self.amplitudes.len() != self.tangential_sites.len() {
            return Err(KamError::Config(
                "one amplitude per tangential site required".into(),
            ));
        }
        if self.amplitudes.iter().any(|a| *a <= 0.0) {
            return Err(KamError::Config(
                "zero amplitude at a tangential site: square-root expansion undefined".into(),
            ));
        }
        Ok(())
    }

    pub fn weyl_exponent(&self) -> f64 {
        match self.kind {
            PdeKind::Nls => 2.0 / self.spatial_dim as f64,
            PdeKind::KleinGordon => 1.0,
        }
    }

    fn all_sites(&self) -> Vec<Site> {
        let lattice = self.lattice();
        let mut out = Vec::new();
        for shell in 0..=self.mode_cutoff {
            if shell == 0 {
                out.push(Site::new(vec![0; self.rho()]));
            } else {
                out.extend(lattice.shell_sites(shell));
            }
        }
        out
    }
}

/// Spectrum data attached to a built Hamiltonian.
#[derive(Clone, Debug)]
pub struct BuiltModel {
    /// Perturbation in KAM coordinates (x, y, z, zbar).
    pub p: TaylorFourierSeries,
    /// Nonlinearity in flat lattice coordinates, for regularity checks.
    pub g_pre: TaylorFourierSeries,
    pub fm: FrequencyMap,
    pub sm: SpectrumModel,
    pub e0: f64,
    pub xi: Vec<f64>,
}

/// One symbol of the flat expansion: a lattice factor with its
/// momentum vector and scalar weight.
#[derive(Clone, Debug)]
struct Symbol {
    site: Site,
    barred: bool,
    weight: f64,
}

/// Enumerates multisets of `slots` symbols whose momenta sum to zero and
/// feeds (powers, combinatorial multiplicity, product weight) to the sink.
fn zero_momentum_multisets(
    symbols: &[Symbol],
    slots: u32,
    rho: usize,
    sink: &mut impl FnMut(&[(usize, u32)], f64),
) {
    let max_reach: i64 = symbols
        .iter()
        .map(|s| s.site.norm1())
        .max()
        .unwrap_or(0);
    let mut chosen: Vec<(usize, u32)> = Vec::new();
    let mut momentum = vec![0i64; rho];
    fn rec(
        symbols: &[Symbol],
        idx: usize,
        remaining: u32,
        max_reach: i64,
        momentum: &mut Vec<i64>,
        chosen: &mut Vec<(usize, u32)>,
        weight: f64,
        multiplicity_denom: f64,
        sink: &mut impl FnMut(&[(usize, u32)], f64),
    ) {
        let m1: i64 = momentum.iter().map(|c| c.abs()).sum();
        if m1 > max_reach * remaining as i64 {
            return;
        }
        if remaining == 0 {
            if m1 == 0 {
                sink(chosen, weight / multiplicity_denom);
            }
            return;
        }
        if idx == symbols.len() {
            return;
        }
        // take 0..=remaining copies of symbols[idx]
        rec(
            symbols,
            idx + 1,
            remaining,
            max_reach,
            momentum,
            chosen,
            weight,
            multiplicity_denom,
            sink,
        );
        let mut w = weight;
        let mut denom = multiplicity_denom;
        for count in 1..=remaining {
            w *= symbols[idx].weight;
            denom *= count as f64;
            for (c, s) in momentum.iter_mut().zip(&symbols[idx].site.0) {
                *c += if symbols[idx].barred { -s } else { *s };
            }
            chosen.push((idx, count));
            rec(
                symbols,
                idx + 1,
                remaining - count,
                max_reach,
                momentum,
                chosen,
                w,
                denom,
                sink,
            );
            chosen.pop();
        }
        let s = &symbols[idx];
        for (c, sc) in momentum.iter_mut().zip(&s.site.0) {
            *c -= (if s.barred { -sc } else { *sc }) * remaining as i64;
        }
    }
    rec(
        symbols,
        0,
        slots,
        max_reach,
        &mut momentum,
        &mut chosen,
        1.0,
        1.0,
        sink,
    );
}

/// lambda_j(xi): tangential values come from the frequency map, normal ones
/// from the spectrum model.
fn lambda_at(
    site: &Site,
    setup: &PdeSetup,
    fm: &FrequencyMap,
    sm: &SpectrumModel,
    xi: &[f64],
) -> Result<f64> {
    if let Some(pos) = setup.tangential_sites.iter().position(|s| s == site) {
        Ok(fm.eval(xi)[pos])
    } else {
        sm.eval(site, xi)
    }
}

/// Builds the NLS Hamiltonian sum_j lambda_j q_j qbar_j + G in flat lattice
/// coordinates, with lambda modelled by the normalized Weyl law |j|^{2/m}
/// and G the projection of int F(u) dx for dF/dubar = f(|u|^2) u, expanded
/// to the configured total degree over the exponential torus basis.
pub fn nls_hamiltonian(
    setup: &PdeSetup,
    xi: &[f64],
    tag: ParamTag,
) -> Result<(TaylorFourierSeries, TaylorFourierSeries, FrequencyMap, SpectrumModel)> {
    setup.validate()?;
    if setup.kind != PdeKind::Nls {
        return Err(KamError::Config("nls_hamiltonian needs an NLS setup".into()));
    }
    let (fm, sm) = spectrum_models(setup)?;
    let rho = setup.rho();
    let sites = setup.all_sites();

    let mut quad = TaylorFourierSeries::zero(0, rho, tag);
    for site in &sites {
        let lam = lambda_at(site, setup, &fm, &sm, xi)?;
        if lam != 0.0 {
            quad.add_term(pair_key(site), Complex64::new(lam, 0.0))?;
        }
    }

    // G = sum_c f_c / (c+1) * u^{c+1} ubar^{c+1} integrated over the torus
    let mut g = TaylorFourierSeries::zero(0, rho, tag);
    let two_pi = 2.0 * std::f64::consts::PI;
    for (cidx, fc) in setup.nonlinearity.iter().enumerate() {
        if *fc == 0.0 {
            continue;
        }
        let c = cidx as u32 + 1;
        let half = c + 1; // u-power and ubar-power
        if 2 * half > setup.series_truncation {
            break;
        }
        let unbarred: Vec<Symbol> = sites
            .iter()
            .map(|s| Symbol { site: s.clone(), barred: false, weight: 1.0 })
            .collect();
        // enumerate u^half (multisets alpha) and ubar^half (multisets beta)
        // with total momentum zero; integral = (2 pi)^{rho (1 - half)}
        let integral = two_pi.powf(rho as f64 * (1.0 - half as f64));
        let fact_half: f64 = (1..=half as u64).map(|v| v as f64).product();
        let scale = fc / (c as f64 + 1.0) * integral * fact_half * fact_half;

        // collect alpha multisets by momentum
        let mut by_momentum: BTreeMap<Vec<i64>, Vec<(Vec<(usize, u32)>, f64)>> = BTreeMap::new();
        enumerate_multisets(&unbarred, half, rho, &mut |powers, inv_denom, momentum| {
            by_momentum
                .entry(momentum.to_vec())
                .or_default()
                .push((powers.to_vec(), inv_denom));
        });
        for (momentum, alphas) in &by_momentum {
            if let Some(betas) = by_momentum.get(momentum) {
                for (alpha, wa) in alphas {
                    for (beta, wb) in betas {
                        let mut key = ModeKey {
                            k: vec![],
                            m: vec![],
                            q: alpha
                                .iter()
                                .map(|(i, p)| (sites[*i].clone(), *p))
                                .collect(),
                            qbar: beta
                                .iter()
                                .map(|(i, p)| (sites[*i].clone(), *p))
                                .collect(),
                        };
                        key = key.normalized();
                        g.add_term(key, Complex64::new(scale * wa * wb, 0.0))?;
                    }
                }
            }
        }
    }

    let mut h = quad;
    h.add_assign(&g)?;
    Ok((h, g, fm, sm))
}

/// Enumerates multisets of `slots` unbarred symbols recording powers,
/// 1/prod(count!) and the carried momentum.
fn enumerate_multisets(
    symbols: &[Symbol],
    slots: u32,
    rho: usize,
    sink: &mut impl FnMut(&[(usize, u32)], f64, &[i64]),
) {
    fn rec(
        symbols: &[Symbol],
        idx: usize,
        remaining: u32,
        momentum: &mut Vec<i64>,
        chosen: &mut Vec<(usize, u32)>,
        denom: f64,
        sink: &mut impl FnMut(&[(usize, u32)], f64, &[i64]),
    ) {
        if remaining == 0 {
            sink(chosen, 1.0 / denom, momentum);
            return;
        }
        if idx == symbols.len() {
            return;
        }
        rec(symbols, idx + 1, remaining, momentum, chosen, denom, sink);
        let mut d = denom;
        for count in 1..=remaining {
            d *= count as f64;
            for (c, s) in momentum.iter_mut().zip(&symbols[idx].site.0) {
                *c += s;
            }
            chosen.push((idx, count));
            rec(symbols, idx + 1, remaining - count, momentum, chosen, d, sink);
            chosen.pop();
        }
        for (c, s) in momentum.iter_mut().zip(&symbols[idx].site.0) {
            *c -= s * remaining as i64;
        }
    }
    let mut momentum = vec![0i64; rho];
    let mut chosen = Vec::new();
    rec(symbols, 0, slots, &mut momentum, &mut chosen, 1.0, sink);
}

/// Builds the Klein-Gordon Hamiltonian sum lambda_j w_j wbar_j + G(w, wbar)
/// with dF/du = u(e^{alpha u^2} - 1), u = sum q_j phi_j / sqrt(lambda_j),
/// expanded to the configured degree; momentum conservation on the torus
/// gives the special form.
pub fn kg_hamiltonian(
    setup: &PdeSetup,
    xi: &[f64],
    tag: ParamTag,
) -> Result<(TaylorFourierSeries, TaylorFourierSeries, FrequencyMap, SpectrumModel)> {
    setup.validate()?;
    if setup.kind != PdeKind::KleinGordon {
        return Err(KamError::Config("kg_hamiltonian needs a Klein-Gordon setup".into()));
    }
    let (fm, sm) = spectrum_models(setup)?;
    let rho = setup.rho();
    let sites = setup.all_sites();

    let mut quad = TaylorFourierSeries::zero(0, rho, tag);
    let mut symbols = Vec::with_capacity(2 * sites.len());
    for site in &sites {
        let lam = lambda_at(site, setup, &fm, &sm, xi)?;
        if lam <= 0.0 {
            return Err(KamError::Config(format!(
                "lambda({site}) = {lam} <= 0; the coordinate weights 1/sqrt(lambda) degenerate"
            )));
        }
        quad.add_term(pair_key(site), Complex64::new(lam, 0.0))?;
        let weight = 1.0 / (2.0 * lam).sqrt();
        symbols.push(Symbol { site: site.clone(), barred: false, weight });
        symbols.push(Symbol { site: site.clone(), barred: true, weight });
    }

    // F = sum_{c>=1} alpha^c u^{2c+2} / ((2c+2) c!), truncated
    let mut g = TaylorFourierSeries::zero(0, rho, tag);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut c = 1u32;
    loop {
        let deg = 2 * c + 2;
        if deg > setup.series_truncation {
            break;
        }
        let c_fact: f64 = (1..=c as u64).map(|v| v as f64).product();
        let integral = two_pi.powf(rho as f64 * (1.0 - deg as f64 / 2.0));
        let deg_fact: f64 = (1..=deg as u64).map(|v| v as f64).product();
        let scale = setup.alpha.powi(c as i32) / (deg as f64 * c_fact) * integral * deg_fact;
        zero_momentum_multisets(&symbols, deg, rho, &mut |powers, inv_denom| {
            let mut q: Vec<(Site, u32)> = Vec::new();
            let mut qbar: Vec<(Site, u32)> = Vec::new();
            for (i, p) in powers {
                if symbols[*i].barred {
                    qbar.push((symbols[*i].site.clone(), *p));
                } else {
                    q.push((symbols[*i].site.clone(), *p));
                }
            }
            let key = ModeKey { k: vec![], m: vec![], q, qbar }.normalized();
            let _ = g.add_term(key, Complex64::new(scale * inv_denom, 0.0));
        });
        c += 1;
    }

    let mut h = quad;
    h.add_assign(&g)?;
    Ok((h, g, fm, sm))
}

fn pair_key(site: &Site) -> ModeKey {
    ModeKey {
        k: vec![],
        m: vec![],
        q: vec![(site.clone(), 1)],
        qbar: vec![(site.clone(), 1)],
    }
}

/// Frequency map and spectrum model implied by the setup: an affine map
/// omega(xi) = omega_0 + xi with omega_0 the linear frequencies at the
/// tangential sites, and the power law |i|^d at the normal sites.
pub fn spectrum_models(setup: &PdeSetup) -> Result<(FrequencyMap, SpectrumModel)> {
    let d = setup.weyl_exponent();
    let offset = match setup.kind {
        PdeKind::Nls => 0.0,
        PdeKind::KleinGordon => -1.0,
    };
    let omega0: Vec<f64> = setup
        .tangential_sites
        .iter()
        .map(|s| (s.norm1() as f64).powf(d) + offset)
        .collect();
    let fm = FrequencyMap::identity(omega0);
    let sm = SpectrumModel::power_law(d, -1.0, setup.lattice())
        .with_tangential(setup.tangential_sites.iter().cloned());
    Ok((fm, sm))
}

/// Substitutes w = sqrt(A_l + I_l) e^{i x_l} (linear jet in I) at the
/// tangential sites, w_j = z_j elsewhere, subtracts the normal form
/// e_0 + <omega(xi), I> + sum Omega_i(xi) z_i zbar_i, and returns the
/// perturbation P with its majorant.
pub fn action_angle_embed(
    h_pre: &TaylorFourierSeries,
    setup: &PdeSetup,
    fm: &FrequencyMap,
    sm: &SpectrumModel,
    xi: &[f64],
    weights: &DomainWeights,
) -> Result<(TaylorFourierSeries, f64, XNorm)> {
    let n = setup.n();
    let rho = setup.rho();
    let tangential = &setup.tangential_sites;
    let amps = &setup.amplitudes;

    let mut out = TaylorFourierSeries::zero(n, rho, h_pre.param_tag);
    for (key, coeff) in h_pre.iter() {
        // split tangential powers out of q / qbar
        let mut k = vec![0i64; n];
        let mut h_exp = vec![0.0f64; n];
        let mut base = *coeff;
        let mut q_rest: Vec<(Site, u32)> = Vec::new();
        let mut qbar_rest: Vec<(Site, u32)> = Vec::new();
        for (site, pow) in &key.q {
            match tangential.iter().position(|t| t == site) {
                Some(l) => {
                    k[l] += *pow as i64;
                    h_exp[l] += *pow as f64 / 2.0;
                }
                None => q_rest.push((site.clone(), *pow)),
            }
        }
        for (site, pow) in &key.qbar {
            match tangential.iter().position(|t| t == site) {
                Some(l) => {
                    k[l] -= *pow as i64;
                    h_exp[l] += *pow as f64 / 2.0;
                }
                None => qbar_rest.push((site.clone(), *pow)),
            }
        }
        for l in 0..n {
            base *= amps[l].powf(h_exp[l]);
        }
        let base_key = ModeKey {
            k: k.clone(),
            m: vec![0; n],
            q: q_rest.clone(),
            qbar: qbar_rest.clone(),
        };
        out.add_term(base_key, base)?;
        for l in 0..n {
            if h_exp[l] != 0.0 {
                let mut mk = ModeKey {
                    k: k.clone(),
                    m: vec![0; n],
                    q: q_rest.clone(),
                    qbar: qbar_rest.clone(),
                };
                mk.m[l] = 1;
                out.add_term(mk, base * h_exp[l] / amps[l])?;
            }
        }
    }

    // subtract the normal form
    let e0 = out.coeff(&ModeKey::constant(n)).re;
    out.add_term(ModeKey::constant(n), Complex64::new(-e0, 0.0))?;
    let omega = fm.eval(xi);
    for (l, w) in omega.iter().enumerate() {
        let mut key = ModeKey::constant(n);
        key.m[l] = 1;
        out.add_term(key, Complex64::new(-w, 0.0))?;
    }
    for site in setup.all_sites() {
        if tangential.contains(&site) {
            continue;
        }
        let mut key = ModeKey::constant(n);
        key.q = vec![(site.clone(), 1)];
        key.qbar = vec![(site, 1)];
        let omega_i = sm.eval(&key.q[0].0, xi)?;
        out.add_term(key, Complex64::new(-omega_i, 0.0))?;
    }

    out.assert_no_zero_sites()?;
    let norm = majorant_xnorm(&out, weights);
    Ok((out, e0, norm))
}

/// Builds a complete model (P, frequency map, spectrum) at one parameter
/// sample.
pub fn build_model(
    setup: &PdeSetup,
    xi: &[f64],
    tag: ParamTag,
    weights: &DomainWeights,
) -> Result<BuiltModel> {
    let (h_pre, g_pre, fm, sm) = match setup.kind {
        PdeKind::Nls => nls_hamiltonian(setup, xi, tag)?,
        PdeKind::KleinGordon => kg_hamiltonian(setup, xi, tag)?,
    };
    let (p, e0, _norm) = action_angle_embed(&h_pre, setup, &fm, &sm, xi, weights)?;
    Ok(BuiltModel { p, g_pre, fm, sm, e0, xi: xi.to_vec() })
}

/// Momentum conservation of A4)': every stored term must satisfy
/// sum_l k_l i_l + sum_i (q_i - qbar_i) i = 0. Returns the first violator.
pub fn check_special_form(
    p: &TaylorFourierSeries,
    tangential: &[Site],
) -> std::result::Result<(), ModeKey> {
    let rho = p.rho;
    for (key, _) in p.iter() {
        let mut total = vec![0i64; rho];
        for (l, kl) in key.k.iter().enumerate() {
            for (c, s) in total.iter_mut().zip(&tangential[l].0) {
                *c += kl * s;
            }
        }
        for (site, pow) in &key.q {
            for (c, s) in total.iter_mut().zip(&site.0) {
                *c += *pow as i64 * s;
            }
        }
        for (site, pow) in &key.qbar {
            for (c, s) in total.iter_mut().zip(&site.0) {
                *c -= *pow as i64 * s;
            }
        }
        if total.iter().any(|c| *c != 0) {
            return Err(key.clone());
        }
    }
    Ok(())
}

/// Gradient-majorant exponent fit: evaluates the (a,p)-weighted majorant of
/// G_qbar at inputs scaled by each t in `scales` and fits the log-log slope.
#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub scales: Vec<f64>,
    pub gradient_norms: Vec<f64>,
    pub exponent: Option<f64>,
}

pub fn regularity_check(
    g_pre: &TaylorFourierSeries,
    a: f64,
    p: f64,
    scales: &[f64],
) -> RegularityReport {
    let site_weight = |s: &Site| -> f64 {
        let ni = s.norm1() as f64;
        (-a * ni).exp() * ni.powf(-p)
    };
    let mut norms = Vec::with_capacity(scales.len());
    for t in scales {
        let mut grad: BTreeMap<Site, f64> = BTreeMap::new();
        for (key, c) in g_pre.iter() {
            let deg = key.q_total() + key.qbar_total();
            for (site, pow) in &key.qbar {
                let mut v = c.norm() * *pow as f64 * t.powi(deg as i32 - 1);
                for (s2, p2) in &key.q {
                    v *= site_weight(s2).powi(*p2 as i32);
                }
                for (s2, p2) in &key.qbar {
                    let reduce = if s2 == site { *p2 - 1 } else { *p2 };
                    v *= site_weight(s2).powi(reduce as i32);
                }
                *grad.entry(site.clone()).or_insert(0.0) += v;
            }
        }
        let norm: f64 = grad
            .iter()
            .map(|(s, v)| {
                let ni = s.norm1() as f64;
                let w = (a * ni).exp() * ni.powf(p);
                (v * w) * (v * w)
            })
            .sum::<f64>()
            .sqrt();
        norms.push(norm);
    }
    let xs: Vec<f64> = scales.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.max(1e-300).ln()).collect();
    let exponent = if norms.iter().all(|v| *v > 0.0) {
        crate::numerics::ls_slope(&xs, &ys)
    } else {
        None
    };
    RegularityReport { scales: scales.to_vec(), gradient_norms: norms, exponent }
}
