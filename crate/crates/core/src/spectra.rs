//! Frequency maps omega(xi), spectrum models Omega_i(xi), divisor
//! classification and the modified Diophantine condition.
//!
//! A spectrum model carries the growth law |i|^d, a finite table of
//! lower-order principal corrections, and a parameter-linear tail
//! Omega~_i(xi) = <v_i, xi> |i|^delta with delta < 0. The Diophantine
//! condition splits integer vectors l with |l| <= 2 into the classes Zero,
//! Plus and Minus (an opposite +1/-1 pair); Minus-class divisors get the
//! site-dependent weight |i|^{-c(rho)} that lets clustered spectra survive.

use crate::error::{KamError, Result};
use crate::numerics::{dot_compensated, shell_count};
use crate::series::Site;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Floating-point precision used for divisor evaluation.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    /// Neumaier-compensated accumulation; divisor magnitudes near
    /// gamma/A_{k,l} can lose about |log10 gamma| digits in plain doubles.
    Extended,
}

/// The lattice the normal sites live on.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    /// Z^rho minus the tangential sites.
    Signed { rho: usize },
    /// The classical rho = 1 lattice {1, 2, 3, ...}.
    PositiveLine,
}

impl LatticeKind {
    pub fn rho(&self) -> usize {
        match self {
            LatticeKind::Signed { rho } => *rho,
            LatticeKind::PositiveLine => 1,
        }
    }

    /// Number of lattice points with |i|_1 = shell (before removing
    /// tangential sites).
    pub fn shell_population(&self, shell: i64) -> f64 {
        match self {
            LatticeKind::Signed { rho } => shell_count(*rho, shell as u64),
            LatticeKind::PositiveLine => 1.0,
        }
    }

    /// Enumerates the lattice points with |i|_1 = shell.
    pub fn shell_sites(&self, shell: i64) -> Vec<Site> {
        match self {
            LatticeKind::PositiveLine => {
                if shell >= 1 {
                    vec![Site::scalar(shell)]
                } else {
                    Vec::new()
                }
            }
            LatticeKind::Signed { rho } => {
                let mut out = Vec::new();
                let mut cur = vec![0i64; *rho];
                enumerate_shell(&mut cur, 0, shell, &mut out);
                out
            }
        }
    }
}

fn enumerate_shell(cur: &mut Vec<i64>, idx: usize, remaining: i64, out: &mut Vec<Site>) {
    if idx + 1 == cur.len() {
        if remaining == 0 {
            cur[idx] = 0;
            out.push(Site::new(cur.clone()));
        } else {
            cur[idx] = remaining;
            out.push(Site::new(cur.clone()));
            cur[idx] = -remaining;
            out.push(Site::new(cur.clone()));
        }
        return;
    }
    for v in -remaining..=remaining {
        cur[idx] = v;
        enumerate_shell(cur, idx + 1, remaining - v.abs(), out);
    }
}

/// Affine frequency map omega(xi) = omega0 + A xi with A invertible.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrequencyMap {
    pub omega0: Vec<f64>,
    pub linear: Vec<Vec<f64>>,
}

impl FrequencyMap {
    pub fn new(omega0: Vec<f64>, linear: Vec<Vec<f64>>) -> Result<Self> {
        let n = omega0.len();
        if linear.len() != n || linear.iter().any(|row| row.len() != n) {
            return Err(KamError::DimensionMismatch(
                "frequency map matrix must be n x n".into(),
            ));
        }
        let fm = FrequencyMap { omega0, linear };
        if fm.determinant().abs() < 1e-12 {
            return Err(KamError::Config(
                "frequency map linear part is singular; the map must be bi-Lipschitz".into(),
            ));
        }
        Ok(fm)
    }

    pub fn identity(omega0: Vec<f64>) -> Self {
        let n = omega0.len();
        let linear = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        FrequencyMap { omega0, linear }
    }

    pub fn n(&self) -> usize {
        self.omega0.len()
    }

    pub fn eval(&self, xi: &[f64]) -> Vec<f64> {
        self.omega0
            .iter()
            .enumerate()
            .map(|(i, w0)| w0 + self.linear[i].iter().zip(xi).map(|(a, x)| a * x).sum::<f64>())
            .collect()
    }

    /// Lipschitz constant as the induced sup-norm (max absolute row sum).
    pub fn lipschitz(&self) -> f64 {
        self.linear
            .iter()
            .map(|row| row.iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Gradient of xi -> <k, omega(xi)>, i.e. A^T k.
    pub fn k_gradient(&self, k: &[i64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| self.linear[i][j] * k[i] as f64)
                    .sum::<f64>()
            })
            .collect()
    }

    fn determinant(&self) -> f64 {
        let n = self.n();
        let mut m: Vec<Vec<f64>> = self.linear.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap());
            let pivot = match pivot {
                Some(p) => p,
                None => return 0.0,
            };
            if m[pivot][col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                m.swap(pivot, col);
                det = -det;
            }
            det *= m[col][col];
            for row in (col + 1)..n {
                let f = m[row][col] / m[col][col];
                for c in col..n {
                    m[row][c] -= f * m[col][c];
                }
            }
        }
        det
    }
}

/// Normal frequencies Omega_i(xi) = |i|^d + principal(i) + <v_i, xi>|i|^delta.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumModel {
    pub d: f64,
    pub delta: f64,
    pub lattice: LatticeKind,
    #[serde(default)]
    pub principal: BTreeMap<String, f64>,
    #[serde(default)]
    pub tail: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub tangential: Vec<Site>,
}

fn site_key(site: &Site) -> String {
    site.to_string()
}

impl SpectrumModel {
    pub fn power_law(d: f64, delta: f64, lattice: LatticeKind) -> Self {
        SpectrumModel {
            d,
            delta,
            lattice,
            principal: BTreeMap::new(),
            tail: BTreeMap::new(),
            tangential: Vec::new(),
        }
    }

    pub fn with_tangential(mut self, sites: impl IntoIterator<Item = Site>) -> Self {
        self.tangential = sites.into_iter().collect();
        self
    }

    pub fn is_tangential(&self, site: &Site) -> bool {
        self.tangential.iter().any(|s| s == site)
    }

    pub fn set_principal(&mut self, site: &Site, value: f64) {
        self.principal.insert(site_key(site), value);
    }

    pub fn set_tail(&mut self, site: &Site, v: Vec<f64>) {
        self.tail.insert(site_key(site), v);
    }

    /// The leading part Omega-bar_i = |i|^d + principal(i), xi-free.
    pub fn principal_value(&self, site: &Site) -> f64 {
        let ni = site.norm1() as f64;
        ni.powf(self.d) + self.principal.get(&site_key(site)).copied().unwrap_or(0.0)
    }

    /// Gradient of xi -> Omega_i(xi), i.e. v_i |i|^delta.
    pub fn xi_gradient(&self, site: &Site, n: usize) -> Vec<f64> {
        let ni = site.norm1() as f64;
        match self.tail.get(&site_key(site)) {
            Some(v) => v.iter().map(|c| c * ni.powf(self.delta)).collect(),
            None => vec![0.0; n],
        }
    }

    pub fn eval(&self, site: &Site, xi: &[f64]) -> Result<f64> {
        if self.is_tangential(site) {
            return Err(KamError::TangentialSite(site.clone()));
        }
        let ni = site.norm1();
        if ni == 0 {
            return Err(KamError::ZeroSite(site.clone()));
        }
        let mut v = self.principal_value(site);
        if let Some(coefs) = self.tail.get(&site_key(site)) {
            let ni = ni as f64;
            v += coefs.iter().zip(xi).map(|(c, x)| c * x).sum::<f64>() * ni.powf(self.delta);
        }
        Ok(v)
    }

    /// sup_i |v_i|_1, the Lipschitz constant of Omega in the -delta-weighted
    /// norm (the |i|^{-delta} weight cancels the |i|^delta tail factor).
    pub fn lipschitz_mdelta(&self) -> f64 {
        self.tail
            .values()
            .map(|v| v.iter().map(|c| c.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Classification of an integer vector l with |l| <= 2.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum DivisorClass {
    Zero,
    Plus,
    /// Carries the site of the positive component of the opposite pair.
    Minus(Site),
}

/// Total over |l| <= 2: Zero if l = 0; Minus(i) for exactly one +1 at site i
/// and one -1 elsewhere; Plus otherwise.
pub fn classify_l(l: &[(Site, i64)]) -> Result<DivisorClass> {
    let total: i64 = l.iter().map(|(_, v)| v.abs()).sum();
    if total > 2 {
        return Err(KamError::LTooLarge(total));
    }
    if total == 0 {
        return Ok(DivisorClass::Zero);
    }
    if l.len() == 2 {
        let (s0, v0) = &l[0];
        let (s1, v1) = &l[1];
        if *v0 == 1 && *v1 == -1 {
            return Ok(DivisorClass::Minus(s0.clone()));
        }
        if *v0 == -1 && *v1 == 1 {
            return Ok(DivisorClass::Minus(s1.clone()));
        }
    }
    Ok(DivisorClass::Plus)
}

/// <l>_d = | sum_i l_i |i|^d |.
pub fn bracket_ld(l: &[(Site, i64)], d: f64) -> f64 {
    l.iter()
        .map(|(s, v)| *v as f64 * (s.norm1() as f64).powf(d))
        .sum::<f64>()
        .abs()
}

/// <k, omega(xi)> + sum_i l_i Omega_i(xi).
pub fn divisor(
    k: &[i64],
    l: &[(Site, i64)],
    xi: &[f64],
    fm: &FrequencyMap,
    sm: &SpectrumModel,
    precision: Precision,
) -> Result<f64> {
    let omega = fm.eval(xi);
    match precision {
        Precision::Double => {
            let mut v: f64 = k.iter().zip(&omega).map(|(ki, w)| *ki as f64 * w).sum();
            for (site, li) in l {
                v += *li as f64 * sm.eval(site, xi)?;
            }
            Ok(v)
        }
        Precision::Extended => {
            let mut pairs: Vec<(f64, f64)> = k
                .iter()
                .zip(&omega)
                .map(|(ki, w)| (*ki as f64, *w))
                .collect();
            for (site, li) in l {
                pairs.push((*li as f64, sm.eval(site, xi)?));
            }
            Ok(dot_compensated(pairs.into_iter()))
        }
    }
}

/// Scheme constants entering thresholds.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DiophantineParams {
    pub gamma: f64,
    pub tau: f64,
    pub d: f64,
    pub c_rho: f64,
}

/// The modified condition's lower bound gamma / A_{k,l} by class:
/// Zero -> gamma/(1+|k|^tau); Plus -> gamma <l>_d/(1+|k|^tau);
/// Minus(i) -> gamma/((1+|k|^tau) |i|^{c(rho)}).
pub fn diophantine_threshold(
    k: &[i64],
    class: &DivisorClass,
    l_d: f64,
    p: &DiophantineParams,
) -> Result<f64> {
    let knorm: i64 = k.iter().map(|x| x.abs()).sum();
    let denom = 1.0 + (knorm as f64).powf(p.tau);
    match class {
        DivisorClass::Zero => {
            if knorm == 0 {
                return Err(KamError::ZeroZeroDivisor);
            }
            Ok(p.gamma / denom)
        }
        DivisorClass::Plus => Ok(p.gamma * l_d / denom),
        DivisorClass::Minus(site) => {
            Ok(p.gamma / (denom * (site.norm1() as f64).powf(p.c_rho)))
        }
    }
}

/// True iff |divisor| >= threshold (the bound is inclusive).
pub fn is_admissible(
    k: &[i64],
    l: &[(Site, i64)],
    xi: &[f64],
    fm: &FrequencyMap,
    sm: &SpectrumModel,
    p: &DiophantineParams,
    precision: Precision,
) -> Result<bool> {
    let class = classify_l(l)?;
    let thr = diophantine_threshold(k, &class, bracket_ld(l, p.d), p)?;
    let div = divisor(k, l, xi, fm, sm, precision)?;
    Ok(div.abs() >= thr)
}

/// Minimal admissible tau for the scheme: tau >= n + (c(rho)+2)/d + 4.
pub fn minimal_tau(n: usize, c_rho: f64, d: f64) -> f64 {
    n as f64 + (c_rho + 2.0) / d + 4.0
}

/// Weyl-law eigenvalue model lambda_j = C_m (j/V)^{2/m} with
/// C_m = (2 pi)^2 B_m^{-2/m}, B_m the unit m-ball volume.
pub fn weyl_lambda(m: u32, volume: f64, j: u64) -> f64 {
    assert!(m >= 1 && volume > 0.0 && j >= 1);
    let bm = crate::numerics::unit_ball_volume(m);
    let cm = (2.0 * std::f64::consts::PI).powi(2) * bm.powf(-2.0 / m as f64);
    cm * (j as f64 / volume).powf(2.0 / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm_identity2() -> FrequencyMap {
        FrequencyMap::identity(vec![0.0, 0.0])
    }

    #[test]
    fn eval_omega_examples() {
        // identity map at (1,2) -> (1,2); at 0 -> omega0
        let fm = fm_identity2();
        assert_eq!(fm.eval(&[1.0, 2.0]), vec![1.0, 2.0]);
        let fm = FrequencyMap::new(vec![0.5, -0.5], vec![vec![2.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(fm.eval(&[0.0, 0.0]), vec![0.5, -0.5]);
        // linearity: omega(xi) - omega(xi') = A (xi - xi')
        let a = fm.eval(&[0.3, 0.8]);
        let b = fm.eval(&[0.1, 0.2]);
        let expect = [2.0 * 0.2 + 1.0 * 0.6, 0.6];
        for i in 0..2 {
            assert!((a[i] - b[i] - expect[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn singular_map_rejected() {
        assert!(FrequencyMap::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 4.0]]).is_err());
    }

    #[test]
    fn eval_spectrum_examples() {
        let sm = SpectrumModel::power_law(2.0, -1.0, LatticeKind::PositiveLine);
        // d=2, i=3 -> 9
        assert_eq!(sm.eval(&Site::scalar(3), &[0.0]).unwrap(), 9.0);
        // d=1/2 (Weyl with m=4), i=16 -> 4
        let sm_half = SpectrumModel::power_law(0.5, -1.0, LatticeKind::PositiveLine);
        assert_eq!(sm_half.eval(&Site::scalar(16), &[0.0]).unwrap(), 4.0);
        // tail v_i=(1,0), delta=-1, xi=(0.5,0), i=2 -> 4 + 0.25
        let mut sm = SpectrumModel::power_law(2.0, -1.0, LatticeKind::PositiveLine);
        sm.set_tail(&Site::scalar(2), vec![1.0, 0.0]);
        let v = sm.eval(&Site::scalar(2), &[0.5, 0.0]).unwrap();
        assert!((v - 4.25).abs() < 1e-15);
    }

    #[test]
    fn tangential_site_rejected() {
        let sm = SpectrumModel::power_law(1.0, -1.0, LatticeKind::PositiveLine)
            .with_tangential([Site::scalar(1)]);
        assert!(matches!(
            sm.eval(&Site::scalar(1), &[0.0]),
            Err(KamError::TangentialSite(_))
        ));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_l(&[]).unwrap(), DivisorClass::Zero);
        // +1 at i=5, -1 at j=3 -> Minus(5)
        let l = vec![(Site::scalar(3), -1), (Site::scalar(5), 1)];
        assert_eq!(classify_l(&l).unwrap(), DivisorClass::Minus(Site::scalar(5)));
        // +2 at one site -> Plus
        assert_eq!(classify_l(&[(Site::scalar(4), 2)]).unwrap(), DivisorClass::Plus);
        assert!(classify_l(&[(Site::scalar(1), 2), (Site::scalar(2), 1)]).is_err());
    }

    #[test]
    fn classify_partitions_ordered_pairs() {
        // Minus count over {e_i - e_j : i != j, |i|,|j| <= L} equals the
        // number of ordered pairs
        let lmax = 5;
        let mut minus = 0;
        for i in 1..=lmax {
            for j in 1..=lmax {
                if i == j {
                    continue;
                }
                let l = vec![(Site::scalar(i), 1), (Site::scalar(j), -1)];
                if matches!(classify_l(&l).unwrap(), DivisorClass::Minus(_)) {
                    minus += 1;
                }
            }
        }
        assert_eq!(minus, lmax * (lmax - 1));
    }

    #[test]
    fn bracket_ld_examples() {
        assert_eq!(bracket_ld(&[], 2.0), 0.0);
        let l = vec![(Site::scalar(3), 1), (Site::scalar(2), -1)];
        assert_eq!(bracket_ld(&l, 2.0), 5.0);
        let l = vec![(Site::scalar(1), 1), (Site::new(vec![1]), 1)];
        // duplicate site adds: 2 * 1^2
        assert_eq!(bracket_ld(&l, 2.0), 2.0);
    }

    #[test]
    fn divisor_matches_independent_dot() {
        let fm = FrequencyMap::new(vec![1.1, 0.3], vec![vec![1.0, 0.2], vec![-0.1, 0.9]]).unwrap();
        let mut sm = SpectrumModel::power_law(0.5, -1.0, LatticeKind::PositiveLine);
        sm.set_tail(&Site::scalar(4), vec![0.3, -0.2]);
        let xi = [0.4, 0.7];
        let k = [3i64, -2];
        let l = vec![(Site::scalar(4), 1), (Site::scalar(9), -1)];
        let got = divisor(&k, &l, &xi, &fm, &sm, Precision::Double).unwrap();
        // independent recomputation
        let omega = [
            1.1 + 1.0 * 0.4 + 0.2 * 0.7,
            0.3 + -0.1 * 0.4 + 0.9 * 0.7,
        ];
        let om4 = 4f64.powf(0.5) + (0.3 * 0.4 + -0.2 * 0.7) * 4f64.powf(-1.0);
        let om9 = 9f64.powf(0.5);
        let expect = 3.0 * omega[0] - 2.0 * omega[1] + om4 - om9;
        assert!((got - expect).abs() < 1e-14);
        let ext = divisor(&k, &l, &xi, &fm, &sm, Precision::Extended).unwrap();
        assert!((ext - expect).abs() < 1e-14);
    }

    #[test]
    fn threshold_examples() {
        let p = DiophantineParams { gamma: 0.1, tau: 10.0, d: 1.0, c_rho: 2.5 };
        // class Zero, |k|=1 -> gamma/2
        let t = diophantine_threshold(&[1], &DivisorClass::Zero, 0.0, &p).unwrap();
        assert!((t - 0.05).abs() < 1e-15);
        // Minus(i=2): gamma/(2 * 2^{5/2})
        let t = diophantine_threshold(&[1], &DivisorClass::Minus(Site::scalar(2)), 0.0, &p).unwrap();
        assert!((t - 0.1 / (2.0 * 2f64.powf(2.5))).abs() < 1e-15);
        assert!((t - 8.8388e-3).abs() < 1e-6);
        // k=0 with class Zero -> excluded
        assert!(diophantine_threshold(&[0], &DivisorClass::Zero, 0.0, &p).is_err());
    }

    #[test]
    fn threshold_linear_in_gamma_and_monotone() {
        let mk = |gamma: f64| DiophantineParams { gamma, tau: 8.0, d: 0.5, c_rho: 2.5 };
        let l = vec![(Site::scalar(4), 1), (Site::scalar(2), 1)];
        let class = classify_l(&l).unwrap();
        let ld = bracket_ld(&l, 0.5);
        let t1 = diophantine_threshold(&[2, 1], &class, ld, &mk(0.05)).unwrap();
        let t2 = diophantine_threshold(&[2, 1], &class, ld, &mk(0.1)).unwrap();
        assert!((t2 / t1 - 2.0).abs() < 1e-12);
        // non-increasing in |k|
        let tsmall = diophantine_threshold(&[1, 0], &class, ld, &mk(0.1)).unwrap();
        let tbig = diophantine_threshold(&[5, 3], &class, ld, &mk(0.1)).unwrap();
        assert!(tbig <= tsmall);
        // Minus: non-increasing in |i|
        let ta =
            diophantine_threshold(&[1], &DivisorClass::Minus(Site::scalar(2)), 0.0, &mk(0.1)).unwrap();
        let tb =
            diophantine_threshold(&[1], &DivisorClass::Minus(Site::scalar(7)), 0.0, &mk(0.1)).unwrap();
        assert!(tb <= ta);
    }

    #[test]
    fn admissibility_boundary_inclusive() {
        // omega(xi) = xi scalar-like: pick xi so the divisor exactly equals
        // the threshold
        let p = DiophantineParams { gamma: 0.1, tau: 2.0, d: 1.0, c_rho: 2.5 };
        let fm = FrequencyMap::identity(vec![0.0]);
        let sm = SpectrumModel::power_law(1.0, -1.0, LatticeKind::PositiveLine);
        let thr = 0.1 / 2.0;
        assert!(is_admissible(&[1], &[], &[thr], &fm, &sm, &p, Precision::Double).unwrap());
        assert!(is_admissible(&[1], &[], &[2.0 * thr], &fm, &sm, &p, Precision::Double).unwrap());
        assert!(!is_admissible(&[1], &[], &[0.0], &fm, &sm, &p, Precision::Double).unwrap());
    }

    #[test]
    fn weyl_examples() {
        // m=2, V=pi: B_2=pi, C_2=4pi, lambda_j = 4 j
        let l1 = weyl_lambda(2, std::f64::consts::PI, 1);
        assert!((l1 - 4.0).abs() < 1e-12);
        let l3 = weyl_lambda(2, std::f64::consts::PI, 3);
        assert!((l3 - 12.0).abs() < 1e-12);
        // m=1, V=1: C_1 = (2pi)^2 / 4 = pi^2
        let l = weyl_lambda(1, 1.0, 1);
        assert!((l - std::f64::consts::PI.powi(2)).abs() < 1e-12);
        // homogeneity: lambda_{2j}/lambda_j = 2^{2/m}
        for m in 1..=4u32 {
            let r = weyl_lambda(m, 2.0, 10) / weyl_lambda(m, 2.0, 5);
            assert!((r - 2f64.powf(2.0 / m as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn separation_collapse_for_small_d() {
        // for d < 1 the neighbour gap at J is at most d J^{d-1}
        let d = 0.5;
        let j = 400.0f64;
        let gap = (j + 1.0).powf(d) - j.powf(d);
        assert!(gap <= d * j.powf(d - 1.0));
        // and the gap vanishes as J grows
        let gap_small = 10001f64.powf(d) - 10000f64.powf(d);
        assert!(gap_small < gap);
    }

    #[test]
    fn shell_sites_match_population() {
        for kind in [LatticeKind::Signed { rho: 2 }, LatticeKind::PositiveLine] {
            for shell in 1..=5i64 {
                let sites = kind.shell_sites(shell);
                assert_eq!(sites.len() as f64, kind.shell_population(shell));
                assert!(sites.iter().all(|s| s.norm1() == shell));
            }
        }
    }

    #[test]
    fn minimal_tau_formula() {
        // n=2, c=5/2, d=2/3: 2 + 4.5/(2/3) + 4 = 12.75
        assert!((minimal_tau(2, 2.5, 2.0 / 3.0) - 12.75).abs() < 1e-12);
    }
}
