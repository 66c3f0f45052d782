//! Sparse Taylor-Fourier polynomial algebra on T^n x R^n x L^{a,p} x L^{a,p}.
//!
//! A series is a finite sum of monomials
//!
//! ```text
//!     c * y^m z^q zbar^qbar e^{i<k,x>}
//! ```
//!
//! with `k` in Z^n, `m` in N^n and `q`, `qbar` finitely supported maps from
//! the normal lattice into the non-negative integers. Coefficients are
//! complex doubles; canonical form stores no exactly-zero coefficient and no
//! zero power.

mod bracket;
mod lie;
mod norms;
mod text;

pub use bracket::poisson_bracket;
pub use lie::{flow_component, lie_series_sum, lie_transform, LieOptions};
pub use norms::{
    lipschitz_seminorm, majorant_xnorm, weighted_seq_norm, DomainWeights, XNorm,
};
pub use text::{parse_series, write_series};

use crate::error::{KamError, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;

/// A point of the normal lattice Z^rho (a Fourier site of a normal mode).
#[derive(
    Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, serde::Serialize, serde::Deserialize,
)]
#[serde(transparent)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn new(coords: Vec<i64>) -> Self {
        Site(coords)
    }

    pub fn scalar(j: i64) -> Self {
        Site(vec![j])
    }

    /// |i| = |i_1| + ... + |i_rho|.
    pub fn norm1(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (idx, c) in self.0.iter().enumerate() {
            if idx > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Sorted sparse multi-index over sites; powers are strictly positive.
pub type SiteMap = Vec<(Site, u32)>;

fn sitemap_normalize(mut m: SiteMap) -> SiteMap {
    m.retain(|(_, p)| *p > 0);
    m.sort();
    let mut out: SiteMap = Vec::with_capacity(m.len());
    for (s, p) in m {
        if let Some(last) = out.last_mut() {
            if last.0 == s {
                last.1 += p;
                continue;
            }
        }
        out.push((s, p));
    }
    out
}

fn sitemap_total(m: &SiteMap) -> u32 {
    m.iter().map(|(_, p)| *p).sum()
}

fn sitemap_add(a: &SiteMap, b: &SiteMap) -> SiteMap {
    let mut out = a.clone();
    out.extend(b.iter().cloned());
    sitemap_normalize(out)
}

/// One monomial key: Fourier index k, action powers m, normal powers q, qbar.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ModeKey {
    pub k: Vec<i64>,
    pub m: Vec<u32>,
    pub q: SiteMap,
    pub qbar: SiteMap,
}

impl ModeKey {
    pub fn constant(n: usize) -> Self {
        ModeKey {
            k: vec![0; n],
            m: vec![0; n],
            q: Vec::new(),
            qbar: Vec::new(),
        }
    }

    pub fn normalized(mut self) -> Self {
        self.q = sitemap_normalize(std::mem::take(&mut self.q));
        self.qbar = sitemap_normalize(std::mem::take(&mut self.qbar));
        self
    }

    pub fn k_norm1(&self) -> i64 {
        self.k.iter().map(|c| c.abs()).sum()
    }

    pub fn m_total(&self) -> u32 {
        self.m.iter().sum()
    }

    pub fn q_total(&self) -> u32 {
        sitemap_total(&self.q)
    }

    pub fn qbar_total(&self) -> u32 {
        sitemap_total(&self.qbar)
    }

    /// Grading deg = 2|m| + |q| + |qbar|.
    pub fn degree(&self) -> u32 {
        2 * self.m_total() + self.q_total() + self.qbar_total()
    }

    /// Signed normal-index vector l = q - qbar of the monomial.
    pub fn signed_l(&self) -> Vec<(Site, i64)> {
        let mut l: BTreeMap<Site, i64> = BTreeMap::new();
        for (s, p) in &self.q {
            *l.entry(s.clone()).or_insert(0) += *p as i64;
        }
        for (s, p) in &self.qbar {
            *l.entry(s.clone()).or_insert(0) -= *p as i64;
        }
        l.into_iter().filter(|(_, v)| *v != 0).collect()
    }

    /// Key of the complex-conjugate monomial: (-k, m, qbar, q).
    pub fn conjugate(&self) -> ModeKey {
        ModeKey {
            k: self.k.iter().map(|c| -c).collect(),
            m: self.m.clone(),
            q: self.qbar.clone(),
            qbar: self.q.clone(),
        }
    }

    fn product(&self, other: &ModeKey) -> ModeKey {
        ModeKey {
            k: self.k.iter().zip(&other.k).map(|(a, b)| a + b).collect(),
            m: self.m.iter().zip(&other.m).map(|(a, b)| a + b).collect(),
            q: sitemap_add(&self.q, &other.q),
            qbar: sitemap_add(&self.qbar, &other.qbar),
        }
    }
}

/// Identifier of the parameter sample a series was evaluated at.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct ParamTag(pub u64);

impl fmt::Display for ParamTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Sparse Taylor-Fourier series at one parameter sample.
#[derive(Clone, PartialEq, Debug)]
pub struct TaylorFourierSeries {
    pub n: usize,
    pub rho: usize,
    pub param_tag: ParamTag,
    terms: BTreeMap<ModeKey, Complex64>,
}

impl TaylorFourierSeries {
    pub fn zero(n: usize, rho: usize, param_tag: ParamTag) -> Self {
        TaylorFourierSeries {
            n,
            rho,
            param_tag,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms(
        n: usize,
        rho: usize,
        param_tag: ParamTag,
        terms: impl IntoIterator<Item = (ModeKey, Complex64)>,
    ) -> Result<Self> {
        let mut s = Self::zero(n, rho, param_tag);
        for (key, c) in terms {
            s.add_term(key, c)?;
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ModeKey, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, key: &ModeKey) -> Complex64 {
        self.terms.get(key).copied().unwrap_or(Complex64::ZERO)
    }

    fn check_key(&self, key: &ModeKey) -> Result<()> {
        if key.k.len() != self.n || key.m.len() != self.n {
            return Err(KamError::DimensionMismatch(format!(
                "key has n={} but series has n={}",
                key.k.len(),
                self.n
            )));
        }
        for (s, _) in key.q.iter().chain(key.qbar.iter()) {
            if s.dim() != self.rho {
                return Err(KamError::DimensionMismatch(format!(
                    "site {s} has dim {} but series has rho={}",
                    s.dim(),
                    self.rho
                )));
            }
        }
        Ok(())
    }

    /// KAM-form series carry no |i| = 0 site: 0 is tangential by convention
    /// and removed by the action-angle embedding. Pre-embedding series may
    /// contain it, so this is checked by the drivers, not on insertion.
    pub fn assert_no_zero_sites(&self) -> Result<()> {
        for key in self.terms.keys() {
            for (s, _) in key.q.iter().chain(key.qbar.iter()) {
                if s.norm1() == 0 {
                    return Err(KamError::ZeroSite(s.clone()));
                }
            }
        }
        Ok(())
    }

    /// Adds `c` to the coefficient at `key`, keeping canonical form.
    pub fn add_term(&mut self, key: ModeKey, c: Complex64) -> Result<()> {
        let key = key.normalized();
        self.check_key(&key)?;
        let entry = self.terms.entry(key.clone()).or_insert(Complex64::ZERO);
        *entry += c;
        if entry.norm_sqr() == 0.0 {
            self.terms.remove(&key);
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &TaylorFourierSeries) -> Result<()> {
        self.compatible(other)?;
        for (key, c) in &other.terms {
            let entry = self.terms.entry(key.clone()).or_insert(Complex64::ZERO);
            *entry += c;
            if entry.norm_sqr() == 0.0 {
                self.terms.remove(key);
            }
        }
        Ok(())
    }

    pub fn compatible(&self, other: &TaylorFourierSeries) -> Result<()> {
        if self.n != other.n || self.rho != other.rho {
            return Err(KamError::DimensionMismatch(format!(
                "(n,rho)=({},{}) vs ({},{})",
                self.n, self.rho, other.n, other.rho
            )));
        }
        if self.param_tag != other.param_tag {
            return Err(KamError::ParamMismatch(
                self.param_tag.to_string(),
                other.param_tag.to_string(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &TaylorFourierSeries) -> Result<TaylorFourierSeries> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &TaylorFourierSeries) -> Result<TaylorFourierSeries> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// self += alpha * other
    pub fn axpy(&mut self, alpha: Complex64, other: &TaylorFourierSeries) -> Result<()> {
        self.compatible(other)?;
        for (key, c) in &other.terms {
            let entry = self.terms.entry(key.clone()).or_insert(Complex64::ZERO);
            *entry += alpha * c;
            if entry.norm_sqr() == 0.0 {
                self.terms.remove(key);
            }
        }
        Ok(())
    }

    pub fn scale(&self, alpha: Complex64) -> TaylorFourierSeries {
        let mut out = self.clone();
        if alpha == Complex64::ZERO {
            out.terms.clear();
            return out;
        }
        for c in out.terms.values_mut() {
            *c *= alpha;
        }
        out
    }

    /// Sparse product.
    pub fn mul(&self, other: &TaylorFourierSeries) -> Result<TaylorFourierSeries> {
        self.compatible(other)?;
        let mut out = TaylorFourierSeries::zero(self.n, self.rho, self.param_tag);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let key = ka.product(kb);
                let entry = out.terms.entry(key.clone()).or_insert(Complex64::ZERO);
                *entry += ca * cb;
                if entry.norm_sqr() == 0.0 {
                    out.terms.remove(&key);
                }
            }
        }
        Ok(out)
    }

    /// Drops terms with |coeff| below `floor` (absolute).
    pub fn prune(&mut self, floor: f64) {
        self.terms.retain(|_, c| c.norm() >= floor);
    }

    /// Drops terms with degree above `max_degree` or |k| above `max_fourier`.
    /// Returns the number of discarded terms.
    pub fn truncate_support(&mut self, max_degree: u32, max_fourier: i64) -> usize {
        let before = self.terms.len();
        self.terms
            .retain(|k, _| k.degree() <= max_degree && k.k_norm1() <= max_fourier);
        before - self.terms.len()
    }

    pub fn max_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn retain<F: FnMut(&ModeKey) -> bool>(&self, mut pred: F) -> TaylorFourierSeries {
        let mut out = TaylorFourierSeries::zero(self.n, self.rho, self.param_tag);
        for (key, c) in &self.terms {
            if pred(key) {
                out.terms.insert(key.clone(), *c);
            }
        }
        out
    }

    /// d/dx_j acts as multiplication by i k_j on Fourier modes.
    pub fn dx(&self, j: usize) -> TaylorFourierSeries {
        let mut out = TaylorFourierSeries::zero(self.n, self.rho, self.param_tag);
        for (key, c) in &self.terms {
            let kj = key.k[j];
            if kj != 0 {
                out.terms
                    .insert(key.clone(), c * Complex64::new(0.0, kj as f64));
            }
        }
        out
    }

    pub fn dy(&self, j: usize) -> TaylorFourierSeries {
        let mut out = TaylorFourierSeries::zero(self.n, self.rho, self.param_tag);
        for (key, c) in &self.terms {
            let mj = key.m[j];
            if mj > 0 {
                let mut nk = key.clone();
                nk.m[j] -= 1;
                out.terms.insert(nk, c * mj as f64);
            }
        }
        out
    }

    pub fn dz(&self, site: &Site) -> TaylorFourierSeries {
        self.d_site(site, false)
    }

    pub fn dzbar(&self, site: &Site) -> TaylorFourierSeries {
        self.d_site(site, true)
    }

    fn d_site(&self, site: &Site, barred: bool) -> TaylorFourierSeries {
        let mut out = TaylorFourierSeries::zero(self.n, self.rho, self.param_tag);
        for (key, c) in &self.terms {
            let map = if barred { &key.qbar } else { &key.q };
            if let Some(pos) = map.iter().position(|(s, _)| s == site) {
                let p = map[pos].1;
                let mut nk = key.clone();
                let nmap = if barred { &mut nk.qbar } else { &mut nk.q };
                if p == 1 {
                    nmap.remove(pos);
                } else {
                    nmap[pos].1 -= 1;
                }
                out.terms.insert(nk, c * p as f64);
            }
        }
        out
    }

    /// All normal sites appearing in the support.
    pub fn active_sites(&self) -> Vec<Site> {
        let mut set = std::collections::BTreeSet::new();
        for key in self.terms.keys() {
            for (s, _) in key.q.iter().chain(key.qbar.iter()) {
                set.insert(s.clone());
            }
        }
        set.into_iter().collect()
    }

    pub fn max_k_norm(&self) -> i64 {
        self.terms.keys().map(|k| k.k_norm1()).max().unwrap_or(0)
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(|k| k.degree()).max().unwrap_or(0)
    }

    /// Checks the conjugation symmetry coeff(-k, m, qbar, q) = conj(coeff(k, m, q, qbar))
    /// of a real-valued Hamiltonian. Returns the worst absolute defect.
    pub fn reality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (key, c) in &self.terms {
            let partner = self.coeff(&key.conjugate());
            let defect = (partner.conj() - c).norm();
            worst = worst.max(defect);
        }
        worst
    }

    /// Evaluates the series at a phase point. `x` are angles, `y` action values,
    /// `z` assigns a complex value to each site (zbar takes the map `zbar`).
    pub fn eval(
        &self,
        x: &[f64],
        y: &[Complex64],
        z: &BTreeMap<Site, Complex64>,
        zbar: &BTreeMap<Site, Complex64>,
    ) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for (key, c) in &self.terms {
            let mut term = *c;
            let phase: f64 = key
                .k
                .iter()
                .zip(x)
                .map(|(kj, xj)| *kj as f64 * xj)
                .sum();
            term *= Complex64::new(0.0, phase).exp();
            for (j, mj) in key.m.iter().enumerate() {
                for _ in 0..*mj {
                    term *= y[j];
                }
            }
            for (s, p) in &key.q {
                let v = z.get(s).copied().unwrap_or(Complex64::ZERO);
                for _ in 0..*p {
                    term *= v;
                }
            }
            for (s, p) in &key.qbar {
                let v = zbar.get(s).copied().unwrap_or(Complex64::ZERO);
                for _ in 0..*p {
                    term *= v;
                }
            }
            acc += term;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn key(
        k: Vec<i64>,
        m: Vec<u32>,
        q: Vec<(Site, u32)>,
        qbar: Vec<(Site, u32)>,
    ) -> ModeKey {
        ModeKey { k, m, q, qbar }.normalized()
    }

    #[test]
    fn canonical_form_drops_exact_zeros() {
        let mut s = TaylorFourierSeries::zero(1, 1, ParamTag(0));
        let k = key(vec![1], vec![0], vec![(Site::scalar(2), 1)], vec![]);
        s.add_term(k.clone(), Complex64::new(1.0, 0.0)).unwrap();
        s.add_term(k.clone(), Complex64::new(-1.0, 0.0)).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn zero_site_flagged_by_validator() {
        let mut s = TaylorFourierSeries::zero(1, 1, ParamTag(0));
        let k = key(vec![0], vec![0], vec![(Site::scalar(0), 1)], vec![]);
        s.add_term(k, Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(
            s.assert_no_zero_sites(),
            Err(KamError::ZeroSite(_))
        ));
    }

    #[test]
    fn degree_and_l_vector() {
        let k = key(
            vec![1, -1],
            vec![1, 0],
            vec![(Site::scalar(3), 1)],
            vec![(Site::scalar(5), 2)],
        );
        assert_eq!(k.degree(), 2 + 1 + 2);
        let l = k.signed_l();
        assert_eq!(
            l,
            vec![(Site::scalar(3), 1), (Site::scalar(5), -2)]
        );
    }

    #[test]
    fn conjugate_key_roundtrip() {
        let k = key(
            vec![2, -1],
            vec![0, 1],
            vec![(Site::scalar(1), 1)],
            vec![(Site::scalar(4), 1)],
        );
        assert_eq!(k.conjugate().conjugate(), k);
    }

    #[test]
    fn reality_check_detects_defect() {
        let mut s = TaylorFourierSeries::zero(1, 1, ParamTag(0));
        let k = key(vec![1], vec![0], vec![(Site::scalar(2), 1)], vec![]);
        s.add_term(k.clone(), Complex64::new(0.5, 0.25)).unwrap();
        assert!(s.reality_defect() > 0.0);
        s.add_term(k.conjugate(), Complex64::new(0.5, -0.25)).unwrap();
        assert_eq!(s.reality_defect(), 0.0);
    }

    #[test]
    fn eval_single_term() {
        // 2 * y_1 * z_3 * e^{i x_1} at a simple point
        let mut s = TaylorFourierSeries::zero(1, 1, ParamTag(0));
        let k = key(vec![1], vec![1], vec![(Site::scalar(3), 1)], vec![]);
        s.add_term(k, Complex64::new(2.0, 0.0)).unwrap();
        let mut z = BTreeMap::new();
        z.insert(Site::scalar(3), Complex64::new(0.5, 0.0));
        let v = s.eval(
            &[std::f64::consts::FRAC_PI_2],
            &[Complex64::new(3.0, 0.0)],
            &z,
            &BTreeMap::new(),
        );
        // 2 * 3 * 0.5 * e^{i pi/2} = 3 i
        assert!((v - Complex64::new(0.0, 3.0)).norm() < 1e-14);
    }
}
