//! Weighted sequence norms and coefficient majorants for vector-field norms.
//!
//! Sup-norms over complex domains are replaced throughout by majorants: every
//! coefficient enters with the largest modulus its monomial can attain on
//! D(r,s) = { |Im x| < r, |y| < s^2, |z|^{a,p} < s }, one Cauchy factor is
//! removed per differentiation, and component bounds are added. Majorants are
//! conservative upper bounds and satisfy the triangle inequality.

use super::{Site, TaylorFourierSeries};
use crate::error::{KamError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Weights of the analyticity domain and of the target space of X_F.
///
/// `a`, `p` weigh the z-ball of the domain; `a_bar > a`, `p_bar >= p` weigh
/// the gradient sequence; `r` is the angle-strip half width and `s` the size
/// parameter (|y| < s^2, |z|^{a,p} < s).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainWeights {
    pub a: f64,
    pub p: f64,
    pub a_bar: f64,
    pub p_bar: f64,
    pub r: f64,
    pub s: f64,
}

impl DomainWeights {
    pub fn new(a: f64, p: f64, a_bar: f64, p_bar: f64, r: f64, s: f64) -> Result<Self> {
        if !(a_bar > a && a >= 0.0) {
            return Err(KamError::Config(format!(
                "weights require a_bar > a >= 0, got a={a}, a_bar={a_bar}"
            )));
        }
        if !(p_bar >= p && p >= 0.0) {
            return Err(KamError::Config(format!(
                "weights require p_bar >= p >= 0, got p={p}, p_bar={p_bar}"
            )));
        }
        if r <= 0.0 || s <= 0.0 {
            return Err(KamError::Config(format!("weights require r, s > 0, got r={r}, s={s}")));
        }
        Ok(DomainWeights { a, p, a_bar, p_bar, r, s })
    }

    /// Radius of the i-th z-coordinate under the per-coordinate Cauchy bound:
    /// s e^{-a|i|} |i|^{-p}.
    fn coord_radius(&self, site: &Site) -> f64 {
        let ni = site.norm1() as f64;
        self.s * (-self.a * ni).exp() * ni.powf(-self.p)
    }

    fn seq_weight(&self, site: &Site) -> f64 {
        let ni = site.norm1() as f64;
        (self.a_bar * ni).exp() * ni.powf(self.p_bar)
    }
}

/// |z|^{a,p} = sqrt( sum |z_i|^2 |i|^{2p} e^{2a|i|} ) over the finite support.
pub fn weighted_seq_norm(z: &BTreeMap<Site, f64>, a: f64, p: f64) -> Result<f64> {
    let mut acc = 0.0f64;
    for (site, v) in z {
        let ni = site.norm1();
        if ni == 0 {
            return Err(KamError::ZeroSite(site.clone()));
        }
        let ni = ni as f64;
        acc += v * v * ni.powf(2.0 * p) * (2.0 * a * ni).exp();
    }
    Ok(acc.sqrt())
}

/// Component breakdown of the majorant of |X_F|.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct XNorm {
    pub y_comp: f64,
    pub x_comp: f64,
    pub zbar_comp: f64,
    pub z_comp: f64,
}

impl XNorm {
    pub fn total(&self) -> f64 {
        self.y_comp + self.x_comp + self.zbar_comp + self.z_comp
    }
}

/// Majorant upper bound for |X_F|^{a_bar,p_bar}_{s, D_{a,p}(r,s)}:
/// |F_y| + s^{-2}|F_x| + s^{-1}|F_zbar|^{a_bar,p_bar} + s^{-1}|F_z|^{a_bar,p_bar},
/// each component bounded coefficient-wise.
pub fn majorant_xnorm(f: &TaylorFourierSeries, w: &DomainWeights) -> XNorm {
    let mut y_comp = 0.0;
    let mut x_comp = 0.0;
    let mut grad_zbar: BTreeMap<Site, f64> = BTreeMap::new();
    let mut grad_z: BTreeMap<Site, f64> = BTreeMap::new();

    for (key, c) in f.iter() {
        let amp = c.norm() * (key.k_norm1() as f64 * w.r).exp();
        let m_tot = key.m_total();
        let base_y = w.s.powi(2 * m_tot as i32);
        let mut z_factor = 1.0;
        for (site, pow) in key.q.iter().chain(key.qbar.iter()) {
            z_factor *= w.coord_radius(site).powi(*pow as i32);
        }
        let monomial = amp * base_y * z_factor;

        // y-gradient: one y factor removed per derivative, summed over j.
        if m_tot > 0 {
            y_comp += monomial / (w.s * w.s) * m_tot as f64;
        }
        // x-gradient: each d/dx_j multiplies by |k_j|.
        if key.k_norm1() > 0 {
            x_comp += monomial * key.k_norm1() as f64;
        }
        // z / zbar gradients: remove one Cauchy radius at the derivative index.
        for (site, pow) in &key.q {
            let entry = grad_z.entry(site.clone()).or_insert(0.0);
            *entry += monomial / w.coord_radius(site) * *pow as f64;
        }
        for (site, pow) in &key.qbar {
            let entry = grad_zbar.entry(site.clone()).or_insert(0.0);
            *entry += monomial / w.coord_radius(site) * *pow as f64;
        }
    }

    let seq = |g: &BTreeMap<Site, f64>| -> f64 {
        g.iter()
            .map(|(site, v)| {
                let t = v * w.seq_weight(site);
                t * t
            })
            .sum::<f64>()
            .sqrt()
    };

    XNorm {
        y_comp,
        x_comp: x_comp / (w.s * w.s),
        zbar_comp: seq(&grad_zbar) / w.s,
        z_comp: seq(&grad_z) / w.s,
    }
}

/// Finite-sample Lipschitz semi-norm of a family of series over parameter
/// samples: max over pairs of majorant(F_xi - F_eta)/|xi - eta|.
pub fn lipschitz_seminorm(
    family: &[(Vec<f64>, TaylorFourierSeries)],
    w: &DomainWeights,
) -> Result<f64> {
    if family.len() < 2 {
        return Err(KamError::NotEnoughSamples);
    }
    let mut worst = 0.0f64;
    for i in 0..family.len() {
        for j in (i + 1)..family.len() {
            let (xi, fi) = &family[i];
            let (eta, fj) = &family[j];
            let dist: f64 = xi
                .iter()
                .zip(eta)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist == 0.0 {
                return Err(KamError::NotEnoughSamples);
            }
            // tags differ across samples by construction; compare term-wise
            let mut diff = fi.clone();
            diff.param_tag = fj.param_tag;
            let diff = diff.sub(fj)?;
            worst = worst.max(majorant_xnorm(&diff, w).total() / dist);
        }
    }
    Ok(worst)
}
