//! Truncated Lie series: composition with the time-1 flow of a generating
//! Hamiltonian F, computed as H o phi_F^1 = sum_j ad_F^j(H) / j! with
//! ad_F(.) = {., F}.

use super::{poisson_bracket, DomainWeights, Site, TaylorFourierSeries};
use crate::error::{KamError, Result};
use crate::series::majorant_xnorm;
use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct LieOptions {
    pub max_degree: u32,
    pub max_fourier: i64,
    pub max_order: usize,
    /// Absolute coefficient floor applied after each bracket.
    pub prune_floor: f64,
    /// Weights used by the divergence guard.
    pub weights: DomainWeights,
}

impl LieOptions {
    pub fn new(max_degree: u32, max_fourier: i64, weights: DomainWeights) -> Self {
        LieOptions {
            max_degree,
            max_fourier,
            max_order: 32,
            prune_floor: 0.0,
            weights,
        }
    }
}

/// sum_j c_j ad_F^j(seed) / j!, truncated by degree/Fourier support and
/// stopped when a full bracket application contributes nothing or once the
/// configured order cap is reached. `coeff(j)` must eventually be O(1).
///
/// Errors with `LieDivergence` if the majorants of three consecutive Lie
/// terms fail to decrease, which signals a step-size violation.
pub fn lie_series_sum(
    seed: &TaylorFourierSeries,
    generator: &TaylorFourierSeries,
    coeff: impl Fn(usize) -> f64,
    opts: &LieOptions,
) -> Result<TaylorFourierSeries> {
    let mut acc = TaylorFourierSeries::zero(seed.n, seed.rho, seed.param_tag);
    let mut cur = seed.clone();
    cur.truncate_support(opts.max_degree, opts.max_fourier);
    let mut inv_fact = 1.0f64;
    let mut prev_norms: Vec<f64> = Vec::new();

    for j in 0..=opts.max_order {
        if j > 0 {
            inv_fact /= j as f64;
        }
        let c = coeff(j) * inv_fact;
        if c != 0.0 && !cur.is_empty() {
            acc.axpy(Complex64::new(c, 0.0), &cur)?;
        }
        if cur.is_empty() {
            return Ok(acc);
        }
        if j == opts.max_order {
            break;
        }
        let mut next = poisson_bracket(&cur, generator)?;
        next.truncate_support(opts.max_degree, opts.max_fourier);
        if opts.prune_floor > 0.0 {
            next.prune(opts.prune_floor * inv_fact.recip());
        }
        let norm = majorant_xnorm(&next, &opts.weights).total() * inv_fact / (j as f64 + 1.0);
        prev_norms.push(norm);
        if prev_norms.len() >= 3 {
            let k = prev_norms.len();
            let (a, b, c3) = (prev_norms[k - 3], prev_norms[k - 2], prev_norms[k - 1]);
            if a > 0.0 && b >= a && c3 >= b {
                return Err(KamError::LieDivergence { order: j + 1, norm: c3 });
            }
        }
        cur = next;
    }
    Ok(acc)
}

/// H o phi_F^1 truncated at (max_degree, max_fourier).
pub fn lie_transform(
    h: &TaylorFourierSeries,
    f: &TaylorFourierSeries,
    opts: &LieOptions,
) -> Result<TaylorFourierSeries> {
    lie_series_sum(h, f, |_| 1.0, opts)
}

/// Phase-space coordinate transported by the flow, c o phi_F^1 = c + sum_{j>=1}
/// ad_F^{j-1}({c,F})/j!. The first bracket of a bare coordinate with F is
/// supplied in closed form; the remaining brackets are ordinary.
#[derive(Clone, Copy, Debug)]
pub enum Coordinate<'a> {
    X(usize),
    Y(usize),
    Z(&'a Site),
    ZBar(&'a Site),
}

/// Returns the displacement series c o phi_F^1 - c (the bare coordinate
/// itself is not polynomial for x, so only the displacement is a series).
pub fn flow_component(
    coord: Coordinate<'_>,
    f: &TaylorFourierSeries,
    opts: &LieOptions,
) -> Result<TaylorFourierSeries> {
    let i_unit = Complex64::new(0.0, 1.0);
    let first = match coord {
        // {x_j, F} = F_{y_j},  {y_j, F} = -F_{x_j}
        Coordinate::X(j) => f.dy(j),
        Coordinate::Y(j) => f.dx(j).scale(Complex64::new(-1.0, 0.0)),
        // {z_s, F} = i F_{zbar_s},  {zbar_s, F} = -i F_{z_s}
        Coordinate::Z(s) => f.dzbar(s).scale(i_unit),
        Coordinate::ZBar(s) => f.dz(s).scale(-i_unit),
    };
    // sum_{j>=1} ad^{j-1}(first)/j! = lie_series_sum(first, F, 1/(j+1))
    lie_series_sum(&first, f, |j| 1.0 / (j as f64 + 1.0), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{ModeKey, ParamTag};

    fn opts() -> LieOptions {
        LieOptions::new(
            8,
            16,
            DomainWeights::new(0.1, 0.0, 0.2, 0.0, 0.5, 0.5).unwrap(),
        )
    }

    #[test]
    fn zero_generator_is_identity() {
        let mut h = TaylorFourierSeries::zero(1, 1, ParamTag(0));
        h.add_term(
            ModeKey { k: vec![1], m: vec![1], q: vec![], qbar: vec![] },
            Complex64::new(0.7, -0.2),
        )
        .unwrap();
        let f = TaylorFourierSeries::zero(1, 1, ParamTag(0));
        let out = lie_transform(&h, &f, &opts()).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn translation_flow_on_y() {
        // F = c x-independent linear in y shifts nothing; F = c e^{i k x}
        // with zero y power moves y by -i k c (single bracket, series ends).
        let mut f = TaylorFourierSeries::zero(1, 1, ParamTag(0));
        f.add_term(
            ModeKey { k: vec![1], m: vec![0], q: vec![], qbar: vec![] },
            Complex64::new(0.25, 0.0),
        )
        .unwrap();
        let disp = flow_component(Coordinate::Y(0), &f, &opts()).unwrap();
        // {y_1, F} = -F_x = -i * 0.25 e^{i x}; ad_F of that is 0
        assert_eq!(disp.len(), 1);
        let c = disp.coeff(&ModeKey { k: vec![1], m: vec![0], q: vec![], qbar: vec![] });
        assert!((c - Complex64::new(0.0, -0.25)).norm() < 1e-15);
    }

    /// One z mode, quadratic generator: the flow is linear on (z, zbar) and
    /// equals the 2x2 matrix exponential of i[[b, 2c], [-2a, -b]] for
    /// F = a z^2 + b z zbar + c zbar^2.
    #[test]
    fn quadratic_flow_matches_matrix_exponential() {
        let site = Site::scalar(1);
        let (a, b, c) = (0.21, -0.4, 0.13);
        let mut f = TaylorFourierSeries::zero(0, 1, ParamTag(0));
        f.add_term(
            ModeKey { k: vec![], m: vec![], q: vec![(site.clone(), 2)], qbar: vec![] },
            Complex64::new(a, 0.0),
        )
        .unwrap();
        f.add_term(
            ModeKey {
                k: vec![],
                m: vec![],
                q: vec![(site.clone(), 1)],
                qbar: vec![(site.clone(), 1)],
            },
            Complex64::new(b, 0.0),
        )
        .unwrap();
        f.add_term(
            ModeKey { k: vec![], m: vec![], q: vec![], qbar: vec![(site.clone(), 2)] },
            Complex64::new(c, 0.0),
        )
        .unwrap();

        let mut o = opts();
        o.max_order = 64;
        let z_new = flow_component(Coordinate::Z(&site), &f, &o).unwrap();
        let zb_new = flow_component(Coordinate::ZBar(&site), &f, &o).unwrap();

        // matrix exponential oracle via scaling-and-squaring of the 2x2 system
        let i_unit = Complex64::new(0.0, 1.0);
        let m = [
            [i_unit * b, i_unit * 2.0 * c],
            [-i_unit * 2.0 * a, -i_unit * b],
        ];
        let mut exp = [[Complex64::new(1.0, 0.0), Complex64::ZERO],
                       [Complex64::ZERO, Complex64::new(1.0, 0.0)]];
        let mut term = exp;
        for j in 1..60 {
            let mut next = [[Complex64::ZERO; 2]; 2];
            for r in 0..2 {
                for cc in 0..2 {
                    next[r][cc] = term[r][0] * m[0][cc] + term[r][1] * m[1][cc];
                }
            }
            for r in 0..2 {
                for cc in 0..2 {
                    next[r][cc] /= Complex64::new(j as f64, 0.0);
                    exp[r][cc] += next[r][cc];
                }
            }
            term = next;
        }

        let kz = ModeKey { k: vec![], m: vec![], q: vec![(site.clone(), 1)], qbar: vec![] };
        let kzb = ModeKey { k: vec![], m: vec![], q: vec![], qbar: vec![(site.clone(), 1)] };
        // z o phi = exp[0][0] z + exp[0][1] zbar
        let z00 = z_new.coeff(&kz) + Complex64::new(1.0, 0.0);
        let z01 = z_new.coeff(&kzb);
        let z10 = zb_new.coeff(&kz);
        let z11 = zb_new.coeff(&kzb) + Complex64::new(1.0, 0.0);
        assert!((z00 - exp[0][0]).norm() < 1e-10, "{z00} vs {:?}", exp[0][0]);
        assert!((z01 - exp[0][1]).norm() < 1e-10);
        assert!((z10 - exp[1][0]).norm() < 1e-10);
        assert!((z11 - exp[1][1]).norm() < 1e-10);
    }

    #[test]
    fn divergence_guard_fires() {
        // a large generator whose brackets grow triggers the guard
        let site = Site::scalar(1);
        let mut f = TaylorFourierSeries::zero(0, 1, ParamTag(0));
        f.add_term(
            ModeKey {
                k: vec![],
                m: vec![],
                q: vec![(site.clone(), 1)],
                qbar: vec![(site.clone(), 1)],
            },
            Complex64::new(50.0, 0.0),
        )
        .unwrap();
        let mut h = TaylorFourierSeries::zero(0, 1, ParamTag(0));
        h.add_term(
            ModeKey { k: vec![], m: vec![], q: vec![(site.clone(), 2)], qbar: vec![] },
            Complex64::new(1.0, 0.0),
        )
        .unwrap();
        let err = lie_transform(&h, &f, &opts());
        assert!(matches!(err, Err(KamError::LieDivergence { .. })));
    }
}
