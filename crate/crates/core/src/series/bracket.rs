//! Poisson bracket of Taylor-Fourier series.
//!
//! With respect to the symplectic structure used here the bracket is
//!
//! ```text
//! {F,G} = sum_j (F_{x_j} G_{y_j} - F_{y_j} G_{x_j})
//!       + i * sum_s (F_{z_s} G_{zbar_s} - F_{zbar_s} G_{z_s})
//! ```
//!
//! The imaginary unit on the normal part makes the normal modes genuine
//! oscillators: for N = <omega,y> + sum Omega_s z_s zbar_s the action on a
//! monomial with Fourier index k and signed normal vector l = q - qbar is
//!
//! ```text
//! {N, F} = -i (<k,omega> + <l,Omega>) F     (termwise),
//! ```
//!
//! so the divisors of the homological equation are exactly the real
//! combinations <k,omega> + <l,Omega> that the Diophantine conditions bound,
//! and the bracket of two real series is real. The sign orientation is
//! validated by the residual identity {N,F} + R - [R] = 0 rather than by any
//! single displayed equation.

use super::{TaylorFourierSeries};
use crate::error::Result;
use num_complex::Complex64;

/// {F,G}. Errors on mismatched dimensions or parameter tags.
pub fn poisson_bracket(
    f: &TaylorFourierSeries,
    g: &TaylorFourierSeries,
) -> Result<TaylorFourierSeries> {
    f.compatible(g)?;
    let mut out = TaylorFourierSeries::zero(f.n, f.rho, f.param_tag);

    for j in 0..f.n {
        let fx = f.dx(j);
        let gy = g.dy(j);
        if !fx.is_empty() && !gy.is_empty() {
            out.add_assign(&fx.mul(&gy)?)?;
        }
        let fy = f.dy(j);
        let gx = g.dx(j);
        if !fy.is_empty() && !gx.is_empty() {
            out.axpy(Complex64::new(-1.0, 0.0), &fy.mul(&gx)?)?;
        }
    }

    let i_unit = Complex64::new(0.0, 1.0);
    let mut sites = f.active_sites();
    for s in g.active_sites() {
        if !sites.contains(&s) {
            sites.push(s);
        }
    }
    for s in &sites {
        let fz = f.dz(s);
        let gzbar = g.dzbar(s);
        if !fz.is_empty() && !gzbar.is_empty() {
            out.axpy(i_unit, &fz.mul(&gzbar)?)?;
        }
        let fzbar = f.dzbar(s);
        let gz = g.dz(s);
        if !fzbar.is_empty() && !gz.is_empty() {
            out.axpy(-i_unit, &fzbar.mul(&gz)?)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{ModeKey, ParamTag, Site};

    fn series(
        n: usize,
        rho: usize,
        terms: Vec<(ModeKey, Complex64)>,
    ) -> TaylorFourierSeries {
        TaylorFourierSeries::from_terms(n, rho, ParamTag(0), terms).unwrap()
    }

    fn key(k: Vec<i64>, m: Vec<u32>, q: Vec<(Site, u32)>, qbar: Vec<(Site, u32)>) -> ModeKey {
        ModeKey { k, m, q, qbar }.normalized()
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn y_brackets_to_zero_with_x_independent() {
        // {y_1, z_2 zbar_2} = 0: vanishing partials
        let f = series(1, 1, vec![(key(vec![0], vec![1], vec![], vec![]), one())]);
        let g = series(
            1,
            1,
            vec![(
                key(
                    vec![0],
                    vec![0],
                    vec![(Site::scalar(2), 1)],
                    vec![(Site::scalar(2), 1)],
                ),
                one(),
            )],
        );
        assert!(poisson_bracket(&f, &g).unwrap().is_empty());
    }

    #[test]
    fn action_of_quadratic_on_mode() {
        // {z_i zbar_i, z_i} = -i z_i under the oscillator-oriented bracket.
        let i = Site::scalar(3);
        let f = series(
            1,
            1,
            vec![(
                key(vec![0], vec![0], vec![(i.clone(), 1)], vec![(i.clone(), 1)]),
                one(),
            )],
        );
        let g = series(
            1,
            1,
            vec![(key(vec![0], vec![0], vec![(i.clone(), 1)], vec![]), one())],
        );
        let b = poisson_bracket(&f, &g).unwrap();
        assert_eq!(b.len(), 1);
        let c = b.coeff(&key(vec![0], vec![0], vec![(i, 1)], vec![]));
        assert!((c - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn antisymmetry_exact() {
        let i = Site::scalar(2);
        let f = series(
            2,
            1,
            vec![
                (key(vec![1, 0], vec![0, 1], vec![(i.clone(), 1)], vec![]), Complex64::new(0.3, -0.7)),
                (key(vec![0, -1], vec![1, 0], vec![], vec![(i.clone(), 2)]), Complex64::new(-1.1, 0.2)),
            ],
        );
        let g = series(
            2,
            1,
            vec![
                (key(vec![-1, 1], vec![0, 0], vec![(i.clone(), 2)], vec![]), Complex64::new(0.9, 0.4)),
                (key(vec![2, 0], vec![0, 1], vec![], vec![(i, 1)]), Complex64::new(0.05, -0.6)),
            ],
        );
        let fg = poisson_bracket(&f, &g).unwrap();
        let gf = poisson_bracket(&g, &f).unwrap();
        // coefficient-level cancellation, no tolerance
        assert!(fg.add(&gf).unwrap().is_empty());
    }

    #[test]
    fn bracket_of_real_series_is_real() {
        let i = Site::scalar(2);
        let mut f = series(
            1,
            1,
            vec![(key(vec![1], vec![0], vec![(i.clone(), 1)], vec![]), Complex64::new(0.4, 0.3))],
        );
        f.add_term(
            key(vec![-1], vec![0], vec![], vec![(i.clone(), 1)]),
            Complex64::new(0.4, -0.3),
        )
        .unwrap();
        let mut g = series(
            1,
            1,
            vec![(
                key(vec![0], vec![0], vec![(i.clone(), 1)], vec![(i.clone(), 1)]),
                one(),
            )],
        );
        g.add_term(key(vec![2], vec![1], vec![], vec![]), Complex64::new(0.2, 0.1))
            .unwrap();
        g.add_term(key(vec![-2], vec![1], vec![], vec![]), Complex64::new(0.2, -0.1))
            .unwrap();
        assert_eq!(f.reality_defect(), 0.0);
        assert_eq!(g.reality_defect(), 0.0);
        let b = poisson_bracket(&f, &g).unwrap();
        assert!(b.reality_defect() < 1e-15);
    }
}
