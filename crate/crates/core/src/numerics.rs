//! Small numeric helpers: incomplete-gamma tails, lattice shell counts,
//! compensated summation, regression fits.

/// Exact value of the tail integral `int_X^inf t^N e^{-c t} dt` for integer
/// `N >= 0`, `c > 0`, `X >= 0`, via the incomplete-gamma recurrence
/// `Gamma(N+1, cX) / c^{N+1} = (N! / c^{N+1}) e^{-cX} sum_{j=0}^N (cX)^j / j!`.
pub fn exp_poly_tail(x: f64, n: u32, c: f64) -> f64 {
    assert!(c > 0.0 && x >= 0.0);
    let cx = x * c;
    // sum (cX)^j / j! in log-safe form: factor e^{-cX} in as we go.
    let mut term = (-cx).exp();
    let mut sum = term;
    for j in 1..=n {
        term *= cx / j as f64;
        sum += term;
    }
    let mut fac_over_c = 1.0 / c;
    for j in 1..=n {
        fac_over_c *= j as f64 / c;
    }
    fac_over_c * sum
}

/// Smallest integer `X >= 1` with `exp_poly_tail(X, n, c) <= bound`.
pub fn smallest_tail_cutoff(n: u32, c: f64, bound: f64) -> Option<u64> {
    if bound <= 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (0u64, 2u64);
    while exp_poly_tail(hi as f64, n, c) > bound {
        lo = hi;
        hi *= 2;
        if hi > 1 << 50 {
            return None;
        }
    }
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if exp_poly_tail(mid as f64, n, c) <= bound {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi.max(1))
}

/// Number of lattice points k in Z^n with |k|_1 = kappa (kappa >= 1):
/// sum_j 2^j C(n,j) C(kappa-1, j-1).
pub fn shell_count(n: usize, kappa: u64) -> f64 {
    if kappa == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for j in 1..=n.min(kappa as usize) {
        total += 2f64.powi(j as i32) * binomial(n as u64, j as u64)
            * binomial(kappa - 1, j as u64 - 1);
    }
    total
}

pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Volume of the unit ball in R^m.
pub fn unit_ball_volume(m: u32) -> f64 {
    // B_m = pi^{m/2} / Gamma(m/2 + 1), with the half-integer Gamma recurrence.
    let half = m as f64 / 2.0;
    std::f64::consts::PI.powf(half) / gamma_half_integer(m + 2)
}

/// Gamma(k/2) for integer k >= 1.
fn gamma_half_integer(k: u32) -> f64 {
    if k % 2 == 0 {
        // Gamma(j) = (j-1)!
        let j = k / 2;
        (1..j).map(|i| i as f64).product()
    } else {
        // Gamma(1/2) = sqrt(pi), then Gamma(x+1) = x Gamma(x)
        let mut g = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        while x + 1.0 <= k as f64 / 2.0 + 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// ln(n!).
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Neumaier-compensated sum of `a_i * b_i`; used where divisor cancellation
/// would otherwise cost ~|log10 gamma| digits.
pub fn dot_compensated(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (a, b) in pairs {
        let prod = a * b;
        let t = sum + prod;
        if sum.abs() >= prod.abs() {
            comp += (sum - t) + prod;
        } else {
            comp += (prod - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Least-squares slope of y against x through the data mean.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Through-origin regression slope: sum(x y) / sum(x^2).
pub fn origin_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.is_empty() {
        return None;
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_integral_matches_closed_form_at_one() {
        // int_1^inf t e^{-t} dt = 2/e
        let exact = 2.0 / std::f64::consts::E;
        assert!((exp_poly_tail(1.0, 1, 1.0) - exact).abs() < 1e-14);
    }

    #[test]
    fn tail_integral_matches_quadrature() {
        // cross-check the recurrence against Simpson quadrature on [X, X+80]
        let (x, n, c) = (3.0, 6u32, 0.5);
        let f = |t: f64| t.powi(n as i32) * (-c * t).exp();
        let (a, b, m) = (x, x + 200.0, 400_000);
        let h = (b - a) / m as f64;
        let mut quad = f(a) + f(b);
        for i in 1..m {
            quad += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        quad *= h / 3.0;
        let exact = exp_poly_tail(x, n, c);
        assert!((quad - exact).abs() / exact < 1e-8, "{quad} vs {exact}");
    }

    #[test]
    fn tail_vanishes_at_infinity() {
        assert!(exp_poly_tail(1e4, 6, 0.25) < 1e-300);
    }

    #[test]
    fn smallest_cutoff_is_tight() {
        let (n, c, mu) = (6u32, 1.0 / 64.0, 1e-4);
        let k = smallest_tail_cutoff(n, c, mu).unwrap();
        assert!(exp_poly_tail(k as f64, n, c) <= mu);
        assert!(exp_poly_tail((k - 1) as f64, n, c) > mu);
    }

    #[test]
    fn shell_counts_match_enumeration() {
        for n in 1..=3usize {
            for kappa in 1..=6u64 {
                let mut count = 0u64;
                let r = kappa as i64;
                // brute-force over the cube
                let mut idx = vec![-r; n];
                loop {
                    let s: i64 = idx.iter().map(|v| v.abs()).sum();
                    if s == r {
                        count += 1;
                    }
                    let mut j = 0;
                    loop {
                        if j == n {
                            break;
                        }
                        idx[j] += 1;
                        if idx[j] <= r {
                            break;
                        }
                        idx[j] = -r;
                        j += 1;
                    }
                    if j == n {
                        break;
                    }
                }
                assert_eq!(shell_count(n, kappa), count as f64, "n={n} kappa={kappa}");
            }
        }
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-12);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
    }
}
