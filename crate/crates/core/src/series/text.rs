//! Line-oriented text format for series, one term per line:
//!
//! ```text
//! # n=2 rho=1 tag=0
//! k=[1,-2] m=[0,1] q={(3):2} qbar={} re=0.5 im=-1.25e-3
//! ```
//!
//! Floats are written in shortest round-trip form; parse(write(s)) == s
//! exactly.

use super::{ModeKey, ParamTag, Site, TaylorFourierSeries};
use crate::error::{KamError, Result};
use num_complex::Complex64;
use std::fmt::Write as _;

pub fn write_series(s: &TaylorFourierSeries) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# n={} rho={} tag={}", s.n, s.rho, s.param_tag);
    for (key, c) in s.iter() {
        let _ = write!(out, "k=[{}]", join_i64(&key.k));
        let _ = write!(out, " m=[{}]", join_u32(&key.m));
        let _ = write!(out, " q={{{}}}", join_sitemap(&key.q));
        let _ = write!(out, " qbar={{{}}}", join_sitemap(&key.qbar));
        let _ = writeln!(out, " re={:?} im={:?}", c.re, c.im);
    }
    out
}

pub fn parse_series(text: &str) -> Result<TaylorFourierSeries> {
    let mut n = None;
    let mut rho = None;
    let mut tag = 0u64;
    let mut terms: Vec<(ModeKey, Complex64)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for field in rest.split_whitespace() {
                if let Some(v) = field.strip_prefix("n=") {
                    n = Some(parse_num::<usize>(v, lineno)?);
                } else if let Some(v) = field.strip_prefix("rho=") {
                    rho = Some(parse_num::<usize>(v, lineno)?);
                } else if let Some(v) = field.strip_prefix("tag=") {
                    tag = parse_num::<u64>(v, lineno)?;
                }
            }
            continue;
        }
        let mut k = None;
        let mut m = None;
        let mut q = None;
        let mut qbar = None;
        let mut re = None;
        let mut im = None;
        for field in line.split_whitespace() {
            if let Some(v) = field.strip_prefix("k=") {
                k = Some(parse_ivec(v, lineno)?);
            } else if let Some(v) = field.strip_prefix("m=") {
                m = Some(
                    parse_ivec(v, lineno)?
                        .into_iter()
                        .map(|x| x as u32)
                        .collect::<Vec<_>>(),
                );
            } else if let Some(v) = field.strip_prefix("qbar=") {
                qbar = Some(parse_sitemap(v, lineno)?);
            } else if let Some(v) = field.strip_prefix("q=") {
                q = Some(parse_sitemap(v, lineno)?);
            } else if let Some(v) = field.strip_prefix("re=") {
                re = Some(parse_num::<f64>(v, lineno)?);
            } else if let Some(v) = field.strip_prefix("im=") {
                im = Some(parse_num::<f64>(v, lineno)?);
            } else {
                return Err(KamError::Parse(format!(
                    "line {}: unknown field `{field}`",
                    lineno + 1
                )));
            }
        }
        let (k, m, q, qbar, re, im) = match (k, m, q, qbar, re, im) {
            (Some(a), Some(b), Some(c), Some(d), Some(e), Some(f)) => (a, b, c, d, e, f),
            _ => {
                return Err(KamError::Parse(format!(
                    "line {}: missing term fields",
                    lineno + 1
                )))
            }
        };
        terms.push((ModeKey { k, m, q, qbar }, Complex64::new(re, im)));
    }

    let n = n.ok_or_else(|| KamError::Parse("missing `# n=...` header".into()))?;
    let rho = rho.ok_or_else(|| KamError::Parse("missing `rho=` in header".into()))?;
    TaylorFourierSeries::from_terms(n, rho, ParamTag(tag), terms)
}

fn join_i64(v: &[i64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn join_u32(v: &[u32]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn join_sitemap(m: &[(Site, u32)]) -> String {
    m.iter()
        .map(|(s, p)| format!("{s}:{p}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_num<T: std::str::FromStr>(v: &str, lineno: usize) -> Result<T> {
    v.parse()
        .map_err(|_| KamError::Parse(format!("line {}: bad number `{v}`", lineno + 1)))
}

fn parse_ivec(v: &str, lineno: usize) -> Result<Vec<i64>> {
    let inner = v
        .strip_prefix('[')
        .and_then(|x| x.strip_suffix(']'))
        .ok_or_else(|| KamError::Parse(format!("line {}: expected [..] in `{v}`", lineno + 1)))?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|tok| parse_num(tok.trim(), lineno)).collect()
}

fn parse_sitemap(v: &str, lineno: usize) -> Result<Vec<(Site, u32)>> {
    let inner = v
        .strip_prefix('{')
        .and_then(|x| x.strip_suffix('}'))
        .ok_or_else(|| KamError::Parse(format!("line {}: expected {{..}} in `{v}`", lineno + 1)))?;
    let mut out = Vec::new();
    if inner.is_empty() {
        return Ok(out);
    }
    // entries look like (1,-2):3 and are comma-joined; split on `),` boundaries
    let mut rest = inner;
    while !rest.is_empty() {
        let close = rest
            .find(')')
            .ok_or_else(|| KamError::Parse(format!("line {}: bad site in `{v}`", lineno + 1)))?;
        let site_str = &rest[..close + 1];
        let site_inner = site_str
            .strip_prefix('(')
            .and_then(|x| x.strip_suffix(')'))
            .ok_or_else(|| KamError::Parse(format!("line {}: bad site `{site_str}`", lineno + 1)))?;
        let coords: Vec<i64> = if site_inner.is_empty() {
            Vec::new()
        } else {
            site_inner
                .split(',')
                .map(|tok| parse_num(tok.trim(), lineno))
                .collect::<Result<_>>()?
        };
        let after = &rest[close + 1..];
        let after = after.strip_prefix(':').ok_or_else(|| {
            KamError::Parse(format!("line {}: expected `:pow` in `{v}`", lineno + 1))
        })?;
        let (pow_str, tail) = match after.find(',') {
            Some(idx) => (&after[..idx], &after[idx + 1..]),
            None => (after, ""),
        };
        out.push((Site::new(coords), parse_num::<u32>(pow_str.trim(), lineno)?));
        rest = tail;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::ParamTag;

    #[test]
    fn roundtrip_exact() {
        let mut s = TaylorFourierSeries::zero(2, 2, ParamTag(7));
        s.add_term(
            ModeKey {
                k: vec![1, -3],
                m: vec![0, 2],
                q: vec![(Site::new(vec![1, -2]), 2)],
                qbar: vec![(Site::new(vec![0, 1]), 1)],
            },
            Complex64::new(0.1 + 0.2, -1.25e-3),
        )
        .unwrap();
        s.add_term(
            ModeKey { k: vec![0, 0], m: vec![1, 0], q: vec![], qbar: vec![] },
            Complex64::new(f64::MIN_POSITIVE, std::f64::consts::PI),
        )
        .unwrap();
        let text = write_series(&s);
        let back = parse_series(&text).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_series("k=[1] m=[0] q={} qbar={} re=0 im=0").is_err()); // no header
        assert!(parse_series("# n=1 rho=1\nk=[1] m=[0] q={}").is_err());
    }
}
