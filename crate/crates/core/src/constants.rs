//! The limit-variance constant `c_H = Σ_k μ(k)`, Hermite polynomials and
//! the combinatorial identity behind the cancellation in compensated sums.
//!
//! `μ(k) = ∫_0^1 ∫_k^{k+1} ⟨1_{[k,v']}, 1_{[0,v]}⟩ dv' dv` expands into four
//! power terms. With `p = 2H`, `G(x) = sgn(x)|x|^{p+1}/(p+1)` and
//! `Φ(x) = |x|^{p+2}/((p+1)(p+2))`:
//!
//! ```text
//! 2μ(k) = [G(1−k) − G(−k)] + [G(k+1) − G(k)] − |k|^p − [Φ(k+1) − 2Φ(k) + Φ(k−1)]
//! ```
//!
//! For large `|k|` the bracket cancels to `O(|k|^{p−2})` and the direct
//! form loses all precision, so there we use the binomial expansion
//! `μ(k) = |k|^p Σ_{r≥1} c_r |k|^{−2r}`. The same expansion sums the tail
//! of `c_H` through Hurwitz zeta values.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::HurstParam;

/// Below this `|k|` the direct closed form is used.
const SERIES_FROM: i64 = 8;
/// Terms of the asymptotic series kept before giving up on convergence.
const MAX_SERIES_TERMS: usize = 60;
pub const DEFAULT_K_CAP: u64 = 10_000_000;

fn antideriv1(x: f64, p: f64) -> f64 {
    x.signum() * x.abs().powf(p + 1.0) / (p + 1.0)
}

fn antideriv2(x: f64, p: f64) -> f64 {
    x.abs().powf(p + 2.0) / ((p + 1.0) * (p + 2.0))
}

/// Generalized binomial coefficient `C(a, j)` for real `a`.
fn binom(a: f64, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (a - i as f64) / (i as f64 + 1.0))
}

/// Coefficient `c_r` of `|k|^{p−2r}` in the large-`|k|` expansion of `μ(k)`.
fn series_coeff(r: usize, p: f64) -> f64 {
    binom(p + 1.0, 2 * r + 1) / (p + 1.0) - binom(p + 2.0, 2 * r + 2) / ((p + 1.0) * (p + 2.0))
}

/// Direct evaluation of the four-term closed form, valid for every sign of
/// `k`. Accurate for small `|k|` only.
pub fn mu_direct(k: i64, h: HurstParam) -> Result<f64> {
    let p = h.require_rough()?.two_h();
    let kf = k as f64;
    let a = antideriv1(1.0 - kf, p) - antideriv1(-kf, p);
    let b = antideriv1(kf + 1.0, p) - antideriv1(kf, p);
    let c = kf.abs().powf(p);
    let d = antideriv2(kf + 1.0, p) - 2.0 * antideriv2(kf, p) + antideriv2(kf - 1.0, p);
    Ok(0.5 * (a + b - c - d))
}

fn mu_series(k: u64, p: f64) -> f64 {
    let kf = k as f64;
    let inv2 = 1.0 / (kf * kf);
    let mut pow = inv2;
    let mut sum = 0.0;
    for r in 1..=MAX_SERIES_TERMS {
        let term = series_coeff(r, p) * pow;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        pow *= inv2;
    }
    kf.powf(p) * sum
}

/// `μ(k)`; symmetric in `k` by construction.
pub fn mu(k: i64, h: HurstParam) -> Result<f64> {
    let p = h.require_rough()?.two_h();
    let ka = k.unsigned_abs();
    if (ka as i64) < SERIES_FROM {
        mu_direct(ka as i64, h)
    } else {
        Ok(mu_series(ka, p))
    }
}

/// `μ(k)` for `k = −k_max..=k_max`.
#[derive(Debug, Clone)]
pub struct MuTable {
    pub h: HurstParam,
    pub k_max: usize,
    values: Vec<f64>,
}

impl MuTable {
    pub fn new(h: HurstParam, k_max: usize) -> Result<Self> {
        h.require_rough()?;
        let half: Vec<f64> = (0..=k_max as i64).map(|k| mu(k, h)).collect::<Result<_>>()?;
        let values = half[1..].iter().rev().chain(half.iter()).copied().collect();
        Ok(Self { h, k_max, values })
    }

    pub fn get(&self, k: i64) -> Option<f64> {
        let idx = k + self.k_max as i64;
        (idx >= 0).then(|| self.values.get(idx as usize).copied()).flatten()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max_{|k|≥1} |μ(k)| / |k|^{2H−2}`: the envelope constant `C` in
    /// `|μ(k)| ≤ C ρ(k)^{2H−2}`.
    pub fn envelope_constant(&self) -> f64 {
        let e = self.h.two_h() - 2.0;
        (1..=self.k_max as i64)
            .map(|k| self.get(k).unwrap().abs() / (k as f64).powf(e))
            .fold(self.get(0).unwrap().abs(), f64::max)
    }
}

/// Bernoulli numbers `B_2, B_4, …, B_20`.
const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Hurwitz zeta `ζ(s, a) = Σ_{k≥0} (a+k)^{−s}` for `s > 1`, `a > 0`, by
/// Euler–Maclaurin. Returns the value and a bound on the remainder.
pub fn hurwitz_zeta(s: f64, a: f64) -> (f64, f64) {
    let n = 10 + s.ceil() as usize;
    let head: f64 = (0..n).map(|k| (a + k as f64).powf(-s)).sum();
    let x = a + n as f64;
    let mut sum = head + x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s(s+1)...(s+2j-2) / (2j)!
    let mut fact = s;
    let mut factorial = 2.0;
    let mut xpow = x.powf(-s - 1.0);
    let mut last = 0.0;
    for (j, b) in BERNOULLI.iter().enumerate() {
        let term = b / factorial * fact * xpow;
        sum += term;
        last = term.abs();
        let j2 = 2.0 * (j as f64 + 1.0);
        fact *= (s + j2 - 1.0) * (s + j2);
        factorial *= (j2 + 1.0) * (j2 + 2.0);
        xpow /= x * x;
    }
    (sum, last)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CHResult {
    pub h: HurstParam,
    pub value: f64,
    /// Terms `|k| <= k_max` are summed exactly; the rest analytically.
    pub k_max: u64,
    /// Bound on the error left by the tail evaluation.
    pub tail_bound: f64,
}

/// `c_H = Σ_{k∈Z} μ(k)` to absolute accuracy `tol`, with the default cap.
pub fn c_h(h: HurstParam, tol: f64) -> Result<CHResult> {
    c_h_with_cap(h, tol, DEFAULT_K_CAP)
}

/// Sums `μ(0) + 2Σ_{k=1}^{K} μ(k)` in order and adds the tail
/// `2Σ_{k>K} μ(k) = 2Σ_r c_r ζ(2r − 2H, K+1)`. `K` starts at 16 and doubles
/// until the tail bound drops below `tol`.
pub fn c_h_with_cap(h: HurstParam, tol: f64, cap: u64) -> Result<CHResult> {
    let p = h.require_rough()?.two_h();
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tol must be positive, got {tol}")));
    }
    let mut k_max: u64 = 16;
    loop {
        if k_max > cap {
            return Err(Error::TruncationCap { cap });
        }
        let mut head = mu(0, h)?;
        let mut abs_mass = head.abs();
        for k in 1..=k_max as i64 {
            let m = mu(k, h)?;
            head += 2.0 * m;
            abs_mass += 2.0 * m.abs();
        }
        let a = (k_max + 1) as f64;
        let mut tail = 0.0;
        let mut series_err = f64::INFINITY;
        let mut zeta_err = 0.0;
        for r in 1..=MAX_SERIES_TERMS {
            let (z, err) = hurwitz_zeta(2.0 * r as f64 - p, a);
            let term = 2.0 * series_coeff(r, p) * z;
            tail += term;
            zeta_err += 2.0 * series_coeff(r, p).abs() * err;
            // remaining terms shrink at least geometrically with ratio 1/a²
            let rest = term.abs() / (a * a - 1.0);
            if rest < 1e-3 * tol || rest < 1e-18 {
                series_err = rest;
                break;
            }
        }
        let roundoff = 1e-15 * abs_mass * (k_max as f64).sqrt();
        let tail_bound = series_err + zeta_err + roundoff;
        if tail_bound < tol {
            return Ok(CHResult { h, value: head + tail, k_max, tail_bound });
        }
        k_max = k_max.saturating_mul(2);
    }
}

/// Probabilists' Hermite polynomial `H_k(x)`.
pub fn hermite_poly(k: usize, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for j in 1..k {
                let next = x * cur - j as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

pub const MAX_EXACT_ORDER: usize = 20;

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// `a^i_{i−2q} = i! / (2^q q! (i−2q)!)`, exact for `i <= 20`.
pub fn hermite_coeff_exact(i: usize, q: usize) -> Result<u64> {
    if i == 0 || 2 * q > i {
        return Err(Error::IndexOutOfRange(format!("need 1 <= i and 0 <= q <= i/2, got i={i}, q={q}")));
    }
    if i > MAX_EXACT_ORDER {
        return Err(Error::IndexOutOfRange(format!("order {i} exceeds exact range {MAX_EXACT_ORDER}")));
    }
    let v = factorial(i) / ((1u128 << q) * factorial(q) * factorial(i - 2 * q));
    Ok(v as u64)
}

pub fn hermite_coeff(i: usize, q: usize) -> Result<f64> {
    hermite_coeff_exact(i, q).map(|v| v as f64)
}

/// `Σ_{j=0}^{τ} (−1)^j / (j! (τ−j)!)`, exact.
pub fn cancellation_sum(tau: usize) -> Result<Ratio<i128>> {
    if tau == 0 || tau > 33 {
        return Err(Error::IndexOutOfRange(format!("tau must be in 1..=33, got {tau}")));
    }
    Ok((0..=tau).map(|j| family_weight(tau - j, j)).sum())
}

/// Weight `(−1)^j / (q! j!)` of the component `(i, q, j)`.
pub fn family_weight(q: usize, j: usize) -> Ratio<i128> {
    let sign = if j % 2 == 0 { 1 } else { -1 };
    Ratio::new(sign, (factorial(q) * factorial(j)) as i128)
}

/// `A_τ = {(τ,0,τ), (τ+1,1,τ−1), …, (2τ,τ,0)}` as `(i, q, j)` triples.
pub fn a_tau_family(tau: usize) -> Vec<(usize, usize, usize)> {
    (0..=tau).map(|q| (tau + q, q, tau - q)).collect()
}

/// `A = {(i,q,j) : 1 <= i <= L, 0 <= q <= ⌊i/2⌋, j <= L − i, j = i − 2q}`.
pub fn index_set_a(l: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for i in 1..=l {
        for q in 0..=i / 2 {
            let j = i - 2 * q;
            if j <= l - i {
                out.push((i, q, j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use rand::{Rng, SeedableRng};

    fn hp(h: f64) -> HurstParam {
        HurstParam::new(h).unwrap()
    }

    #[test]
    fn mu_zero_closed_form() {
        for h in [0.1, 0.25, 0.4] {
            let v = mu(0, hp(h)).unwrap();
            assert!((v - 1.0 / (2.0 * h + 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn mu_matches_quadrature_on_every_branch() {
        for h in [0.1, 0.25, 0.4] {
            for k in -3..=3 {
                let exact = mu_direct(k, hp(h)).unwrap();
                let quad = oracle::mu_quadrature(k, h);
                assert!((exact - quad).abs() < 1e-8, "H={h} k={k}: {exact} vs {quad}");
            }
        }
    }

    #[test]
    fn series_agrees_with_direct_form_where_both_are_accurate() {
        for h in [0.05, 0.2, 0.3, 0.45] {
            let p = 2.0 * h;
            for k in 8..=20u64 {
                let d = mu_direct(k as i64, hp(h)).unwrap();
                let s = mu_series(k, p);
                assert!((d - s).abs() < 1e-11, "H={h} k={k}: {d} vs {s}");
            }
        }
    }

    #[test]
    fn mu_symmetry() {
        for h in [0.1, 0.3, 0.45] {
            for k in 1..=50 {
                assert_eq!(mu(-k, hp(h)).unwrap(), mu(k, hp(h)).unwrap());
            }
            for k in 1..=7 {
                let (a, b) = (mu_direct(-k, hp(h)).unwrap(), mu_direct(k, hp(h)).unwrap());
                assert!((a - b).abs() < 1e-13, "H={h} k={k}");
            }
        }
    }

    #[test]
    fn mu_decay_envelope() {
        for h in [0.1, 0.25, 0.4] {
            let e = 2.0 - 2.0 * h;
            let scaled: Vec<f64> = (5..=200).map(|k| mu(k, hp(h)).unwrap().abs() * (k as f64).powf(e)).collect();
            let max = scaled.iter().cloned().fold(0.0, f64::max);
            let leading = (2.0 * h) * (1.0 - 2.0 * h) / 8.0;
            assert!(max < 2.0 * leading, "H={h}");
            // tends to the leading coefficient 2H(1−2H)/8
            assert!((scaled.last().unwrap() - leading).abs() < 1e-3 * leading);
        }
    }

    #[test]
    fn mu_rejects_smooth() {
        assert!(mu(1, hp(0.5)).is_err());
        assert!(c_h(hp(0.6), 1e-6).is_err());
    }

    #[test]
    fn mu_table() {
        let t = MuTable::new(hp(0.3), 30).unwrap();
        assert_eq!(t.values().len(), 61);
        for k in 0..=30 {
            assert_eq!(t.get(k), t.get(-k));
        }
        assert!(t.get(31).is_none());
        let c = t.envelope_constant();
        for k in 1..=30i64 {
            assert!(t.get(k).unwrap().abs() <= c * (k as f64).powf(0.6 - 2.0) + 1e-15);
        }
    }

    #[test]
    fn hurwitz_zeta_known_values() {
        // ζ(2, 1) = π²/6, ζ(3, 1) = 1.2020569031595942
        let (z2, _) = hurwitz_zeta(2.0, 1.0);
        assert!((z2 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
        let (z3, _) = hurwitz_zeta(3.0, 1.0);
        assert!((z3 - 1.2020569031595942).abs() < 1e-14);
        // ζ(s, a) − ζ(s, a+1) = a^{−s}
        let (a, _) = hurwitz_zeta(1.4, 17.0);
        let (b, _) = hurwitz_zeta(1.4, 18.0);
        assert!((a - b - 17f64.powf(-1.4)).abs() < 1e-15);
    }

    #[test]
    fn c_h_positive_and_stable() {
        for i in 1..=9 {
            let h = 0.05 * i as f64;
            let r = c_h(hp(h), 1e-6).unwrap();
            assert!(r.value > 0.0, "H={h}");
            assert!(r.tail_bound < 1e-6);
            let loose = c_h(hp(h), 1e-4).unwrap().value;
            let tight = c_h(hp(h), 1e-8).unwrap().value;
            assert!((loose - tight).abs() < 1e-4);
        }
    }

    #[test]
    fn c_h_tail_matches_brute_force() {
        // direct partial sums with a crude integral tail agree with the analytic tail
        for h in [0.1, 0.3] {
            let hp = hp(h);
            let p = 2.0 * h;
            let big = 2_000_000i64;
            let mut s = mu(0, hp).unwrap();
            for k in 1..=big {
                s += 2.0 * mu(k, hp).unwrap();
            }
            let lead = p * (p - 1.0) / 8.0;
            let tail = 2.0 * lead * (big as f64 + 0.5).powf(p - 1.0) / (1.0 - p);
            let ch = c_h(hp, 1e-10).unwrap().value;
            assert!((s + tail - ch).abs() < 1e-9, "H={h}: {} vs {ch}", s + tail);
        }
    }

    #[test]
    fn c_h_cap() {
        assert!(matches!(c_h_with_cap(hp(0.3), 1e-30, 1 << 12), Err(Error::TruncationCap { .. })));
    }

    #[test]
    fn hermite_base_cases() {
        assert_eq!(hermite_poly(0, 3.7), 1.0);
        assert_eq!(hermite_poly(1, 3.7), 3.7);
        assert_eq!(hermite_poly(2, 2.0), 3.0);
        assert_eq!(hermite_poly(3, 2.0), 2.0);
    }

    #[test]
    fn hermite_derivative_by_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let step = 1e-5;
        for _ in 0..20 {
            let x: f64 = rng.random_range(-2.0..2.0);
            for k in 1..=8 {
                let fd = (hermite_poly(k, x + step) - hermite_poly(k, x - step)) / (2.0 * step);
                let exact = k as f64 * hermite_poly(k - 1, x);
                assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn hermite_coefficients() {
        assert_eq!(hermite_coeff_exact(1, 0).unwrap(), 1);
        assert_eq!(hermite_coeff_exact(2, 0).unwrap(), 1);
        assert_eq!(hermite_coeff_exact(2, 1).unwrap(), 1);
        assert_eq!(hermite_coeff_exact(4, 1).unwrap(), 6);
        assert_eq!(hermite_coeff_exact(4, 2).unwrap(), 3);
        assert_eq!(hermite_coeff_exact(20, 10).unwrap(), 654_729_075);
        assert!(hermite_coeff(0, 0).is_err());
        assert!(hermite_coeff(3, 2).is_err());
        assert!(hermite_coeff(21, 0).is_err());
    }

    #[test]
    fn hermite_monomial_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x: f64 = rng.random_range(-3.0..3.0);
            for i in 1..=10 {
                let s: f64 = (0..=i / 2)
                    .map(|q| hermite_coeff(i, q).unwrap() * hermite_poly(i - 2 * q, x))
                    .sum();
                let direct = x.powi(i as i32);
                assert!((s - direct).abs() <= 1e-10 * direct.abs().max(1.0), "i={i} x={x}");
            }
        }
    }

    #[test]
    fn cancellation_vanishes() {
        for tau in 1..=33 {
            assert_eq!(cancellation_sum(tau).unwrap(), Ratio::from_integer(0));
        }
        assert!(cancellation_sum(0).is_err());
    }

    #[test]
    fn l6_table_groups() {
        let a = index_set_a(6);
        let mut groups: Vec<(usize, usize, usize)> = (1..=3).flat_map(a_tau_family).collect();
        let mut a_sorted = a.clone();
        a_sorted.sort();
        groups.sort();
        assert_eq!(a_sorted, groups);
        assert_eq!(a_tau_family(1), vec![(1, 0, 1), (2, 1, 0)]);
        assert_eq!(a_tau_family(2), vec![(2, 0, 2), (3, 1, 1), (4, 2, 0)]);
        assert_eq!(a_tau_family(3), vec![(3, 0, 3), (4, 1, 2), (5, 2, 1), (6, 3, 0)]);
        for tau in 1..=3 {
            let s: Ratio<i128> = a_tau_family(tau).iter().map(|&(_, q, j)| family_weight(q, j)).sum();
            assert_eq!(s, cancellation_sum(tau).unwrap());
            assert_eq!(s, Ratio::from_integer(0));
        }
    }
}
