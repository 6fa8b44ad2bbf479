//! Independent numerical oracles used only by tests: tanh-sinh quadrature
//! (robust to endpoint singularities of `|x|^{2H}` integrands) and
//! brute-force statistics.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

/// Tanh-sinh rule on `[a, b]` with step `2^-level`, never evaluating the endpoints.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, level: u32) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = 0.5f64.powi(level as i32);
    let half = 0.5 * (b - a);
    let mut sum = FRAC_PI_2 * f(a + half);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let u = FRAC_PI_2 * t.sinh();
        let d = 1.0 / (1.0 + (2.0 * u).exp());
        let w = FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
        if w < 1e-300 || d * (b - a) == 0.0 {
            break;
        }
        let off = (b - a) * d;
        sum += w * (f(a + off) + f(b - off));
        k += 1;
        if t > 6.0 {
            break;
        }
    }
    sum * h * half
}

/// `∫_a^b f` with the interval split at interior kinks.
pub fn integrate_split<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, kinks: &[f64], level: u32) -> f64 {
    let mut pts = vec![a];
    let mut ks: Vec<f64> = kinks.iter().copied().filter(|&k| k > a && k < b).collect();
    ks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.extend(ks);
    pts.push(b);
    pts.windows(2).map(|w| tanh_sinh(&mut f, w[0], w[1], level)).sum()
}

/// `∫_a^b ∫_c^d f(outer, inner) d inner d outer`, inner integral split
/// at `kinks(outer)`.
pub fn double_integral<F, K>(f: F, outer: (f64, f64), inner: (f64, f64), kinks: K, level: u32) -> f64
where
    F: Fn(f64, f64) -> f64,
    K: Fn(f64) -> Vec<f64>,
{
    integrate_split(
        |o| integrate_split(|i| f(o, i), inner.0, inner.1, &kinks(o), level),
        outer.0,
        outer.1,
        &[],
        level,
    )
}

fn inner_product(u: f64, v: f64, s: f64, t: f64, p: f64) -> f64 {
    0.5 * ((t - u).abs().powf(p) + (s - v).abs().powf(p) - (s - u).abs().powf(p) - (t - v).abs().powf(p))
}

/// `μ(k) = ∫_0^1 ∫_k^{k+1} ⟨1_{[k,v']}, 1_{[0,v]}⟩ dv' dv` by quadrature.
pub fn mu_quadrature(k: i64, h: f64) -> f64 {
    let p = 2.0 * h;
    let kf = k as f64;
    double_integral(
        |v, vp| inner_product(kf, vp, 0.0, v, p),
        (0.0, 1.0),
        (kf, kf + 1.0),
        |v| vec![0.0, v],
        6,
    )
}

/// `n^{2H+1} Σ_{k,k'} ∫∫ ⟨1_{[t_k,v]}, 1_{[t_k',v']}⟩ dv dv'` on `[0, T]`.
pub fn z1_variance_quadrature(horizon: f64, n: usize, h: f64) -> f64 {
    let p = 2.0 * h;
    let dt = horizon / n as f64;
    let mut total = 0.0;
    for k in 0..n {
        for kp in 0..n {
            let (tk, tkp) = (k as f64 * dt, kp as f64 * dt);
            total += double_integral(
                |v, vp| inner_product(tk, v, tkp, vp, p),
                (tk, tk + dt),
                (tkp, tkp + dt),
                |v| vec![v, tk],
                5,
            );
        }
    }
    (n as f64).powf(p + 1.0) * total
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance and the standard error of that variance estimate.
pub fn variance_with_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    let c2: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    let var = c2.iter().sum::<f64>() / (n - 1.0);
    let m4 = c2.iter().map(|c| c * c).sum::<f64>() / n;
    let se = ((m4 - var * var) / n).max(0.0).sqrt();
    (var, se)
}

#[cfg(test)]
mod tests {
    // also compiled into harness-less test targets, where #[test] items are dropped
    #[allow(unused_imports)]
    use super::*;

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        let v = tanh_sinh(|x| x.powf(-0.5), 0.0, 1.0, 6);
        assert!((v - 2.0).abs() < 1e-10);
        let v = tanh_sinh(|x| x.powf(0.2), 0.0, 2.0, 6);
        assert!((v - 2f64.powf(1.2) / 1.2).abs() < 1e-12);
    }

    #[test]
    fn split_handles_interior_kink() {
        let v = integrate_split(|x| (x - 0.3).abs().powf(0.2), 0.0, 1.0, &[0.3], 6);
        let exact = (0.3f64.powf(1.2) + 0.7f64.powf(1.2)) / 1.2;
        assert!((v - exact).abs() < 1e-12);
    }
}
