//! Recovery certificates built from a restricted isometry constant, and a
//! brute-force RIP oracle for small matrices.
//!
//! Starting from `δ = δ_{⌈tk⌉}` the chain is
//!
//! ```text
//! ν = √(t(t−1)) − (t−1)
//! a = [ν(1−ν) − δ(½ − ν + ν²)]^{1/2}
//! b = ν(1−ν)√(1+δ)
//! c = [δν² / (2(t−1))]^{1/2}
//! ρ = c/a,   τ = b√k / a²
//! γ = μ√g / (1−μ)
//! C = 2(1+ρ)/det,  D = 4τ/det,  det = (1−γ) − (1+γ)ρ
//! ```
//!
//! `mu_max = (1−ρ)/(√g(1+ρ))` is reported as the customary admissibility
//! bound on μ, but it does not by itself make `det` positive: `det > 0` is
//! equivalent to `μ < r/(√g + r)` with `r = (1−ρ)/(1+ρ)`, reported as
//! `mu_det_max`. A certificate is valid only when both hold.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{l1_norm, Design, PseudoInverse};

/// `⌈tk⌉`, tolerant of `tk` landing a rounding error above an integer.
pub fn rip_order(t: f64, k: usize) -> usize {
    let tk = t * k as f64;
    let nearest = tk.round();
    if (tk - nearest).abs() <= 1e-9 * tk.max(1.0) {
        nearest as usize
    } else {
        tk.ceil() as usize
    }
}

/// `ν = √(t(t−1)) − (t−1)`
pub fn nu(t: f64) -> f64 {
    (t * (t - 1.0)).sqrt() - (t - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub t: f64,
    pub k: usize,
    pub delta: f64,
    pub nu: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rho: f64,
    /// Includes the `√k` factor.
    pub tau: f64,
    pub g: usize,
    pub mu: f64,
    pub gamma: f64,
    pub mu_max: f64,
    pub mu_det_max: f64,
    pub det: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    #[serde(rename = "D")]
    pub big_d: f64,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reasons: Vec<String>,
}

/// Upper limit on `δ_{tk}` for the null-space property: `√((t−1)/t)`.
pub fn delta_limit(t: f64) -> f64 {
    ((t - 1.0) / t).sqrt()
}

/// Computes the full constant chain. Quantities that are undefined for the
/// given δ (e.g. `a` when `a² ≤ 0`) are NaN and the certificate is invalid.
pub fn certificate(t: f64, k: usize, delta: f64, g: usize, mu: f64) -> Result<Certificate> {
    if !(t >= 4.0 / 3.0 - 1e-12) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("t must be at least 4/3, got {t}")));
    }
    if k == 0 || g == 0 {
        return Err(Error::InvalidParameter("k and g must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::InvalidParameter(format!("mu must lie in [0, 1), got {mu}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("delta must lie in [0, 1), got {delta}")));
    }
    let nu = nu(t);
    let theta1 = nu * (1.0 - nu);
    let a_sq = theta1 - delta * (0.5 - nu + nu * nu);
    let a = if a_sq > 0.0 { a_sq.sqrt() } else { f64::NAN };
    let b = theta1 * (1.0 + delta).sqrt();
    let c = (delta * nu * nu / (2.0 * (t - 1.0))).sqrt();
    let rho = c / a;
    let tau = b * (k as f64).sqrt() / (a * a);
    let sqrt_g = (g as f64).sqrt();
    let gamma = mu * sqrt_g / (1.0 - mu);
    let ratio = (1.0 - rho) / (1.0 + rho);
    let mu_max = ratio / sqrt_g;
    let mu_det_max = ratio / (sqrt_g + ratio);
    let det = (1.0 - gamma) - (1.0 + gamma) * rho;
    let big_c = 2.0 * (1.0 + rho) / det;
    let big_d = 4.0 * tau / det;

    let mut reasons = Vec::new();
    let limit = delta_limit(t);
    if delta >= limit {
        reasons.push(format!("delta {delta} is not below sqrt((t-1)/t) = {limit:.6}"));
    }
    if !(rho < 1.0) {
        reasons.push(format!("rho = {rho} is not below 1"));
    }
    if !(mu < mu_max) {
        reasons.push(format!("mu {mu} is not below mu_max = {mu_max:.6}"));
    }
    if !(det > 0.0) {
        reasons.push(format!(
            "(1-gamma) - (1+gamma) rho = {det:.6} is not positive (needs mu < {mu_det_max:.6})"
        ));
    }
    Ok(Certificate {
        t,
        k,
        delta,
        nu,
        a,
        b,
        c,
        rho,
        tau,
        g,
        mu,
        gamma,
        mu_max,
        mu_det_max,
        det,
        big_c,
        big_d,
        valid: reasons.is_empty(),
        reasons,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds {
    pub bound_l1: f64,
    pub bound_lp: f64,
}

/// `‖x̂ − x‖₁ ≤ Cσ_k + Dε` and the `ℓ_p` bound
/// `k^{−(1−1/p)}[(1+ρ)Cσ_k + ((1+ρ)D + 2τ)ε]`.
pub fn error_bounds(cert: &Certificate, sigma_k: f64, epsilon: f64, p: f64) -> Result<ErrorBounds> {
    if !cert.valid {
        return Err(Error::InvalidCertificate(cert.reasons.join("; ")));
    }
    if !(sigma_k >= 0.0) || !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter("sigma_k and epsilon must be nonnegative".into()));
    }
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("p must lie in [1, 2], got {p}")));
    }
    let bound_l1 = cert.big_c * sigma_k + cert.big_d * epsilon;
    let scale = (cert.k as f64).powf(-(1.0 - 1.0 / p));
    let bound_lp = scale
        * ((1.0 + cert.rho) * cert.big_c * sigma_k + ((1.0 + cert.rho) * cert.big_d + 2.0 * cert.tau) * epsilon);
    Ok(ErrorBounds { bound_l1, bound_lp })
}

/// Largest δ for which a given μ still yields a valid certificate:
/// `ρ̄²θ₁ / (θ₃ + ρ̄²θ₂)` with `ρ̄ = (1−γ)/(1+γ)`.
///
/// At μ = 0 this equals `√((t−1)/t)`; when `γ ≥ 1` no δ works and 0 is
/// returned.
pub fn delta_bound_from_mu(t: f64, mu: f64, g: usize) -> Result<f64> {
    if !(t >= 4.0 / 3.0 - 1e-12) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("t must be at least 4/3, got {t}")));
    }
    if !(0.0..1.0).contains(&mu) || g == 0 {
        return Err(Error::InvalidParameter(format!(
            "need mu in [0, 1) and g ≥ 1, got mu = {mu}, g = {g}"
        )));
    }
    let nu = nu(t);
    let (theta1, theta2, theta3) = thetas(t, nu);
    let gamma = mu * (g as f64).sqrt() / (1.0 - mu);
    if gamma >= 1.0 {
        return Ok(0.0);
    }
    let rho_bar_sq = ((1.0 - gamma) / (1.0 + gamma)).powi(2);
    Ok(rho_bar_sq * theta1 / (theta3 + rho_bar_sq * theta2))
}

/// `(θ₁, θ₂, θ₃) = (ν(1−ν), ½ − θ₁, ν²/(2(t−1)))`
pub fn thetas(t: f64, nu: f64) -> (f64, f64, f64) {
    let theta1 = nu * (1.0 - nu);
    (theta1, 0.5 - theta1, nu * nu / (2.0 * (t - 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    pub k: usize,
    pub delta_k: f64,
    pub argmax_support: Vec<usize>,
}

/// Default refusal limit for [`exact_rip`].
pub const MAX_SUPPORTS: u128 = 10_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Extreme eigenvalues of a small symmetric matrix.
fn extreme_eigs(g: &DMatrix<f64>) -> (f64, f64) {
    let fold = |it: &mut dyn Iterator<Item = f64>| {
        it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    match g.nrows() {
        1 => (g[(0, 0)], g[(0, 0)]),
        2 => {
            let (p, q, r) = (g[(0, 0)], g[(1, 1)], g[(0, 1)]);
            let mean = 0.5 * (p + q);
            let rad = (0.25 * (p - q) * (p - q) + r * r).sqrt();
            (mean - rad, mean + rad)
        }
        3 => fold(&mut Matrix3::from_iterator(g.iter().cloned()).symmetric_eigenvalues().iter().cloned()),
        4 => fold(&mut Matrix4::from_iterator(g.iter().cloned()).symmetric_eigenvalues().iter().cloned()),
        _ => fold(&mut g.clone().symmetric_eigenvalues().iter().cloned()),
    }
}

fn support_delta(gram: &DMatrix<f64>, support: &[usize]) -> f64 {
    let k = support.len();
    let sub = DMatrix::from_fn(k, k, |i, j| gram[(support[i], support[j])]);
    let (lo, hi) = extreme_eigs(&sub);
    (hi - 1.0).max(1.0 - lo)
}

/// Advances `c` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact `δ_k` by enumerating every support of size `k`.
///
/// Work is split by the first index of the support; the reduction keeps the
/// largest δ and, among equal values, the lexicographically first support, so
/// the result does not depend on scheduling.
pub fn exact_rip(a: &DMatrix<f64>, k: usize) -> Result<RipEstimate> {
    exact_rip_with_limit(a, k, MAX_SUPPORTS)
}

pub fn exact_rip_with_limit(a: &DMatrix<f64>, k: usize, limit: u128) -> Result<RipEstimate> {
    let n = a.ncols();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k must lie in 1..={n}, got {k}")));
    }
    let count = binomial(n, k);
    if count > limit {
        return Err(Error::CombinatorialLimit { count, limit });
    }
    let gram = a.tr_mul(a);
    let best = (0..=n - k)
        .into_par_iter()
        .map(|first| {
            let mut rest: Vec<usize> = (first + 1..first + k).collect();
            let mut support = Vec::with_capacity(k);
            let mut best = (f64::NEG_INFINITY, Vec::new());
            loop {
                support.clear();
                support.push(first);
                support.extend_from_slice(&rest);
                let d = support_delta(&gram, &support);
                if d > best.0 {
                    best = (d, support.clone());
                }
                if rest.is_empty() || !next_combination_from(&mut rest, first + 1, n) {
                    break;
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, Vec::new()),
            |x, y| {
                if y.0 > x.0 || (y.0 == x.0 && (x.1.is_empty() || (!y.1.is_empty() && y.1 < x.1))) {
                    y
                } else {
                    x
                }
            },
        );
    Ok(RipEstimate {
        k,
        delta_k: best.0,
        argmax_support: best.1,
    })
}

/// Next combination of `base..n` stored in `c`.
fn next_combination_from(c: &mut [usize], base: usize, n: usize) -> bool {
    for v in c.iter_mut() {
        *v -= base;
    }
    let more = next_combination(c, n - base);
    for v in c.iter_mut() {
        *v += base;
    }
    more
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnspViolation {
    pub support: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnspReport {
    pub k: usize,
    pub rho: f64,
    pub tau: f64,
    /// Number of `(h, S)` pairs evaluated.
    pub pairs: usize,
    pub violations: usize,
    /// Largest `lhs − rhs` seen (negative when every pair holds strictly).
    pub worst_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<RnspViolation>,
}

/// `‖h_S‖₂` and `(ρ/√k)‖h_{S^c}‖₁ + (τ/√k)‖Ah‖₂`.
pub fn rnsp_sides(ah_norm: f64, h: &[f64], support: &[usize], k: usize, rho: f64, tau: f64) -> (f64, f64) {
    let mut in_s = vec![false; h.len()];
    for &i in support {
        in_s[i] = true;
    }
    let lhs = support.iter().map(|&i| h[i] * h[i]).sum::<f64>().sqrt();
    let off: f64 = h.iter().zip(&in_s).filter(|(_, s)| !**s).map(|(v, _)| v.abs()).sum();
    let sk = (k as f64).sqrt();
    (lhs, rho / sk * off + tau / sk * ah_norm)
}

/// Samples `h` and supports `|S| ≤ k` and checks the ℓ2 robust null space
/// inequality `‖h_S‖₂ ≤ (ρ/√k)‖h_{S^c}‖₁ + (τ/√k)‖Ah‖₂`.
///
/// Each trial draws one `h` (alternating Gaussian vectors, projections of
/// sparse vectors onto the null space of `A`, and sparse-plus-null-space
/// mixtures) and evaluates it on its top-k support, which maximizes the gap,
/// and on one random support.
pub fn rnsp_check(a: &DMatrix<f64>, k: usize, rho: f64, tau: f64, trials: usize, seed: u64) -> RnspReport {
    let n = a.ncols();
    let design = Design::new(a.clone());
    let pinv = PseudoInverse::new(&design);
    let null_project = |v: &DVector<f64>| v - pinv.apply(&design, &design.apply(v));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = RnspReport {
        k,
        rho,
        tau,
        pairs: 0,
        violations: 0,
        worst_margin: f64::NEG_INFINITY,
        first_violation: None,
    };
    let k_eff = k.min(n);
    for trial in 0..trials {
        let gauss = |rng: &mut ChaCha8Rng| DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let sparse = |rng: &mut ChaCha8Rng| {
            let mut v = DVector::zeros(n);
            for _ in 0..k_eff.max(1) {
                v[rng.random_range(0..n)] = StandardNormal.sample(rng);
            }
            v
        };
        let h = match trial % 3 {
            0 => gauss(&mut rng),
            1 => null_project(&sparse(&mut rng)),
            _ => {
                let s = sparse(&mut rng);
                let scale: f64 = rng.random_range(0.0..1.0);
                null_project(&s) + s * scale
            }
        };
        let ah = design.apply(&h).norm();
        let hs = h.as_slice();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| hs[j].abs().total_cmp(&hs[i].abs()).then(i.cmp(&j)));
        let top: Vec<usize> = order[..k_eff].to_vec();
        let size = rng.random_range(0..=k_eff);
        let random: Vec<usize> = rand::seq::index::sample(&mut rng, n, size).into_vec();
        for support in [top, random] {
            let (lhs, rhs) = rnsp_sides(ah, hs, &support, k, rho, tau);
            report.pairs += 1;
            // relative slack for rounding in the two sides
            let margin = lhs - rhs;
            report.worst_margin = report.worst_margin.max(margin);
            if margin > 1e-12 * (lhs + rhs + l1_norm(hs)) {
                report.violations += 1;
                if report.first_violation.is_none() {
                    report.first_violation = Some(RnspViolation { support, lhs, rhs });
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nu_values() {
        assert!((nu(1.5) - (0.75f64.sqrt() - 0.5)).abs() < 1e-15);
        assert!((nu(1.5) - 0.366_025_403_784_438_6).abs() < 1e-15);
        for t in [4.0 / 3.0, 1.5, 2.0, 4.0, 10.0] {
            assert!(nu(t) > 0.0 && nu(t) < 0.5);
        }
    }

    #[test]
    fn rip_order_rounds_up() {
        assert_eq!(rip_order(1.5, 3), 5);
        assert_eq!(rip_order(4.0 / 3.0, 3), 4);
        assert_eq!(rip_order(2.0, 2), 4);
        assert_eq!(rip_order(1.5, 2), 3);
    }

    #[test]
    fn certificate_rejects_out_of_range() {
        assert!(certificate(1.2, 3, 0.1, 1, 0.1).is_err());
        assert!(certificate(1.5, 0, 0.1, 1, 0.1).is_err());
        assert!(certificate(1.5, 3, 1.0, 1, 0.1).is_err());
        assert!(certificate(1.5, 3, 0.1, 1, 1.0).is_err());
        assert!(certificate(1.5, 3, 0.1, 0, 0.1).is_err());
    }

    #[test]
    fn invalid_beyond_delta_limit() {
        let c = certificate(1.5, 3, 0.58, 1, 0.0).unwrap();
        assert!(!c.valid);
        let c = certificate(1.5, 3, 0.9, 1, 0.0).unwrap();
        assert!(!c.valid);
        assert!(c.a.is_nan());
        assert!(error_bounds(&c, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn reproduces_reported_constants() {
        let c = certificate(1.5, 3, 0.4, 1, 0.15).unwrap();
        assert!((c.rho - 0.6551).abs() < 5e-5);
        assert!((c.mu_max - 0.2084).abs() < 5e-5);
        // 40-digit evaluation of the same chain
        assert!((c.rho - 0.655_103_925_972_996_7).abs() < 1e-14);
        assert!((c.tau - 3.808_427_438_755_752).abs() < 1e-12);
        assert!((c.mu_max - 0.208_383_333_888_986_5).abs() < 1e-14);
        assert!((c.mu_det_max - 0.172_448_037_013_501_7).abs() < 1e-14);
        assert!((c.big_c - 62.670_884_595_872_91).abs() < 1e-9);
        assert!((c.big_d - 288.413_933_119_885_1).abs() < 1e-8);
        assert!(c.valid);
    }

    #[test]
    fn mu_below_mu_max_can_still_fail() {
        // 0.2 < mu_max but the denominator of C is negative
        let c = certificate(1.5, 3, 0.4, 1, 0.2).unwrap();
        assert!(c.mu < c.mu_max);
        assert!((c.det + 0.068_879_907_466_245_85).abs() < 1e-14);
        assert!(!c.valid);
        assert!(error_bounds(&c, 0.0, 0.01, 1.0).is_err());
    }

    #[test]
    fn error_bounds_chain() {
        let c = certificate(1.5, 3, 0.4, 1, 0.15).unwrap();
        assert_eq!(error_bounds(&c, 0.0, 0.0, 1.5).unwrap(), ErrorBounds { bound_l1: 0.0, bound_lp: 0.0 });
        let e = error_bounds(&c, 0.0, 0.01, 2.0).unwrap();
        assert!((e.bound_l1 - c.big_d * 0.01).abs() < 1e-12);
        let at_one = error_bounds(&c, 0.3, 0.01, 1.0).unwrap();
        assert!(at_one.bound_lp >= at_one.bound_l1);
        let expected = (1.0 + c.rho) * c.big_c * 0.3 + ((1.0 + c.rho) * c.big_d + 2.0 * c.tau) * 0.01;
        assert!((at_one.bound_lp - expected).abs() < 1e-12);
    }

    #[test]
    fn delta_bound_round_trip() {
        let d = delta_bound_from_mu(1.5, 0.2, 1).unwrap();
        assert!((d - 0.362_522_262_049_299_9).abs() < 1e-14);
        assert!((delta_bound_from_mu(1.5, 0.0, 1).unwrap() - delta_limit(1.5)).abs() < 1e-15);
        // binary search for the validity edge
        let (mut lo, mut hi) = (0.0, 0.99);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if certificate(1.5, 3, mid, 1, 0.2).unwrap().valid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - d).abs() < 1e-9);
        assert!(certificate(1.5, 3, d - 1e-6, 1, 0.2).unwrap().valid);
        assert!(!certificate(1.5, 3, d + 1e-6, 1, 0.2).unwrap().valid);
        for g in [1, 4, 9] {
            for mu in [0.01, 0.05, 0.1] {
                let d = delta_bound_from_mu(2.0, mu, g).unwrap();
                if d > 1e-6 {
                    assert!(certificate(2.0, 2, d - 1e-7, g, mu).unwrap().valid);
                }
            }
        }
    }

    #[test]
    fn theta_ranges_and_monotone_rho() {
        for t in [4.0 / 3.0, 1.5, 2.0, 4.0] {
            let (t1, t2, _) = thetas(t, nu(t));
            assert!(t1 > 0.0 && t1 < 0.25);
            assert!(t2 > 0.25 && t2 < 0.5);
            let limit = delta_limit(t);
            let mut prev = -1.0;
            for i in 0..50 {
                let d = limit * i as f64 / 50.0;
                let c = certificate(t, 2, d, 1, 0.0).unwrap();
                assert!(c.a > 0.0 && c.rho < 1.0 && c.rho > prev);
                prev = c.rho;
            }
        }
        let c1 = certificate(2.0, 2, 0.3, 1, 0.0).unwrap();
        let c4 = certificate(2.0, 2, 0.3, 4, 0.0).unwrap();
        assert!((c1.mu_max / c4.mu_max - 2.0).abs() < 1e-14);
    }

    #[test]
    fn combinations_enumerate_everything() {
        let mut c = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut c, 6) {
            count += 1;
        }
        assert_eq!(count, 20);
        assert_eq!(binomial(125, 4), 9_691_375);
        assert_eq!(binomial(5, 7), 0);
    }

    #[test]
    fn exact_rip_fixtures() {
        let id = DMatrix::<f64>::identity(5, 5);
        for k in 1..=5 {
            assert!(exact_rip(&id, k).unwrap().delta_k.abs() < 1e-15);
        }
        let dup = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let est = exact_rip(&dup, 2).unwrap();
        assert!((est.delta_k - 1.0).abs() < 1e-15);
        assert_eq!(est.argmax_support, vec![0, 1]);
        assert!(matches!(
            exact_rip_with_limit(&DMatrix::<f64>::identity(10, 10), 5, 100),
            Err(Error::CombinatorialLimit { count: 252, .. })
        ));
    }

    #[test]
    fn exact_rip_matches_naive_enumeration() {
        let a = DMatrix::from_fn(4, 7, |i, j| ((i * 5 + j * 3) % 7) as f64 / 7.0 - 0.3);
        let gram = a.tr_mul(&a);
        for k in 1..=4 {
            let mut c: Vec<usize> = (0..k).collect();
            let mut best = f64::NEG_INFINITY;
            loop {
                let sub = DMatrix::from_fn(k, k, |i, j| gram[(c[i], c[j])]);
                let ev = sub.symmetric_eigenvalues();
                best = best.max((ev.max() - 1.0).max(1.0 - ev.min()));
                if !next_combination(&mut c, 7) {
                    break;
                }
            }
            let est = exact_rip(&a, k).unwrap();
            assert!((est.delta_k - best).abs() < 1e-12);
            assert!((support_delta(&gram, &est.argmax_support) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn rnsp_trivial_cases() {
        let (lhs, rhs) = rnsp_sides(0.0, &[0.0; 4], &[0, 1], 2, 0.5, 1.0);
        assert_eq!((lhs, rhs), (0.0, 0.0));
        let id = DMatrix::<f64>::identity(6, 6);
        // ‖h_S‖₂ ≤ ‖h‖₂ = (√k/√k)‖Ah‖₂
        let report = rnsp_check(&id, 2, 0.1, 2f64.sqrt(), 300, 5);
        assert_eq!(report.violations, 0);
        assert_eq!(report.pairs, 600);
    }
}
