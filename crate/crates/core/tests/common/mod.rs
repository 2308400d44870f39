//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the solver; every formula is written out independently.

#![allow(dead_code)]

use rand::Rng;

pub fn bern_kl(p: f64, q: f64) -> f64 {
    let a = if p > 0.0 { p * (p / q).ln() } else { 0.0 };
    let b = if p < 1.0 {
        (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
    } else {
        0.0
    };
    a + b
}

pub fn gauss_kl_same_var(m1: f64, m2: f64, var: f64) -> f64 {
    (m1 - m2) * (m1 - m2) / (2.0 * var)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Gaussian,
    Bernoulli,
}

/// Cost of moving arm `(mean, var)` to `x`; `reversed` selects `KL(x || mean)`.
pub fn move_cost(family: Family, mean: f64, var: f64, x: f64, reversed: bool) -> f64 {
    match family {
        Family::Gaussian => gauss_kl_same_var(mean, x, var),
        Family::Bernoulli => {
            if reversed {
                bern_kl(x, mean)
            } else {
                bern_kl(mean, x)
            }
        }
    }
}

/// Grid minimum of `f` over `[lo, hi]`, refined by golden section around
/// the best grid point.
pub fn grid_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).ceil() as usize;
    let (mut bx, mut bv) = (lo, f(lo));
    for i in 1..=n {
        let x = (lo + i as f64 * step).min(hi);
        let v = f(x);
        if v < bv {
            bx = x;
            bv = v;
        }
    }
    let (mut a, mut b) = ((bx - step).max(lo), (bx + step).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    if v < bv {
        (x, v)
    } else {
        (bx, bv)
    }
}

/// Inner transport cost by grid search, for arms `best` and `challenger`.
pub fn transport_oracle(
    family: Family,
    best: (f64, f64),
    challenger: (f64, f64),
    wb: f64,
    wj: f64,
    reversed: bool,
    step: f64,
) -> (f64, f64) {
    let lo = best.0.min(challenger.0);
    let hi = best.0.max(challenger.0);
    grid_min(
        |x| {
            let mut v = 0.0;
            if wb > 0.0 {
                v += wb * move_cost(family, best.0, best.1, x, reversed);
            }
            if wj > 0.0 {
                v += wj * move_cost(family, challenger.0, challenger.1, x, reversed);
            }
            v
        },
        lo,
        hi,
        step,
    )
}

/// Two-armed complexity by a grid over the first weight and an inner grid
/// over the common mean.
pub fn two_arm_gamma_oracle(
    family: Family,
    arms: [(f64, f64); 2],
    reversed: bool,
    weight_step: f64,
    inner_step: f64,
) -> (f64, f64) {
    let (b, j) = if arms[0].0 > arms[1].0 {
        (0, 1)
    } else {
        (1, 0)
    };
    let lo = arms[j].0;
    let hi = arms[b].0;
    let n = ((hi - lo) / inner_step).round() as usize;
    let xs: Vec<f64> = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect();
    let cb: Vec<f64> = xs
        .iter()
        .map(|&x| move_cost(family, arms[b].0, arms[b].1, x, reversed))
        .collect();
    let cj: Vec<f64> = xs
        .iter()
        .map(|&x| move_cost(family, arms[j].0, arms[j].1, x, reversed))
        .collect();
    let steps = (1.0 / weight_step).round() as usize;
    let mut best = (0.0, 0.0);
    for s in 1..steps {
        let w0 = s as f64 * weight_step;
        let w = [w0, 1.0 - w0];
        let v = cb
            .iter()
            .zip(&cj)
            .map(|(a, c)| w[b] * a + w[j] * c)
            .fold(f64::INFINITY, f64::min);
        if v > best.1 {
            best = (w0, v);
        }
    }
    (1.0 / best.1, best.0)
}

/// Closed-form Gaussian transport cost `Δ² / (2 (σ_b² / w_b + σ_j² / w_j))`.
pub fn gaussian_pair_cost(best: (f64, f64), challenger: (f64, f64), wb: f64, wj: f64) -> f64 {
    if wb <= 0.0 || wj <= 0.0 {
        return 0.0;
    }
    let gap = best.0 - challenger.0;
    gap * gap / (2.0 * (best.1 / wb + challenger.1 / wj))
}

/// Three-armed Gaussian complexity by a simplex grid.
pub fn three_arm_gaussian_gamma_oracle(arms: [(f64, f64); 3], step: f64) -> f64 {
    let b = (0..3)
        .max_by(|&i, &j| arms[i].0.partial_cmp(&arms[j].0).unwrap())
        .unwrap();
    let n = (1.0 / step).round() as usize;
    let mut best = 0.0f64;
    for i in 1..n {
        for j in 1..(n - i) {
            let w = [i as f64 * step, j as f64 * step, (n - i - j) as f64 * step];
            let f = (0..3)
                .filter(|&c| c != b)
                .map(|c| gaussian_pair_cost(arms[b], arms[c], w[b], w[c]))
                .fold(f64::INFINITY, f64::min);
            best = best.max(f);
        }
    }
    1.0 / best
}

/// Uniform point on the simplex (normalised exponentials).
pub fn random_simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Exact error probability of round-robin sampling on two Bernoulli arms
/// after `n` pulls, by enumerating all outcome sequences. The
/// recommendation is the empirical best with ties to arm 0 and unsampled
/// arms ranked last.
pub fn exact_uniform_error(p: [f64; 2], n: usize) -> f64 {
    let best = if p[0] > p[1] { 0 } else { 1 };
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let mut prob = 1.0;
        let mut counts = [0u32; 2];
        let mut sums = [0u32; 2];
        for t in 0..n {
            let arm = t % 2;
            let x = (mask >> t) & 1;
            prob *= if x == 1 { p[arm] } else { 1.0 - p[arm] };
            counts[arm] += 1;
            sums[arm] += x;
        }
        let mean = |a: usize| {
            if counts[a] == 0 {
                f64::NEG_INFINITY
            } else {
                sums[a] as f64 / counts[a] as f64
            }
        };
        let rec = if mean(1) > mean(0) { 1 } else { 0 };
        if rec != best {
            total += prob;
        }
    }
    total
}
