//! Independent oracles shared by the integration tests and the acceptance
//! suite. Nothing here calls into the library's own algorithms.

#![allow(dead_code)]

use ndarray::Array2;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("finite rational")
}

/// Exact imbalance quantities. `irlbl` is `None` for labels without positives.
pub struct ExactProfile {
    pub irlbl: Vec<Option<BigRational>>,
    pub mean_ir: BigRational,
    pub minority: Vec<bool>,
    pub b: Vec<Vec<BigRational>>,
    /// `None` marks an outlier entry.
    pub s: Vec<Vec<Option<BigRational>>>,
    pub epsilon: Vec<BigRational>,
    pub weights: Vec<BigRational>,
}

/// All-pairs neighbour lists from integer features: sort every other row by
/// (squared distance, index).
pub fn brute_neighbors(x: &[Vec<i64>], k: usize) -> Vec<Vec<usize>> {
    (0..x.len())
        .map(|i| {
            let mut others: Vec<(i64, usize)> = (0..x.len())
                .filter(|&j| j != i)
                .map(|j| (x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum(), j))
                .collect();
            others.sort();
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

pub fn exact_profile(x: &[Vec<i64>], y: &[Vec<u8>], k: usize) -> ExactProfile {
    let n = y.len();
    let q = y[0].len();
    let counts: Vec<i64> = (0..q).map(|j| y.iter().filter(|r| r[j] == 1).count() as i64).collect();
    let max = *counts.iter().max().unwrap();
    let irlbl: Vec<Option<BigRational>> = counts.iter().map(|&c| (c > 0).then(|| rat(max, c))).collect();
    let finite: Vec<&BigRational> = irlbl.iter().flatten().collect();
    let mean_ir = finite.iter().fold(BigRational::zero(), |a, &b| a + b) / BigRational::from_integer(BigInt::from(finite.len()));
    let minority: Vec<bool> = irlbl.iter().map(|r| r.as_ref().is_none_or(|r| *r > mean_ir)).collect();

    let nn = brute_neighbors(x, k);
    let b: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..q)
                .map(|j| {
                    if y[i][j] == 1 {
                        rat(nn[i].iter().filter(|&&m| y[m][j] == 0).count() as i64, k as i64)
                    } else {
                        BigRational::zero()
                    }
                })
                .collect()
        })
        .collect();
    let one = BigRational::one();
    let mut s = vec![vec![None; q]; n];
    for j in 0..q {
        let denom = (0..n).filter(|&i| b[i][j] < one).fold(BigRational::zero(), |a, i| a + &b[i][j]);
        for i in 0..n {
            s[i][j] = if b[i][j] == one {
                None
            } else if denom.is_zero() {
                Some(BigRational::zero())
            } else {
                Some(&b[i][j] / &denom)
            };
        }
    }
    let epsilon: Vec<BigRational> = (0..n)
        .map(|i| {
            (0..q)
                .filter(|&j| minority[j])
                .filter_map(|j| s[i][j].clone())
                .fold(BigRational::zero(), |a, v| a + v)
        })
        .collect();
    let weights = epsilon.iter().map(|e| e + &one).collect();
    ExactProfile {
        irlbl,
        mean_ir,
        minority,
        b,
        s,
        epsilon,
        weights,
    }
}

/// Random integer dataset with distinct rows (n <= 11 when d = 1) and at
/// least one positive entry.
pub fn random_int_dataset<R: Rng>(rng: &mut R, n: usize, d: usize, q: usize) -> (Vec<Vec<i64>>, Vec<Vec<u8>>) {
    let mut x: Vec<Vec<i64>> = Vec::new();
    while x.len() < n {
        let row: Vec<i64> = (0..d).map(|_| rng.random_range(-5..=5)).collect();
        if !x.contains(&row) {
            x.push(row);
        }
    }
    loop {
        let y: Vec<Vec<u8>> = (0..n).map(|_| (0..q).map(|_| u8::from(rng.random_bool(0.4))).collect()).collect();
        if y.iter().flatten().any(|&v| v == 1) {
            return (x, y);
        }
    }
}

pub fn to_arrays(x: &[Vec<i64>], y: &[Vec<u8>]) -> (Array2<f64>, Array2<u8>) {
    let (n, d, q) = (x.len(), x[0].len(), y[0].len());
    (
        Array2::from_shape_fn((n, d), |(i, j)| x[i][j] as f64),
        Array2::from_shape_fn((n, q), |(i, j)| y[i][j]),
    )
}

// ---------------------------------------------------------------- metrics

/// Per-label (tp, fp, fn) at `score >= threshold`.
pub fn confusion_oracle(scores: &[Vec<f64>], labels: &[Vec<u8>], threshold: f64) -> Vec<(i64, i64, i64)> {
    let q = labels[0].len();
    (0..q)
        .map(|j| {
            let mut c = (0, 0, 0);
            for (s, y) in scores.iter().zip(labels) {
                match (s[j] >= threshold, y[j] == 1) {
                    (true, true) => c.0 += 1,
                    (true, false) => c.1 += 1,
                    (false, true) => c.2 += 1,
                    (false, false) => {}
                }
            }
            c
        })
        .collect()
}

fn f1_exact(tp: i64, fp: i64, fn_: i64) -> BigRational {
    if 2 * tp + fp + fn_ == 0 {
        BigRational::one()
    } else {
        rat(2 * tp, 2 * tp + fp + fn_)
    }
}

pub fn macro_f_oracle(scores: &[Vec<f64>], labels: &[Vec<u8>], threshold: f64) -> BigRational {
    let c = confusion_oracle(scores, labels, threshold);
    let sum = c.iter().fold(BigRational::zero(), |a, &(tp, fp, fn_)| a + f1_exact(tp, fp, fn_));
    sum / BigRational::from_integer(BigInt::from(c.len()))
}

pub fn micro_f_oracle(scores: &[Vec<f64>], labels: &[Vec<u8>], threshold: f64) -> BigRational {
    let (tp, fp, fn_) = confusion_oracle(scores, labels, threshold)
        .into_iter()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    f1_exact(tp, fp, fn_)
}

/// Pair-counting AUC per label; `None` when no label has both classes.
pub fn macro_auc_oracle(scores: &[Vec<f64>], labels: &[Vec<u8>]) -> Option<BigRational> {
    let q = labels[0].len();
    let mut aucs = Vec::new();
    for j in 0..q {
        let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, y)| y[j] == 1).map(|(s, _)| s[j]).collect();
        let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, y)| y[j] == 0).map(|(s, _)| s[j]).collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        let mut halves = 0i64;
        for &p in &pos {
            for &m in &neg {
                halves += if p > m { 2 } else if p == m { 1 } else { 0 };
            }
        }
        aucs.push(rat(halves, 2 * (pos.len() * neg.len()) as i64));
    }
    if aucs.is_empty() {
        return None;
    }
    let k = aucs.len();
    Some(aucs.into_iter().fold(BigRational::zero(), |a, v| a + v) / BigRational::from_integer(BigInt::from(k)))
}

pub fn ranking_loss_oracle(scores: &[Vec<f64>], labels: &[Vec<u8>]) -> BigRational {
    let mut total = BigRational::zero();
    let mut counted = 0i64;
    for (s, y) in scores.iter().zip(labels) {
        let mut halves = 0i64;
        let mut pairs = 0i64;
        for a in 0..y.len() {
            for b in 0..y.len() {
                if y[a] == 1 && y[b] == 0 {
                    pairs += 1;
                    halves += if s[a] < s[b] { 2 } else if s[a] == s[b] { 1 } else { 0 };
                }
            }
        }
        if pairs > 0 {
            total += rat(halves, 2 * pairs);
            counted += 1;
        }
    }
    if counted == 0 {
        BigRational::zero()
    } else {
        total / BigRational::from_integer(BigInt::from(counted))
    }
}

pub fn hamming_oracle(scores: &[Vec<f64>], labels: &[Vec<u8>], threshold: f64) -> BigRational {
    let mut wrong = 0i64;
    let mut total = 0i64;
    for (s, y) in scores.iter().zip(labels) {
        for (v, &t) in s.iter().zip(y) {
            total += 1;
            if (*v >= threshold) != (t == 1) {
                wrong += 1;
            }
        }
    }
    rat(wrong, total)
}

pub fn one_error_oracle(scores: &[Vec<f64>], labels: &[Vec<u8>]) -> BigRational {
    let mut wrong = 0i64;
    let mut counted = 0i64;
    for (s, y) in scores.iter().zip(labels) {
        if !y.contains(&1) {
            continue;
        }
        let best = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let top = s.iter().position(|&v| v == best).unwrap();
        counted += 1;
        if y[top] == 0 {
            wrong += 1;
        }
    }
    if counted == 0 {
        BigRational::zero()
    } else {
        rat(wrong, counted)
    }
}

/// Two-sided signed-rank p-value by enumerating every sign assignment of
/// the nonzero differences. Average ranks for tied magnitudes.
pub fn wilcoxon_enumeration(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    // Ranks doubled so that averages stay integral.
    let mut ranks2 = vec![0i64; n];
    for i in 0..n {
        let smaller = d.iter().filter(|v| v.abs() < d[i].abs()).count() as i64;
        let equal = d.iter().filter(|v| v.abs() == d[i].abs()).count() as i64;
        ranks2[i] = 2 * smaller + equal + 1;
    }
    let w_plus2: i64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks2[i]).sum();
    let total2: i64 = ranks2.iter().sum();
    let observed = w_plus2.min(total2 - w_plus2);
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: i64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks2[i]).sum();
        if w.min(total2 - w) <= observed {
            extreme += 1;
        }
    }
    let p = (extreme as f64 / (1u64 << n) as f64).min(1.0);
    (observed as f64 / 2.0, p)
}

pub fn close(a: &BigRational, b: f64, tol: f64) -> bool {
    (to_f64(a) - b).abs() <= tol
}

// ------------------------------------------------------------------ chain

/// Co-occurrence based label association with a zero diagonal.
pub fn adjacency_oracle(y: &[Vec<u8>]) -> Vec<Vec<f64>> {
    let q = y[0].len();
    let count = |a: usize, b: usize| y.iter().filter(|r| r[a] == 1 && r[b] == 1).count() as f64;
    (0..q)
        .map(|i| {
            (0..q)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    let co = count(i, j);
                    let part = |c: f64| if c > 0.0 { co / c } else { 0.0 };
                    0.5 * (part(count(i, i)) + part(count(j, j)))
                })
                .collect()
        })
        .collect()
}

/// Instances eligible after `sample` under the chain rule, before removing
/// already-selected ones. Empty when the sample has no positive label or
/// there is a single label.
pub fn chain_pool_oracle(y: &[Vec<u8>], sample: usize) -> Vec<usize> {
    let n = y.len();
    let q = y[0].len();
    if q < 2 {
        return Vec::new();
    }
    let counts: Vec<usize> = (0..q).map(|j| y.iter().filter(|r| r[j] == 1).count()).collect();
    let max = *counts.iter().max().unwrap() as f64;
    let ratio = |j: usize| if counts[j] == 0 { f64::INFINITY } else { max / counts[j] as f64 };
    let positives: Vec<usize> = (0..q).filter(|&j| y[sample][j] == 1).collect();
    let Some(&first) = positives.first() else {
        return Vec::new();
    };
    let anchor = positives.iter().copied().fold(first, |b, j| if ratio(j) > ratio(b) { j } else { b });
    let card = y.iter().flatten().filter(|&&v| v == 1).count() as f64 / n as f64;
    let take = (card.ceil() as usize).max(1).min(q - 1);
    let adj = adjacency_oracle(y);
    let mut others: Vec<usize> = (0..q).filter(|&j| j != anchor).collect();
    others.sort_by(|&a, &b| adj[anchor][b].partial_cmp(&adj[anchor][a]).unwrap().then(a.cmp(&b)));
    let related = &others[..take];
    (0..n).filter(|&i| related.iter().any(|&l| y[i][l] == 1)).collect()
}

/// Inverse-CDF draw over `candidates` (ascending) using one variate.
pub fn draw_oracle<R: Rng>(p: &[f64], candidates: &[usize], rng: &mut R) -> usize {
    let total: f64 = candidates.iter().map(|&i| p[i]).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for &i in candidates {
        acc += p[i];
        if u < acc {
            return i;
        }
    }
    *candidates.last().unwrap()
}

/// Replays a chained batch with the oracle pool rule.
pub fn chain_batch_oracle<R: Rng>(p: &[f64], y: &[Vec<u8>], batch: usize, rng: &mut R) -> Vec<usize> {
    let n = p.len();
    let mut taken = vec![false; n];
    let all = |taken: &[bool]| (0..n).filter(|&i| !taken[i]).collect::<Vec<_>>();
    let mut out = Vec::new();
    let mut prev = draw_oracle(p, &all(&taken), rng);
    taken[prev] = true;
    out.push(prev);
    while out.len() < batch {
        let pool: Vec<usize> = chain_pool_oracle(y, prev).into_iter().filter(|&i| !taken[i]).collect();
        let next = if pool.is_empty() {
            draw_oracle(p, &all(&taken), rng)
        } else {
            draw_oracle(p, &pool, rng)
        };
        taken[next] = true;
        out.push(next);
        prev = next;
    }
    out
}
