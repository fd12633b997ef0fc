//! Independent oracles and fixture generators shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use scalevec::{Embedding, Matrix, Vocabulary};

/// Words named `w0`, `w1`, ... with strictly decreasing counts.
pub fn vocab_of(v: usize) -> Arc<Vocabulary> {
    let entries = (0..v).map(|i| (letters("w", i), (v - i) as u64 + 1)).collect();
    Arc::new(Vocabulary::try_from_entries(entries).unwrap())
}

/// `prefix` followed by `i` spelled in base 26 with letters, so cleaned text
/// keeps the word intact.
pub fn letters(prefix: &str, mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (i % 26) as u8);
        i /= 26;
        if i == 0 {
            break;
        }
    }
    s.reverse();
    format!("{prefix}{}", String::from_utf8(s).unwrap())
}

/// Entries uniform on `[-1, 1)`, no zero rows.
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn random_embedding(rng: &mut ChaCha8Rng, v: usize, n: usize) -> Embedding {
    let data = (0..v * n).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    Embedding::new(vocab_of(v), Matrix::from_vec(v, n, data), None, None).unwrap()
}

fn ln_sigmoid(x: f64) -> f64 {
    -(1.0 + (-x).exp()).ln()
}

/// Negative-sampling loss written out directly from its definition.
pub fn ns_loss(
    input: &Matrix<f64>,
    output: &Matrix<f64>,
    target: usize,
    context: &[usize],
    negatives: &[usize],
) -> f64 {
    let n = input.cols();
    let mut h = vec![0.0; n];
    for &c in context {
        for (acc, x) in h.iter_mut().zip(input.row(c)) {
            *acc += x / context.len() as f64;
        }
    }
    let dot = |r: &[f64]| r.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
    let mut loss = -ln_sigmoid(dot(output.row(target)));
    for &j in negatives {
        loss -= ln_sigmoid(-dot(output.row(j)));
    }
    loss
}

/// Central differences of [`ns_loss`] for every entry of both matrices.
pub fn numeric_gradients(
    input: &Matrix<f64>,
    output: &Matrix<f64>,
    target: usize,
    context: &[usize],
    negatives: &[usize],
    step: f64,
) -> (Matrix<f64>, Matrix<f64>) {
    let mut gi = Matrix::zeros(input.rows(), input.cols());
    let mut go = Matrix::zeros(output.rows(), output.cols());
    let mut x = input.clone();
    for k in 0..x.as_slice().len() {
        let orig = x.as_slice()[k];
        x.as_mut_slice()[k] = orig + step;
        let up = ns_loss(&x, output, target, context, negatives);
        x.as_mut_slice()[k] = orig - step;
        let down = ns_loss(&x, output, target, context, negatives);
        x.as_mut_slice()[k] = orig;
        gi.as_mut_slice()[k] = (up - down) / (2.0 * step);
    }
    let mut y = output.clone();
    for k in 0..y.as_slice().len() {
        let orig = y.as_slice()[k];
        y.as_mut_slice()[k] = orig + step;
        let up = ns_loss(input, &y, target, context, negatives);
        y.as_mut_slice()[k] = orig - step;
        let down = ns_loss(input, &y, target, context, negatives);
        y.as_mut_slice()[k] = orig;
        go.as_mut_slice()[k] = (up - down) / (2.0 * step);
    }
    (gi, go)
}

/// `|a - n| / max(|a|, |n|)`, zero when both vanish.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            let scale = a.abs().max(n.abs());
            if scale < 1e-8 {
                (a - n).abs()
            } else {
                (a - n).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// One random gradient-check instance: (input, output, target, context, negatives).
pub type GradCase = (Matrix<f64>, Matrix<f64>, usize, Vec<usize>, Vec<usize>);

/// V in 2..=10, N in 1..=8, n in 0..=5, 1 to 4 context words.
pub fn random_grad_case(rng: &mut ChaCha8Rng) -> GradCase {
    let v = rng.random_range(2..=10);
    let n = rng.random_range(1..=8);
    let neg = rng.random_range(0..=5);
    let input = random_matrix(rng, v, n);
    let output = random_matrix(rng, v, n);
    let target = rng.random_range(0..v);
    let context = (0..rng.random_range(1..=4)).map(|_| rng.random_range(0..v)).collect();
    let negatives = (0..neg)
        .map(|_| loop {
            let j = rng.random_range(0..v);
            if j != target {
                break j;
            }
        })
        .collect();
    (input, output, target, context, negatives)
}

/// 3CosAdd by enumeration: cosine of every candidate with `b - a + c` on
/// unit vectors, first maximum wins.
pub fn brute_force_analogy(e: &Embedding, a: u32, b: u32, c: u32, restrict_k: usize) -> Option<u32> {
    let k = restrict_k.min(e.len());
    if [a, b, c].iter().any(|&x| x as usize >= k) {
        return None;
    }
    let unit = |id: u32| -> Vec<f64> {
        let r = e.input().row(id as usize);
        let norm = r.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        r.iter().map(|&x| x as f64 / norm).collect()
    };
    let (ua, ub, uc) = (unit(a), unit(b), unit(c));
    let q: Vec<f64> = (0..e.dim()).map(|i| ub[i] - ua[i] + uc[i]).collect();
    let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut best: Option<(u32, f64)> = None;
    for w in 0..k as u32 {
        if w == a || w == b || w == c {
            continue;
        }
        let uw = unit(w);
        let cos = uw.iter().zip(&q).map(|(x, y)| x * y).sum::<f64>() / qn;
        if best.is_none_or(|(_, s)| cos > s) {
            best = Some((w, cos));
        }
    }
    best.map(|(w, _)| w)
}

/// Full sort of every other word by cosine, ties by id.
pub fn brute_force_top_n(e: &Embedding, center: u32, n: usize) -> Vec<u32> {
    let row = |id: u32| e.input().row(id as usize).iter().map(|&x| x as f64).collect::<Vec<_>>();
    let c = row(center);
    let cn = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut all: Vec<(u32, f64)> = (0..e.len() as u32)
        .filter(|&w| w != center)
        .map(|w| {
            let r = row(w);
            let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            (w, c.iter().zip(&r).map(|(x, y)| x * y).sum::<f64>() / (cn * rn))
        })
        .collect();
    all.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
    all.into_iter().take(n).map(|(w, _)| w).collect()
}

/// A synthetic corpus with two planted analogy relations at different lags.
///
/// Relation `adjacent`: `a_i` sits between identity word `c_i` and role word
/// `p`; its partner `b_i` sits between `c_i` and `q`. Relation `distant`:
/// `x_j` has role word `r` 20 positions to its left and identity `e_j` 20
/// positions to its right; its partner `y_j` uses role `u` instead. Every
/// other position is uniform filler.
pub struct PlantedCorpus {
    pub tokens: Vec<String>,
    pub questions: String,
}

pub const PLANTED_LAG: usize = 20;

pub fn planted_corpus(target_tokens: usize, pairs: usize, fillers: usize, seed: u64) -> PlantedCorpus {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler: Vec<String> = (0..fillers).map(|i| letters("f", i)).collect();
    let word = |p: &str, i: usize| letters(p, i);
    let mut tokens: Vec<String> = Vec::with_capacity(target_tokens + 128);
    let mut seg = Vec::new();

    while tokens.len() < target_tokens {
        let kind = rng.random_range(0..10);
        seg.clear();
        if kind < 4 {
            seg.extend((0..48).map(|_| filler[rng.random_range(0..fillers)].clone()));
            let i = rng.random_range(0..pairs);
            let (w, role) = if rng.random_bool(0.5) {
                (word("pa", i), "pp")
            } else {
                (word("pb", i), "pq")
            };
            seg[23] = word("pc", i);
            seg[24] = w;
            seg[25] = role.to_owned();
        } else if kind < 8 {
            let len = 2 * PLANTED_LAG + 24;
            seg.extend((0..len).map(|_| filler[rng.random_range(0..fillers)].clone()));
            let j = rng.random_range(0..pairs);
            let (w, role) = if rng.random_bool(0.5) {
                (word("dx", j), "dr")
            } else {
                (word("dy", j), "du")
            };
            let mid = 12 + PLANTED_LAG;
            seg[mid - PLANTED_LAG] = role.to_owned();
            seg[mid] = w;
            seg[mid + PLANTED_LAG] = word("de", j);
        } else {
            seg.extend((0..48).map(|_| filler[rng.random_range(0..fillers)].clone()));
        }
        tokens.append(&mut seg);
    }

    let mut questions = String::new();
    for (name, left, right) in [("adjacent", "pa", "pb"), ("distant", "dx", "dy")] {
        questions.push_str(&format!(": {name}\n"));
        for i in 0..pairs {
            for j in 0..pairs {
                if i != j {
                    questions.push_str(&format!(
                        "{} {} {} {}\n",
                        word(left, i),
                        word(right, i),
                        word(left, j),
                        word(right, j)
                    ));
                }
            }
        }
    }
    PlantedCorpus { tokens, questions }
}

/// Deterministic Zipf-like English-looking text of roughly `bytes` bytes.
pub fn synthetic_text(bytes: usize, seed: u64) -> String {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<String> = (0..3000).map(|i| letters("t", i)).collect();
    let weights: Vec<f64> = (1..=words.len()).map(|r| 1.0 / r as f64).collect();
    let dist = rand::distr::weighted::WeightedIndex::new(&weights).unwrap();
    let mut out = String::with_capacity(bytes + 16);
    let punct = [". ", ", ", " ", " ", " ", " ", " 19 ", " "];
    while out.len() < bytes {
        out.push_str(&words[rng.sample(&dist)]);
        out.push_str(punct[rng.random_range(0..punct.len())]);
    }
    out
}
