mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scalevec::analogy::{answer, eval_relation, load_questions, AnalogySolver, Answer};
use scalevec::neighbors::{
    build_catalog, cosine, detect_crossovers, top_n, write_curves_tsv, PeakScaleHistogram, SimilarityCurve,
    CATALOG_SIZES,
};
use scalevec::{CellKey, Embedding, Matrix, MemoryFamily, Vocabulary};

use common::*;

fn scaled(e: &Embedding, s: f32) -> Embedding {
    let data = e.input().as_slice().iter().map(|x| x * s).collect();
    Embedding::new(
        e.vocab_arc().clone(),
        Matrix::from_vec(e.len(), e.dim(), data),
        None,
        None,
    )
    .unwrap()
}

#[test]
fn analogy_matches_brute_force_on_fifty_words() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let e = random_embedding(&mut rng, 50, 8);
    let solver = AnalogySolver::new(&e, 50);
    for _ in 0..20 {
        let ids = rand::seq::index::sample(&mut rng, 50, 3).into_vec();
        let (a, b, c) = (ids[0] as u32, ids[1] as u32, ids[2] as u32);
        let got = match solver.answer_ids(a, b, c) {
            Answer::Word(w) => Some(w),
            Answer::Skip => None,
        };
        assert_eq!(got, brute_force_analogy(&e, a, b, c, 50));
    }
}

#[test]
fn planted_offsets_are_answered_perfectly() {
    // x_i = (e_i + p)/√2 and y_i = (e_i + q)/√2 over an orthonormal basis,
    // so y_i - x_i + x_j = y_j exactly
    let n = 10;
    let mut words = Vec::new();
    let mut data = vec![0.0f32; 16 * n];
    let h = std::f32::consts::FRAC_1_SQRT_2;
    for i in 0..8 {
        words.push((letters("x", i), 100 - 2 * i as u64));
        words.push((letters("y", i), 99 - 2 * i as u64));
        data[2 * i * n + i] = h;
        data[2 * i * n + 8] = h;
        data[(2 * i + 1) * n + i] = h;
        data[(2 * i + 1) * n + 9] = h;
    }
    let vocab = Arc::new(Vocabulary::try_from_entries(words).unwrap());
    let e = Embedding::new(vocab, Matrix::from_vec(16, n, data), None, None).unwrap();

    let mut text = String::from(": planted\n");
    for i in 0..8 {
        for j in 0..8 {
            if i != j {
                text += &format!(
                    "{} {} {} {}\n",
                    letters("x", i),
                    letters("y", i),
                    letters("x", j),
                    letters("y", j)
                );
            }
        }
    }
    text += "xa yb zzz yc\n";
    let suite = load_questions(text.as_bytes()).unwrap();
    let solver = AnalogySolver::new(&e, 30_000);
    let score = eval_relation(&suite.relations[0], &solver);
    assert_eq!(score.skipped, 1);
    assert_eq!(score.answered, 56);
    assert_eq!(score.accuracy(), Some(1.0));
}

#[test]
fn all_skipped_relation_has_undefined_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let e = random_embedding(&mut rng, 10, 4);
    let suite = load_questions(": none\nqq rr ss tt\nwa wb wc zz\n".as_bytes()).unwrap();
    let score = eval_relation(&suite.relations[0], &AnalogySolver::new(&e, 10));
    assert_eq!((score.answered, score.skipped, score.correct), (0, 2, 0));
    assert_eq!(score.accuracy(), None);
}

#[test]
fn top_n_matches_full_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..40 {
        let v = rng.random_range(2..=200);
        let dim = rng.random_range(1..10);
        let e = random_embedding(&mut rng, v, dim);
        let center = rng.random_range(0..v as u32);
        let n = rng.random_range(1..=v + 3);
        let got: Vec<u32> = top_n(e.vocab().word(center), &e, n)
            .unwrap()
            .iter()
            .map(|x| x.id)
            .collect();
        assert_eq!(got, brute_force_top_n(&e, center, n));
        assert_eq!(got.len(), n.min(v - 1));
    }
}

#[test]
fn unknown_center_is_named() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let e = random_embedding(&mut rng, 5, 3);
    let err = top_n("missingword", &e, 3).unwrap_err();
    assert!(err.to_string().contains("missingword"));
}

fn random_family(rng: &mut ChaCha8Rng, betas: Vec<u32>, replicas: u32, v: usize) -> MemoryFamily {
    let mut fam = MemoryFamily::new(betas.clone(), replicas);
    for b in betas {
        for r in 0..replicas {
            fam.insert(CellKey::new(b, r), random_embedding(rng, v, 6));
        }
    }
    fam
}

#[test]
fn catalogs_grow_with_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let fam = random_family(&mut rng, vec![1, 2, 4, 8], 2, 150);
    let center = letters("w", 3);
    let mut last = 0;
    for n in CATALOG_SIZES {
        let cat = build_catalog(&center, &fam, n).unwrap();
        assert!(cat.len() >= last);
        assert!(cat.len() <= 4 * n);
        for (_, list) in &cat.per_scale {
            assert_eq!(list.len(), n);
            assert!(list.windows(2).all(|w| w[0].similarity >= w[1].similarity));
            assert!(list.iter().all(|nb| nb.word != center));
            assert!(list.iter().all(|nb| cat.union.contains(&nb.word)));
        }
        last = cat.len();
    }
}

#[test]
fn curve_tsv_has_a_row_per_scale() {
    let c = SimilarityCurve::from_replicas(
        "italy",
        "rome",
        vec![1, 2],
        vec![vec![Some(0.5), Some(0.7)], vec![None, None]],
    );
    assert_eq!(c.mean[0], Some(0.6));
    assert!((c.stddev[0].unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(c.replica_peak(1), Some(1));
    let mut out = Vec::new();
    write_curves_tsv(&[c], &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.ends_with("italy\trome\t2\tNA\tNA\n"));
}

fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| letters("n", i)).collect()
}

proptest! {
    #[test]
    fn cosine_is_symmetric_bounded_and_scale_free(
        u in prop::collection::vec(-10.0f32..10.0, 1..16),
        seed in any::<u64>(),
        s in 0.01f32..100.0,
    ) {
        prop_assume!(u.iter().any(|&x| x != 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f32> = u.iter().map(|_| rng.random_range(-10.0..10.0)).collect();
        prop_assume!(v.iter().any(|&x| x != 0.0));
        let c = cosine(&u, &v).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert_eq!(c, cosine(&v, &u).unwrap());
        let su: Vec<f32> = u.iter().map(|x| x * s).collect();
        prop_assert!((cosine(&su, &v).unwrap() - c).abs() < 1e-5);
    }

    #[test]
    fn analogy_answers_are_scale_invariant_and_exclude_the_query(seed in any::<u64>(), s in 0.05f32..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = rng.random_range(4..60);
        let dim = rng.random_range(2..10);
        let e = random_embedding(&mut rng, v, dim);
        let big = scaled(&e, s);
        for _ in 0..10 {
            let ids = rand::seq::index::sample(&mut rng, v, 3).into_vec();
            let w: Vec<&str> = ids.iter().map(|&i| e.vocab().word(i as u32)).collect();
            let got = answer(w[0], w[1], w[2], &e, v);
            prop_assert!(got.as_deref().is_some_and(|g| !w.contains(&g)));
            prop_assert_eq!(got, answer(w[0], w[1], w[2], &big, v));
        }
    }

    #[test]
    fn no_crossover_means_same_order(
        seed in any::<u64>(),
        curves in 2usize..5,
        len in 2usize..12,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let betas: Vec<u32> = (1..=len as u32).collect();
        let names = words(curves);
        // coarse values so exact ties occur
        let cs: Vec<SimilarityCurve> = names
            .iter()
            .map(|w| {
                let v = betas.iter().map(|_| rng.random_range(-4..=4) as f64 / 4.0).collect();
                SimilarityCurve::from_values("c", w, betas.clone(), v)
            })
            .collect();
        let events = detect_crossovers(&cs).unwrap();
        for i in 0..curves {
            for j in i + 1..curves {
                let d: Vec<f64> = (0..len).map(|k| cs[i].mean[k].unwrap() - cs[j].mean[k].unwrap()).collect();
                let pair: Vec<_> = events
                    .iter()
                    .filter(|e| e.first == names[i] && e.second == names[j])
                    .collect();
                // strict sign changes of the nonzero subsequence
                let signs: Vec<f64> = d.iter().filter(|x| **x != 0.0).map(|x| x.signum()).collect();
                let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
                prop_assert_eq!(pair.len(), flips);
                for k in 0..len - 1 {
                    let lo = betas[k];
                    if d[k] != 0.0 && d[k + 1] != 0.0 && !pair.iter().any(|e| e.beta_lo == lo) {
                        prop_assert_eq!(d[k].signum(), d[k + 1].signum());
                    }
                }
                for e in &pair {
                    prop_assert_eq!(betas.iter().position(|&b| b == e.beta_hi).unwrap(),
                        betas.iter().position(|&b| b == e.beta_lo).unwrap() + 1);
                }
            }
        }
    }

    #[test]
    fn every_member_is_binned_once(peaks in prop::collection::vec(prop::option::of(1u32..=20), 1..80)) {
        prop_assume!(peaks.iter().any(Option::is_some));
        let h = PeakScaleHistogram::from_peaks("c", (1..=20).collect(), peaks.clone()).unwrap();
        prop_assert_eq!(h.total(), peaks.iter().flatten().count());
        prop_assert!((h.fractions.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(h.fractions.iter().all(|&f| f >= 0.0));
    }
}
