mod common;

use ndarray::{Array1, Array2};
use novelty_core::feature_store::{read_pack, write_pack};
use novelty_core::fisher::{
    fisher_gram, fisher_kernel, fisher_score, fisher_vector, fvmrf_novelty, whiten_score,
    MrfReference,
};
use novelty_core::gmm::fit_gmm_traced;
use novelty_core::imgfeat::{
    extract_compositional, saliency::spectral_saliency, IDX_BRIGHT_HIST, IDX_HUE_HIST,
    IDX_SAT_HIST, N_FEATURES,
};
use novelty_core::netmet::TemporalGraph;
use novelty_core::pipeline::build_schedule_with;
use novelty_core::stats::{mann_whitney_u, pca2d, pearson};
use novelty_core::{FeaturePack, FitConfig, Follow, RasterImage, Snapshot, TagLedger, Timestamp};
use proptest::prelude::*;
use rand::Rng;

use common::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// A random mixture and a point near one of its components.
fn model_case(seed: u64, max_n: usize, max_d: usize) -> (Params, Vec<f64>) {
    let mut r = rng(seed);
    let n = r.random_range(1..=max_n);
    let d = r.random_range(1..=max_d);
    let p = Params::random(&mut r, n, d);
    let k = r.random_range(0..n);
    let x = (0..d)
        .map(|j| p.means[k][j] + p.sigmas[k][j] * 2.0 * normal(&mut r))
        .collect();
    (p, x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fisher_vector_is_whitened_score(seed in any::<u64>()) {
        let (p, x) = model_case(seed, 4, 6);
        let gm = p.to_mixture();
        let x = Array1::from(x);
        let fv = fisher_vector(&gm, x.view()).unwrap();
        let whitened = whiten_score(&gm, &fisher_score(&gm, x.view()).unwrap()).unwrap();
        let oracle = fisher_vector_oracle(&p, x.as_slice().unwrap());
        prop_assert_eq!(fv.len(), 2 * p.n() * p.d());
        prop_assert!(rel_error(fv.values(), &whitened) < 1e-12);
        prop_assert!(rel_error(fv.values(), &oracle) < 1e-12);
    }

    #[test]
    fn fisher_score_matches_finite_differences(seed in any::<u64>()) {
        let (p, x) = model_case(seed, 3, 4);
        let gm = p.to_mixture();
        let analytic = fisher_score(&gm, Array1::from(x.clone()).view()).unwrap();
        prop_assert!(rel_error(&analytic, &fd_score(&p, &x)) < 1e-4);
    }

    #[test]
    fn self_kernel_is_squared_norm(seed in any::<u64>()) {
        let (p, x) = model_case(seed, 4, 5);
        let gm = p.to_mixture();
        let x = Array1::from(x);
        let k = fisher_kernel(&gm, x.view(), x.view()).unwrap();
        let norm = fisher_vector(&gm, x.view()).unwrap().norm();
        prop_assert!(close(k, norm * norm, 1e-12));
    }

    #[test]
    fn gram_matrix_is_psd(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = Params::random(&mut r, 2, 3);
        let pts = p.sample(&mut r, 12);
        let gram = fisher_gram(&p.to_mixture(), pts.view()).unwrap();
        let scale = (0..12).map(|i| gram[[i, i]]).fold(1.0f64, f64::max);
        prop_assert!(jacobi_eigenvalues(&gram)[0] >= -1e-10 * scale);
    }

    #[test]
    fn log_pdf_matches_direct_evaluation(seed in any::<u64>()) {
        let (p, x) = model_case(seed, 4, 6);
        let got = p.to_mixture().log_pdf(Array1::from(x.clone()).view()).unwrap();
        prop_assert!(close(got, log_density(&p, &x), 1e-12));
    }

    #[test]
    fn fvgmm_norm_ignores_component_order(seed in any::<u64>()) {
        let (p, x) = model_case(seed, 4, 4);
        let gm = p.to_mixture();
        let order: Vec<usize> = (0..p.n()).rev().collect();
        let x = Array1::from(x);
        let a = fisher_vector(&gm, x.view()).unwrap().norm();
        let b = fisher_vector(&gm.permuted(&order).unwrap(), x.view()).unwrap().norm();
        prop_assert!(close(a, b, 1e-12));
    }

    #[test]
    fn tag_novelty_is_bounded_and_matches_brute_force(seed in any::<u64>()) {
        let mut r = rng(seed);
        let size = r.random_range(1..=60);
        let vocab = r.random_range(1..=15);
        let corpus = random_tag_corpus(&mut r, size, vocab);
        let expected = tag_novelty_oracle(&corpus);
        let mut ledger = TagLedger::new();
        for (tags, (raw, norm)) in corpus.iter().zip(expected) {
            let (a, b) = ledger.novelty(tags);
            prop_assert!(a >= 0.0 && (0.0..=1.0).contains(&b));
            prop_assert!((a - raw).abs() <= 1e-12 && (b - norm).abs() <= 1e-12);
            ledger.ingest(tags);
        }
    }

    #[test]
    fn network_features_stay_in_range(n in 1usize..10, edges in proptest::collection::vec((0usize..10, 0usize..10), 0..40)) {
        let edges: Vec<(usize, usize)> = edges.into_iter().filter(|&(a, b)| a < n && b < n).collect();
        let g = Snapshot::from_edges(n, &edges);
        for u in 0..n {
            let f = g.features_at(u);
            prop_assert!((0.0..=1.0).contains(&f.closeness));
            prop_assert!((0.0..=1.0).contains(&f.density));
            prop_assert!(f.constraint >= 0.0 && f.constraint.is_finite());
            if f.out_degree == 0 {
                prop_assert_eq!(f.constraint, 0.0);
            }
        }
    }

    #[test]
    fn snapshots_only_grow(times in proptest::collection::vec(0i64..50, 1..30), probes in proptest::collection::vec(0i64..55, 2..6)) {
        let follows: Vec<Follow> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| Follow {
                src: format!("u{}", i % 7),
                dst: format!("u{}", (i % 7 + 1 + i % 5) % 7),
                timestamp: Timestamp(t),
            })
            .collect();
        let g = TemporalGraph::from_follows(&follows).unwrap();
        let mut probes = probes;
        probes.sort();
        let mut prev: Vec<(String, String)> = Vec::new();
        for t in probes {
            let snap = g.snapshot_at(Timestamp(t));
            let edges = snap.edges();
            for f in &follows {
                let present = edges.contains(&(f.src.clone(), f.dst.clone()));
                if f.timestamp.0 < t {
                    prop_assert!(present);
                }
            }
            for e in &edges {
                prop_assert!(follows.iter().any(|f| f.src == e.0 && f.dst == e.1 && f.timestamp.0 < t));
            }
            for e in &prev {
                prop_assert!(edges.contains(e));
            }
            let mut cursor = g.cursor();
            prop_assert_eq!(cursor.advance_to(Timestamp(t)).edges(), edges.clone());
            prev = edges;
        }
    }

    #[test]
    fn mann_whitney_u_is_complementary(a in proptest::collection::vec(0u8..12, 1..30), b in proptest::collection::vec(0u8..12, 1..30)) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = mann_whitney_u(&a, &b).unwrap();
        let ba = mann_whitney_u(&b, &a).unwrap();
        prop_assert!((ab.u + ba.u - (a.len() * b.len()) as f64).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&ab.p));
        prop_assert!((ab.p - ba.p).abs() < 1e-12);
    }

    #[test]
    fn pca2d_axes_are_orthogonal_and_ordered(seed in any::<u64>(), rows in 3usize..40, dim in 2usize..12) {
        let mut r = rng(seed);
        let data: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..dim).map(|j| normal(&mut r) * (j + 1) as f64).collect())
            .collect();
        let ids = (0..rows).map(|i| format!("s{i}")).collect();
        let pack = FeaturePack::from_rows(ids, dim, &data, "embedding").unwrap();
        let proj = pca2d(&pack, 3).unwrap();
        let [e1, e2] = proj.explained_ratio;
        prop_assert!(e1 >= e2 - 1e-12 && e2 >= -1e-12 && e1 + e2 <= 1.0 + 1e-9);
        let c = &proj.coords;
        let dot: f64 = c.column(0).iter().zip(c.column(1)).map(|(a, b)| a * b).sum();
        let n1: f64 = c.column(0).iter().map(|v| v * v).sum();
        let n2: f64 = c.column(1).iter().map(|v| v * v).sum();
        prop_assert!(dot.abs() <= 1e-6 * (n1 * n2).sqrt().max(1e-12));
        prop_assert!(n1 >= n2 - 1e-6 * n1.max(1.0));
    }

    #[test]
    fn schedule_partitions_the_scored_span(first in 0i64..1_000_000, span_days in 0i64..2000, train in 1i64..400, score in 1i64..120, probes in proptest::collection::vec(0f64..1.0, 20)) {
        let day = 86_400;
        let first_t = Timestamp(first);
        let last_t = Timestamp(first + span_days * day);
        let s = build_schedule_with(first_t, last_t, train, score);
        if span_days <= train {
            prop_assert!(s.is_empty() && s.warning.is_some());
            return Ok(());
        }
        prop_assert_eq!(s.windows[0].score_start, first_t.add_days(train));
        prop_assert_eq!(s.windows.last().unwrap().score_end, last_t);
        for pair in s.windows.windows(2) {
            prop_assert_eq!(pair[0].score_end, pair[1].score_start);
        }
        for w in &s.windows {
            prop_assert_eq!(w.train_end, w.score_start);
            prop_assert_eq!(w.train_start, w.score_start.add_days(-train));
        }
        for f in probes {
            let t = Timestamp(first + (f * (span_days * day) as f64) as i64);
            let hits = s.windows.iter().filter(|w| w.scores(t)).count();
            let scored = t >= s.windows[0].score_start;
            prop_assert_eq!(hits, usize::from(scored));
        }
        prop_assert_eq!(s.window_for(last_t), Some(s.len() - 1));
    }

    #[test]
    fn packs_round_trip(rows in 1usize..20, dim in 1usize..9, seed in any::<u64>()) {
        let mut r = rng(seed);
        let data = Array2::from_shape_fn((rows, dim), |_| normal(&mut r) as f32);
        let ids = (0..rows).map(|i| format!("shot-{i}")).collect();
        let pack = FeaturePack::new(ids, data, "compositional").unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_pack(&pack, dir.path()).unwrap();
        prop_assert_eq!(read_pack(dir.path()).unwrap(), pack);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn em_log_likelihood_never_decreases(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=4);
        let d = r.random_range(1..=4);
        let p = Params::random(&mut r, n, d);
        let data = p.sample(&mut r, 150);
        let cfg = FitConfig { n_components: n, max_iters: 60, rel_tol: 1e-12, seed, ..FitConfig::default() };
        let (gm, trace) = fit_gmm_traced(data.view(), &cfg).unwrap();
        for w in trace.log_likelihoods.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        prop_assert!((gm.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mrf_vector_is_standardized_on_its_window(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = Params::random(&mut r, 2, 3);
        let window = p.sample(&mut r, 200);
        let gm = p.to_mixture();
        let reference = MrfReference::estimate(&gm, window.view()).unwrap();
        let zs: Vec<Vec<f64>> = window.rows().into_iter().map(|x| fvmrf_novelty(&reference, x).unwrap().0).collect();
        for i in 0..2 {
            let col: Vec<f64> = zs.iter().map(|z| z[i]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64;
            prop_assert!(mean.abs() <= 0.05 && (var.sqrt() - 1.0).abs() <= 0.05);
        }
    }

    #[test]
    fn compositional_features_are_finite_with_unit_histograms(seed in any::<u64>(), w in 8u32..40, h in 8u32..40) {
        let mut r = rng(seed);
        let blocky = r.random_bool(0.5);
        let base: [u8; 3] = [r.random(), r.random(), r.random()];
        let img = RasterImage::from_fn(w, h, |x, y| {
            if blocky && (x / 4 + y / 4) % 2 == 0 { base } else { [r.random(), r.random(), r.random()] }
        }).unwrap();
        let f = extract_compositional(&img).unwrap();
        let v = f.values();
        prop_assert_eq!(v.len(), N_FEATURES);
        prop_assert!(v.iter().all(|x| x.is_finite()));
        for (start, len) in [(IDX_HUE_HIST, 12), (IDX_SAT_HIST, 5), (IDX_BRIGHT_HIST, 3)] {
            let s: f64 = v[start..start + len].iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
        let map = spectral_saliency(&img.gray());
        prop_assert!(map.iter().all(|m| (0.0..=1.0).contains(m)));
    }
}

#[test]
fn responsibilities_sum_to_one() {
    let mut r = rng(4242);
    for _ in 0..10_000 {
        let n = r.random_range(1..=5);
        let d = r.random_range(1..=4);
        let p = Params::random(&mut r, n, d);
        let x: Vec<f64> = (0..d).map(|_| r.random_range(-30.0..30.0)).collect();
        let g = p.to_mixture().responsibilities(Array1::from(x).view()).unwrap();
        assert!((g.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(g.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn pearson_is_bounded() {
    let mut r = rng(77);
    for i in 0..10_000 {
        let len = r.random_range(2..30);
        let x: Vec<f64> = (0..len).map(|_| normal(&mut r)).collect();
        let y: Vec<f64> = if i % 3 == 0 {
            x.iter().map(|v| 2.0 * v + 1.0).collect()
        } else {
            (0..len).map(|_| normal(&mut r) * 1e3).collect()
        };
        let c = pearson(&x, &y).unwrap();
        assert!((-1.0..=1.0).contains(&c), "{c}");
    }
}

#[test]
fn mixture_density_integrates_to_one() {
    let mut r = rng(11);
    for _ in 0..10 {
        let p = Params::random(&mut r, 3, 1);
        let gm = p.to_mixture();
        let steps = 100_000;
        let h = 100.0 / steps as f64;
        let f = |i: usize| gm.log_pdf(Array1::from(vec![-50.0 + i as f64 * h]).view()).unwrap().exp();
        let inner: f64 = (1..steps).map(f).sum();
        let total = h * (inner + 0.5 * (f(0) + f(steps)));
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }
}
