use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use umtlab::affine::AffineMap;
use umtlab::discrete::{
    data_processing_check, disagreement_bound_check, pushforward, tv_distance, FiniteDistribution, Lang, Sentence,
    Translator,
};
use umtlab::generative::{generate_corpus, sample_ground_truth_codecs, FunctionClassSpec, LatentSampler};
use umtlab::graph::TranslationGraph;
use umtlab::impossibility::random::{random_many_to_many, random_two_to_one};
use umtlab::impossibility::{
    brute_force_min_error, check_epsilon_universal, check_epsilon_universal_partitioned, many_to_many_bounds,
    two_to_one_bound, Objective, PartitionedRepresentation, ZAtom,
};
use umtlab::trainer::{fit_edge, train, TrainConfig};

fn dist(weights: &[f64]) -> FiniteDistribution<u32> {
    FiniteDistribution::from_masses(weights.iter().enumerate().map(|(i, &w)| (i as u32, w)).collect()).unwrap()
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, n)
}

fn map_of(table: &[u32]) -> Translator<u32, u32> {
    Translator::from_pairs(table.iter().enumerate().map(|(i, &v)| (i as u32, v)))
}

/// Every assignment of `n` items to `k` values, lowest index fastest.
fn all_tables(n: usize, k: usize) -> Vec<Vec<usize>> {
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let d = code % k;
                    code /= k;
                    d
                })
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tv_is_a_metric(a in weights(5), b in weights(5), c in weights(5)) {
        let (p, q, r) = (dist(&a), dist(&b), dist(&c));
        let pq = tv_distance(&p, &q);
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert!((pq - tv_distance(&q, &p)).abs() < 1e-15);
        prop_assert!(tv_distance(&p, &p) < 1e-15);
        prop_assert!(pq <= tv_distance(&p, &r) + tv_distance(&r, &q) + 1e-12);
    }

    #[test]
    fn tv_on_disjoint_supports_is_one(a in weights(3), b in weights(3)) {
        let p = dist(&a);
        let q = FiniteDistribution::from_masses(b.iter().enumerate().map(|(i, &w)| (10 + i as u32, w)).collect()).unwrap();
        prop_assert!((tv_distance(&p, &q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pushforward_preserves_mass(a in weights(6), table in prop::collection::vec(0u32..3, 6)) {
        let p = dist(&a);
        let pushed = pushforward(&p, &map_of(&table)).unwrap();
        prop_assert!((pushed.total_mass() - 1.0).abs() < 1e-12);
        for v in 0..3u32 {
            let direct: f64 = table.iter().enumerate().filter(|(_, &t)| t == v).map(|(i, _)| p.mass(&(i as u32))).sum();
            prop_assert!((pushed.mass(&v) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn disagreement_bounds_pushforward_tv(
        a in weights(5),
        f in prop::collection::vec(0u32..3, 5),
        g in prop::collection::vec(0u32..3, 5),
    ) {
        let r = disagreement_bound_check(&dist(&a), &map_of(&f), &map_of(&g)).unwrap();
        prop_assert!(r.holds, "{r:?}");
    }

    #[test]
    fn processing_never_increases_tv(a in weights(5), b in weights(5), h in prop::collection::vec(0u32..3, 5)) {
        let r = data_processing_check(&dist(&a), &dist(&b), &map_of(&h)).unwrap();
        prop_assert!(r.holds, "{r:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn brute_force_respects_two_to_one_bound(
        seed in any::<u64>(),
        per_source in 1usize..=3,
        target in 1usize..=3,
        z in 1usize..=3,
        eps in prop::sample::select(vec![0.0, 0.1, 0.3]),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_two_to_one(&mut rng, per_source, target).unwrap();
        let bound = two_to_one_bound(&inst, eps).unwrap();
        let out = brute_force_min_error(&inst.to_many_to_many().unwrap(), z, eps, Objective::Sum).unwrap();
        if let Some(best) = out.best {
            prop_assert!(best.value >= bound - 1e-9, "value {} < bound {}", best.value, bound);
        }
    }

    #[test]
    fn every_universal_candidate_respects_bound(seed in any::<u64>(), z in 1usize..=3, eps in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_two_to_one(&mut rng, 2, 2).unwrap();
        let bound = two_to_one_bound(&inst, eps).unwrap();
        let mut worst: f64 = f64::INFINITY;
        umtlab::impossibility::for_each_candidate(&inst.to_many_to_many().unwrap(), z, eps, |c| {
            worst = worst.min(c.objective(Objective::Sum) - bound);
        })
        .unwrap();
        prop_assert!(worst >= -1e-9);
    }

    #[test]
    fn minimum_is_monotone_in_z_and_epsilon(seed in any::<u64>(), z in 1usize..=2, eps in 0.0f64..0.4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_two_to_one(&mut rng, 2, 2).unwrap().to_many_to_many().unwrap();
        let value = |z, e| brute_force_min_error(&inst, z, e, Objective::Sum).unwrap().best.map_or(f64::INFINITY, |b| b.value);
        let base = value(z, eps);
        prop_assert!(value(z + 1, eps) <= base + 1e-12);
        prop_assert!(value(z, eps + 0.1) <= base + 1e-12);
    }

    #[test]
    fn many_to_many_brute_force_respects_bounds(seed in any::<u64>(), eps in prop::sample::select(vec![0.0, 0.1, 0.3])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_many_to_many(&mut rng, 3, 6, 2).unwrap();
        let b = many_to_many_bounds(&inst, eps).unwrap();
        prop_assert!(b.max_bound >= 0.0 && b.avg_bound >= 0.0);
        prop_assert!(b.avg_bound <= b.max_bound + 1e-12);
        for (obj, bound) in [(Objective::Max, b.max_bound), (Objective::Avg, b.avg_bound)] {
            if let Some(best) = brute_force_min_error(&inst, 3, eps, obj).unwrap().best {
                prop_assert!(best.value >= bound - 1e-9);
            }
        }
    }
}

type Key = (BTreeMap<Lang, BTreeSet<ZAtom>>, Vec<(Sentence, ZAtom)>);

fn key(blocks: BTreeMap<Lang, BTreeSet<ZAtom>>, g: &Translator<Sentence, ZAtom>) -> Key {
    let blocks = blocks.into_iter().filter(|(_, b)| !b.is_empty()).collect();
    (blocks, g.iter().map(|(s, z)| (s.clone(), *z)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// The enumerator visits exactly the (partition, encoder) pairs that the
    /// literal partitioned check accepts, found here by trying every
    /// partition against every unconstrained encoder table.
    #[test]
    fn enumeration_matches_literal_partitioned_check(seed in any::<u64>(), eps in prop::sample::select(vec![0.0, 0.2])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_many_to_many(&mut rng, 3, 6, 1).unwrap();
        let z = 3;
        let targets = inst.targets();
        let sentences = inst.source_sentences();
        let mut literal = BTreeSet::new();
        for partition in all_tables(z, targets.len()) {
            let blocks: BTreeMap<Lang, BTreeSet<ZAtom>> = targets
                .iter()
                .enumerate()
                .map(|(b, t)| (t.clone(), (0..z).filter(|&a| partition[a] == b).collect()))
                .collect();
            for table in all_tables(sentences.len(), z) {
                let g = Translator::from_pairs(sentences.iter().cloned().zip(table));
                let rep = PartitionedRepresentation::new(blocks.clone(), g.clone()).unwrap();
                if check_epsilon_universal_partitioned(&rep, &inst, eps).unwrap() {
                    literal.insert(key(blocks.clone(), &g));
                }
            }
        }
        let mut visited = BTreeSet::new();
        umtlab::impossibility::for_each_candidate(&inst, z, eps, |c| {
            visited.insert(key(c.blocks(), &c.encoder()));
        })
        .unwrap();
        prop_assert_eq!(visited, literal);
    }

    #[test]
    fn two_to_one_feasible_encoders_match_literal_check(seed in any::<u64>(), eps in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_two_to_one(&mut rng, 3, 2).unwrap();
        let mm = inst.to_many_to_many().unwrap();
        let sentences = mm.source_sentences();
        let z = 2;
        let literal: BTreeSet<Vec<ZAtom>> = all_tables(sentences.len(), z)
            .into_iter()
            .filter(|t| {
                let g = Translator::from_pairs(sentences.iter().cloned().zip(t.iter().copied()));
                check_epsilon_universal(&g, &inst.marginals, eps).unwrap()
            })
            .collect();
        let mut visited = BTreeSet::new();
        umtlab::impossibility::for_each_candidate(&mm, z, eps, |c| {
            visited.insert(c.encoder().iter().map(|(_, z)| *z).collect::<Vec<_>>());
        })
        .unwrap();
        prop_assert_eq!(visited, literal);
    }
}

fn random_invertible(rng: &mut ChaCha8Rng, d: usize) -> AffineMap {
    let w = umtlab::generative::sample_band_matrix(rng, d, 2.0);
    AffineMap {
        w,
        b: DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn affine_inverse_round_trips(seed in any::<u64>(), d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_invertible(&mut rng, d);
        let id = f.inverse().unwrap().after(&f);
        prop_assert!(id.max_abs_diff(&AffineMap::identity(d)) < 1e-10);
        let g = random_invertible(&mut rng, d);
        prop_assert!(f.solve_after(&g).unwrap().max_abs_diff(&f.inverse().unwrap().after(&g)) < 1e-10);
    }

    #[test]
    fn noiseless_fit_recovers_composite(seed in any::<u64>(), d in 1usize..5) {
        let spec = FunctionClassSpec { d, ..FunctionClassSpec::default() };
        let langs = [Lang::new("A"), Lang::new("B")];
        let codecs = sample_ground_truth_codecs(&spec, &langs, seed).unwrap();
        let corpus = generate_corpus(&langs[0], &langs[1], &codecs, 4 * (d + 1), &LatentSampler::from_spec(&spec), seed).unwrap();
        let fit = fit_edge(&corpus, 1e-10).unwrap();
        let truth = codecs[&langs[1]].decoder().after(codecs[&langs[0]].encoder());
        prop_assert!(fit.map.max_abs_diff(&truth) < 1e-8);
        prop_assert!(fit.empirical_loss <= 1e-12);
    }

    #[test]
    fn composites_ignore_gauge_and_anchor(seed in any::<u64>(), k in 2usize..5) {
        let spec = FunctionClassSpec { d: 3, ..FunctionClassSpec::default() };
        let graph = TranslationGraph::chain(k, 20).unwrap();
        let codecs = sample_ground_truth_codecs(&spec, graph.languages(), seed).unwrap();
        let sampler = LatentSampler::from_spec(&spec);
        let corpora: Vec<_> = graph
            .edges()
            .iter()
            .map(|e| generate_corpus(&e.a, &e.b, &codecs, e.n, &sampler, seed).unwrap())
            .collect();
        let base = train(&graph, &corpora, &TrainConfig::default(), &spec).unwrap().estimate;
        let other = TrainConfig { anchor: Some(graph.languages()[k - 1].clone()), ..TrainConfig::default() };
        let moved = train(&graph, &corpora, &other, &spec).unwrap().estimate;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let gauged = base.gauge(&random_invertible(&mut rng, 3));
        for a in graph.languages() {
            for b in graph.languages() {
                let c = base.composite(a, b).unwrap();
                prop_assert!(c.max_abs_diff(&moved.composite(a, b).unwrap()) < 1e-9);
                prop_assert!(c.max_abs_diff(&gauged.composite(a, b).unwrap()) < 1e-9);
            }
        }
    }

    #[test]
    fn fitted_map_is_first_order_optimal(seed in any::<u64>()) {
        let spec = FunctionClassSpec { d: 2, ..FunctionClassSpec::default() };
        let langs = [Lang::new("A"), Lang::new("B")];
        let codecs = umtlab::generative::sample_randomized_codecs(&spec, 1, 0.1, &langs, seed).unwrap();
        let corpus = generate_corpus(&langs[0], &langs[1], &codecs, 64, &LatentSampler::from_spec(&spec), seed).unwrap();
        let fit = fit_edge(&corpus, 1e-10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let dim = fit.map.dim();
            let bump = AffineMap {
                w: &fit.map.w + DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1e-3..1e-3)),
                b: &fit.map.b + DVector::from_fn(dim, |_, _| rng.random_range(-1e-3..1e-3)),
            };
            let loss = umtlab::trainer::mean_squared_residual(&bump, &corpus.xs, &corpus.ys);
            prop_assert!(loss >= fit.empirical_loss - 1e-12);
        }
    }
}
