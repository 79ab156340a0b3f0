//! Seeded end-to-end experiments. Each returns a structured outcome with a
//! pass flag so the acceptance harness and the CLI share one implementation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::affine::AffineMap;
use crate::discrete::{
    data_processing_check, disagreement_bound_check, FiniteDistribution, Lang, Sentence, Translator, PROB_TOL,
};
use crate::error::Result;
use crate::evaluation::{
    concentration_bound, median, population_loss, required_sample_size, sample_complexity_sweep, spearman,
    verify_chain_bound, EvalConfig, PairEvalRecord, SweepConfig, SweepResult,
};
use crate::generative::{
    generate_corpus, proposition_zero_check, sample_band_matrix, sample_ground_truth_codecs, sample_randomized_codecs,
    target_marginal_sample, AlignedCorpus, Codecs, FunctionClassSpec, LanguageCodec, LatentSampler,
};
use crate::graph::{shortest_path_and_diameter, TranslationGraph};
use crate::impossibility::random::{random_many_to_many, random_two_to_one};
use crate::impossibility::{
    brute_force_min_error, make_worst_case, many_to_many_bounds, two_to_one_bound, Objective, TwoToOneInstance,
};
use crate::seed::{derive_seed, rng_for};
use crate::trainer::{empirical_edge_loss, train, EncoderEstimate, TrainConfig, TrainOutcome};

#[derive(Clone, Debug, Serialize)]
pub struct SoundnessReport {
    pub checked: usize,
    pub violations: usize,
    pub infeasible: usize,
    /// Smallest `value - bound` seen.
    pub min_slack: f64,
}

impl SoundnessReport {
    fn new() -> Self {
        SoundnessReport {
            checked: 0,
            violations: 0,
            infeasible: 0,
            min_slack: f64::INFINITY,
        }
    }

    fn record(&mut self, value: Option<f64>, bound: f64) {
        self.checked += 1;
        match value {
            Some(v) => {
                self.min_slack = self.min_slack.min(v - bound);
                if v < bound - 1e-9 {
                    self.violations += 1;
                }
            }
            None => self.infeasible += 1,
        }
    }

    fn merge(mut self, other: SoundnessReport) -> Self {
        self.checked += other.checked;
        self.violations += other.violations;
        self.infeasible += other.infeasible;
        self.min_slack = self.min_slack.min(other.min_slack);
        self
    }
}

/// Random two-to-one instances with up to three sentences per language and
/// `|Z| <= 3`, each checked at every epsilon.
pub fn two_to_one_soundness(seed: u64, instances: usize, epsilons: &[f64]) -> Result<SoundnessReport> {
    let parts = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, &["two-to-one", &i.to_string()]);
            let per_source = rng.random_range(1..=3);
            let target_size = rng.random_range(1..=3);
            let z_size = rng.random_range(1..=3);
            let inst = random_two_to_one(&mut rng, per_source, target_size)?;
            let mm = inst.to_many_to_many()?;
            let mut report = SoundnessReport::new();
            for &eps in epsilons {
                let bound = two_to_one_bound(&inst, eps)?;
                let out = brute_force_min_error(&mm, z_size, eps, Objective::Sum)?;
                report.record(out.best.map(|b| b.value), bound);
            }
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().fold(SoundnessReport::new(), SoundnessReport::merge))
}

#[derive(Clone, Debug, Serialize)]
pub struct WorstCaseReport {
    pub delta: f64,
    pub epsilon: f64,
    pub bound: f64,
    pub brute_force_min: Option<f64>,
}

pub fn worst_case_demo(delta: f64, epsilon: f64, z_size: usize) -> Result<(TwoToOneInstance, WorstCaseReport)> {
    let inst = make_worst_case(delta)?;
    let bound = two_to_one_bound(&inst, epsilon)?;
    let out = brute_force_min_error(&inst.to_many_to_many()?, z_size, epsilon, Objective::Sum)?;
    Ok((
        inst,
        WorstCaseReport {
            delta,
            epsilon,
            bound,
            brute_force_min: out.best.map(|b| b.value),
        },
    ))
}

/// Random K = 3 instances, checking the max and the average objective.
pub fn many_to_many_soundness(seed: u64, instances: usize, epsilon: f64) -> Result<(SoundnessReport, SoundnessReport)> {
    let parts = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, &["many-to-many", &i.to_string()]);
            let total = rng.random_range(6..=8);
            let z_size = rng.random_range(3..=4);
            let inst = random_many_to_many(&mut rng, 3, total, 2)?;
            let bounds = many_to_many_bounds(&inst, epsilon)?;
            let mut max_r = SoundnessReport::new();
            let mut avg_r = SoundnessReport::new();
            let mx = brute_force_min_error(&inst, z_size, epsilon, Objective::Max)?;
            max_r.record(mx.best.map(|b| b.value), bounds.max_bound);
            let av = brute_force_min_error(&inst, z_size, epsilon, Objective::Avg)?;
            avg_r.record(av.best.map(|b| b.value), bounds.avg_bound);
            Ok((max_r, avg_r))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts
        .into_iter()
        .fold((SoundnessReport::new(), SoundnessReport::new()), |(a, b), (c, d)| {
            (a.merge(c), b.merge(d))
        }))
}

fn random_distribution<R: Rng>(rng: &mut R, atoms: &[u32]) -> FiniteDistribution<u32> {
    let masses: Vec<(u32, f64)> = atoms.iter().map(|&a| (a, rng.random::<f64>() + 1e-3)).collect();
    FiniteDistribution::from_masses(masses).expect("positive masses")
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub lemma_checked: usize,
    pub lemma_violations: usize,
    pub dpi_checked: usize,
    pub dpi_violations: usize,
}

/// Random finite instances for the disagreement lemma and data processing.
pub fn inequality_checks(seed: u64, instances: usize) -> Result<InequalityReport> {
    let mut rng = rng_for(seed, &["inequalities"]);
    let (mut lemma_violations, mut dpi_violations) = (0, 0);
    for _ in 0..instances {
        let n = rng.random_range(1..=6u32);
        let codomain = rng.random_range(1..=4u32);
        let atoms: Vec<u32> = (0..n).collect();
        let d = random_distribution(&mut rng, &atoms);
        let f = Translator::from_fn(&atoms, |_| rng.random_range(0..codomain));
        let g = Translator::from_fn(&atoms, |_| rng.random_range(0..codomain));
        if !disagreement_bound_check(&d, &f, &g)?.holds {
            lemma_violations += 1;
        }
        let e = random_distribution(&mut rng, &atoms);
        if !data_processing_check(&d, &e, &f)?.holds {
            dpi_violations += 1;
        }
    }
    Ok(InequalityReport {
        lemma_checked: instances,
        lemma_violations,
        dpi_checked: instances,
        dpi_violations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PropositionRun {
    pub seed: u64,
    pub max_stat: f64,
    pub moments_hold: bool,
    pub binned_bound: f64,
    pub binned_tolerance: f64,
}

/// Sign pattern of `x - center` as a cell index in `0..2^d`.
fn orthant(x: nalgebra::DVectorView<f64>, center: &nalgebra::DVector<f64>) -> usize {
    x.iter()
        .zip(center.iter())
        .enumerate()
        .fold(0, |acc, (i, (a, c))| acc | (usize::from(a >= c) << i))
}

/// Discretizes two target-side samples into orthant cells around the target
/// offset and evaluates the two-to-one bound on the resulting finite
/// instance. Returns the bound and the tolerance `½ Σ_b 2 SE_b`.
pub fn binned_two_to_one(samples: [&DMatrix<f64>; 2], center: &nalgebra::DVector<f64>) -> Result<(f64, f64)> {
    let cells = 1usize << center.len();
    let m = samples[0].ncols() as f64;
    let counts: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let mut c = vec![0.0; cells];
            for col in s.column_iter() {
                c[orthant(col, center)] += 1.0;
            }
            c
        })
        .collect();
    let (l0, l1, l) = (Lang::new("S0"), Lang::new("S1"), Lang::new("T"));
    let mut marginals = Vec::new();
    let mut translators = Vec::new();
    for (src, c) in [&l0, &l1].into_iter().zip(&counts) {
        let atoms: Vec<Sentence> = (0..cells).map(|b| Sentence::new(src.clone(), b.to_string())).collect();
        translators.push(Translator::from_pairs(atoms.iter().cloned().map(|s| {
            let body = s.body.clone();
            (s, Sentence::new(l.clone(), body))
        })));
        marginals.push(FiniteDistribution::from_masses(
            atoms.into_iter().zip(c.iter().copied()).collect(),
        )?);
    }
    let vocab = (0..cells).map(|b| Sentence::new(l.clone(), b.to_string())).collect();
    let [m0, m1]: [_; 2] = marginals.try_into().expect("two");
    let [f0, f1]: [_; 2] = translators.try_into().expect("two");
    let inst = TwoToOneInstance::new([l0, l1], l, [m0, m1], [f0, f1], vocab)?;
    let bound = two_to_one_bound(&inst, 0.0)?;
    let tolerance: f64 = (0..cells)
        .map(|b| {
            let p = (counts[0][b] + counts[1][b]) / (2.0 * m);
            let se = (p * (1.0 - p) * 2.0 / m).sqrt();
            0.5 * 2.0 * se
        })
        .sum();
    Ok((bound, tolerance))
}

/// Target marginals of different sources coincide under the generative model.
pub fn proposition_runs(master: u64, runs: usize, d: usize, m: usize) -> Result<Vec<PropositionRun>> {
    (0..runs)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(master, &["proposition", &r.to_string()]);
            let spec = FunctionClassSpec {
                d,
                ..FunctionClassSpec::default()
            };
            let langs: Vec<Lang> = (0..3).map(|i| Lang::new(format!("L{i}"))).collect();
            let codecs = sample_ground_truth_codecs(&spec, &langs, seed)?;
            let sampler = LatentSampler::from_spec(&spec);
            let report = proposition_zero_check(&codecs, &langs[..2], &langs[2], &sampler, m, seed)?;
            let a = target_marginal_sample(&codecs, &langs[0], &langs[2], &sampler, m, seed)?;
            let b = target_marginal_sample(&codecs, &langs[1], &langs[2], &sampler, m, seed)?;
            let center = codecs[&langs[2]].decoder().b.clone();
            let (binned_bound, binned_tolerance) = binned_two_to_one([&a, &b], &center)?;
            Ok(PropositionRun {
                seed,
                max_stat: report.max_stat,
                moments_hold: report.holds,
                binned_bound,
                binned_tolerance,
            })
        })
        .collect()
}

pub fn chain_corpora<C: LanguageCodec>(
    graph: &TranslationGraph,
    codecs: &Codecs<C>,
    sampler: &LatentSampler,
    seed: u64,
) -> Result<Vec<AlignedCorpus>> {
    graph
        .edges()
        .par_iter()
        .map(|e| generate_corpus(&e.a, &e.b, codecs, e.n, sampler, seed))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoveryReport {
    pub pairs: Vec<(Lang, Lang, bool, f64)>,
    pub max_loss: f64,
}

/// Noiseless chain: every pair, adjacent or not, is recovered exactly.
pub fn realizable_recovery(seed: u64, k: usize, d: usize, n: usize, m: usize) -> Result<RecoveryReport> {
    let spec = FunctionClassSpec {
        d,
        ..FunctionClassSpec::default()
    };
    let graph = TranslationGraph::chain(k, n)?;
    let codecs = sample_ground_truth_codecs(&spec, graph.languages(), seed)?;
    let sampler = LatentSampler::from_spec(&spec);
    let corpora = chain_corpora(&graph, &codecs, &sampler, seed)?;
    let out = train(&graph, &corpora, &TrainConfig::default(), &spec)?;
    let langs = graph.languages();
    let mut pairs = Vec::new();
    for i in 0..langs.len() {
        for j in (i + 1)..langs.len() {
            let loss = population_loss(&out.estimate, &langs[i], &langs[j], &codecs, &sampler, m, seed)?;
            pairs.push((
                langs[i].clone(),
                langs[j].clone(),
                graph.has_edge(&langs[i], &langs[j]),
                loss.mean,
            ));
        }
    }
    let max_loss = pairs.iter().map(|p| p.3).fold(0.0, f64::max);
    Ok(RecoveryReport { pairs, max_loss })
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainBoundReport {
    pub records: Vec<(u64, PairEvalRecord)>,
    pub holds_fraction: f64,
    /// Median measured loss per pair, with its path length.
    pub medians: Vec<(Lang, Lang, usize, f64)>,
    pub spearman: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChainBoundSetup {
    pub k: usize,
    pub d: usize,
    pub nuisance: usize,
    pub sigma: f64,
    pub n: usize,
    pub m: usize,
    pub sweeps: usize,
    /// Clip fitted edge maps into the function class before anchoring.
    pub project: bool,
}

pub fn train_randomized_chain(
    setup: &ChainBoundSetup,
    seed: u64,
) -> Result<(
    TranslationGraph,
    Codecs<crate::generative::RandomizedCodec>,
    TrainOutcome,
    LatentSampler,
)> {
    let spec = FunctionClassSpec {
        d: setup.d,
        ..FunctionClassSpec::default()
    };
    let graph = TranslationGraph::chain(setup.k, setup.n)?;
    let codecs = sample_randomized_codecs(&spec, setup.nuisance, setup.sigma, graph.languages(), seed)?;
    let sampler = LatentSampler::from_spec(&spec);
    let corpora = chain_corpora(&graph, &codecs, &sampler, seed)?;
    let cfg = TrainConfig {
        sweeps: setup.sweeps,
        project: setup.project,
        ..TrainConfig::default()
    };
    let out = train(&graph, &corpora, &cfg, &spec)?;
    Ok((graph, codecs, out, sampler))
}

/// Chained bound over every pair for several seeds, plus the rank
/// correlation between path length and median measured loss.
pub fn chain_bound_experiment(master: u64, seeds: usize, setup: &ChainBoundSetup) -> Result<ChainBoundReport> {
    let per_seed = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let seed = derive_seed(master, &["chain", &s.to_string()]);
            let (graph, codecs, out, sampler) = train_randomized_chain(setup, seed)?;
            let cfg = EvalConfig {
                m: setup.m,
                seed,
                mc_slack: 0.05,
            };
            let recs = verify_chain_bound(&out.estimate, &graph, &codecs, &sampler, &cfg)?;
            Ok(recs.into_iter().map(|r| (seed, r)).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<(u64, PairEvalRecord)> = per_seed.into_iter().flatten().collect();
    let holds_fraction = records.iter().filter(|r| r.1.holds).count() as f64 / records.len() as f64;
    let mut grouped: BTreeMap<(Lang, Lang), (usize, Vec<f64>)> = BTreeMap::new();
    for (_, r) in &records {
        grouped
            .entry((r.src.clone(), r.dst.clone()))
            .or_insert_with(|| (r.path_len, Vec::new()))
            .1
            .push(r.measured_loss);
    }
    let medians: Vec<(Lang, Lang, usize, f64)> = grouped
        .into_iter()
        .map(|((a, b), (len, mut v))| (a, b, len, median(&mut v)))
        .collect();
    let lens: Vec<f64> = medians.iter().map(|m| m.2 as f64).collect();
    let meds: Vec<f64> = medians.iter().map(|m| m.3).collect();
    Ok(ChainBoundReport {
        holds_fraction,
        spearman: spearman(&lens, &meds),
        medians,
        records,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GaugeReport {
    pub max_composite_diff: f64,
    pub max_empirical_diff: f64,
    pub max_population_diff: f64,
}

/// Applies a random invertible affine map to every trained encoder and
/// measures how much composites and losses move.
pub fn gauge_invariance(seed: u64, setup: &ChainBoundSetup) -> Result<GaugeReport> {
    let (graph, codecs, out, sampler) = train_randomized_chain(setup, seed)?;
    let mut rng = rng_for(seed, &["gauge"]);
    let dim = setup.d + setup.nuisance;
    let f = AffineMap {
        w: sample_band_matrix(&mut rng, dim, 2.0),
        b: nalgebra::DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)),
    };
    let est: &EncoderEstimate = &out.estimate;
    let gauged = est.gauge(&f);
    let corpora = chain_corpora(&graph, &codecs, &sampler, seed)?;
    let langs = graph.languages();
    let mut report = GaugeReport {
        max_composite_diff: 0.0,
        max_empirical_diff: 0.0,
        max_population_diff: 0.0,
    };
    for a in langs {
        for b in langs {
            let diff = est.composite(a, b)?.max_abs_diff(&gauged.composite(a, b)?);
            report.max_composite_diff = report.max_composite_diff.max(diff);
            if a != b {
                let p0 = population_loss(est, a, b, &codecs, &sampler, setup.m, seed)?.mean;
                let p1 = population_loss(&gauged, a, b, &codecs, &sampler, setup.m, seed)?.mean;
                report.max_population_diff = report.max_population_diff.max((p0 - p1).abs());
            }
        }
    }
    for c in &corpora {
        let e0 = empirical_edge_loss(est, c)?;
        let e1 = empirical_edge_loss(&gauged, c)?;
        report.max_empirical_diff = report.max_empirical_diff.max((e0 - e1).abs());
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSetup {
    pub spec: FunctionClassSpec,
    pub nuisance: usize,
    pub sigma: f64,
    pub config: SweepConfig,
}

impl SweepSetup {
    /// One-dimensional latent with one nuisance coordinate.
    pub fn default_with_seed(seed: u64) -> Self {
        SweepSetup {
            spec: FunctionClassSpec {
                d: 1,
                ..FunctionClassSpec::default()
            },
            nuisance: 1,
            sigma: 0.05,
            config: SweepConfig {
                n_list: (0..8).map(|i| 32 << i).collect(),
                trials: 20,
                m: 10_000,
                seed,
                ridge: 1e-10,
            },
        }
    }
}

pub fn generalization_sweep(setup: &SweepSetup) -> Result<SweepResult> {
    let spec = &setup.spec;
    let langs = [Lang::new("L0"), Lang::new("L1")];
    let codecs = sample_randomized_codecs(spec, setup.nuisance, setup.sigma, &langs, setup.config.seed)?;
    sample_complexity_sweep(
        &langs[0],
        &langs[1],
        &codecs,
        &LatentSampler::from_spec(spec),
        &setup.config,
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct DiameterReport {
    pub diameter: usize,
    pub witness: Vec<Lang>,
}

pub fn six_language_diameter() -> Result<DiameterReport> {
    let g = TranslationGraph::six_language_example(1)?;
    let t = shortest_path_and_diameter(&g)?;
    Ok(DiameterReport {
        diameter: t.diameter,
        witness: g.path_langs(&t.witness),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FormulaCell {
    pub eps: f64,
    pub delta: f64,
    pub n: u64,
    pub ratio: f64,
}

/// `concentration_bound(required_sample_size(..))` relative to `δ/K²`.
pub fn formula_grid(eps: &[f64], deltas: &[f64], k: usize, p: usize, m_bound: f64) -> Result<Vec<FormulaCell>> {
    let mut out = Vec::new();
    for &e in eps {
        for &d in deltas {
            let n = required_sample_size(e, d, k, p, m_bound)?;
            let log_n = p as f64 * (16.0 * m_bound / e).ln();
            let target = d / (k * k) as f64;
            out.push(FormulaCell {
                eps: e,
                delta: d,
                n,
                ratio: concentration_bound(n, e, m_bound, log_n) / target,
            });
        }
    }
    Ok(out)
}

/// Whether a formula ratio counts as agreement within a factor of two.
pub fn within_factor_two(ratio: f64) -> bool {
    (0.5..=2.0 + PROB_TOL).contains(&ratio)
}
