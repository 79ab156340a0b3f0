//! Population losses, zero-shot composites, the chained path bound and the
//! sample-size formulas.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::affine::AffineMap;
use crate::discrete::Lang;
use crate::error::{Error, Result};
use crate::generative::{generate_corpus, Codecs, LanguageCodec, LatentSampler};
use crate::graph::{shortest_path_and_diameter, TranslationGraph};
use crate::seed::{derive_seed, rng_for};
use crate::trainer::{fit_edge, EncoderEstimate};

pub const MIN_EVAL_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Monte-Carlo estimate of `E ‖T(x) - y‖²` where `x` is decoded into `src`
/// from a fresh latent and `y` is the ground-truth translation of `x` into
/// `dst`. For randomized codecs `y` carries fresh nuisance seeds, so the loss
/// includes the irreducible noise of the target decoder.
pub fn population_loss_of_map<C: LanguageCodec>(
    map: &AffineMap,
    src: &Lang,
    dst: &Lang,
    codecs: &Codecs<C>,
    sampler: &LatentSampler,
    m: usize,
    seed: u64,
) -> Result<LossEstimate> {
    if m < MIN_EVAL_SAMPLES {
        return Err(Error::arg(format!(
            "population loss needs m >= {MIN_EVAL_SAMPLES}, got {m}"
        )));
    }
    let cs = codecs
        .get(src)
        .ok_or_else(|| Error::arg(format!("unknown language {src}")))?;
    let ct = codecs
        .get(dst)
        .ok_or_else(|| Error::arg(format!("unknown language {dst}")))?;
    let (a, b) = (src.as_str(), dst.as_str());
    let zs = sampler.sample(&mut rng_for(seed, &["population", a, b, "latent"]), m);
    let xs = cs.decode_batch(&zs, &mut rng_for(seed, &["population", a, b, "src"]));
    let ys = ct.decode_batch(&cs.encode_batch(&xs), &mut rng_for(seed, &["population", a, b, "dst"]));
    Ok(mean_and_stderr(&(map.apply_batch(&xs) - ys)))
}

fn mean_and_stderr(residuals: &DMatrix<f64>) -> LossEstimate {
    let errs: Vec<f64> = residuals.column_iter().map(|c| c.norm_squared()).collect();
    let m = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / m;
    let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    LossEstimate {
        mean,
        stderr: (var / m).sqrt(),
    }
}

/// Population loss of the estimate's composite `src -> dst`.
pub fn population_loss<C: LanguageCodec>(
    estimate: &EncoderEstimate,
    src: &Lang,
    dst: &Lang,
    codecs: &Codecs<C>,
    sampler: &LatentSampler,
    m: usize,
    seed: u64,
) -> Result<LossEstimate> {
    let map = compose_zero_shot(estimate, src, dst)?;
    population_loss_of_map(&map, src, dst, codecs, sampler, m, seed)
}

/// `Ê_dst⁻¹ ∘ Ê_src` as a single affine map.
pub fn compose_zero_shot(estimate: &EncoderEstimate, src: &Lang, dst: &Lang) -> Result<AffineMap> {
    estimate.composite(src, dst)
}

/// `2 ρ̂² Σ` of the edge losses along `path`. Edge losses may be keyed in
/// either direction.
pub fn path_bound(edge_losses: &BTreeMap<(Lang, Lang), f64>, rho_hat: f64, path: &[Lang]) -> Result<f64> {
    let mut sum = 0.0;
    for w in path.windows(2) {
        let loss = edge_losses
            .get(&(w[0].clone(), w[1].clone()))
            .or_else(|| edge_losses.get(&(w[1].clone(), w[0].clone())))
            .ok_or_else(|| Error::arg(format!("no edge loss for {}-{}", w[0], w[1])))?;
        sum += loss;
    }
    Ok(2.0 * rho_hat * rho_hat * sum)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairEvalRecord {
    pub src: Lang,
    pub dst: Lang,
    pub path: Vec<Lang>,
    pub path_len: usize,
    pub measured_loss: f64,
    pub mc_stderr: f64,
    pub edge_losses: Vec<f64>,
    pub rho_hat: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalConfig {
    pub m: usize,
    pub seed: u64,
    pub mc_slack: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            m: 10_000,
            seed: 0,
            mc_slack: 0.05,
        }
    }
}

/// Largest operator norm among `Ê_{L_1}⁻¹` and the `Ê_{L_k}` on the path.
pub fn rho_hat_for_path(estimate: &EncoderEstimate, path: &[Lang]) -> Result<f64> {
    let first_inv = estimate.get(&path[0])?.inverse()?;
    let mut rho = first_inv.op_norm();
    for l in path {
        rho = rho.max(estimate.get(l)?.op_norm());
    }
    Ok(rho)
}

/// Measured loss against the chained bound for every unordered pair, in the
/// direction from the lower-indexed language to the higher one. Edge losses
/// are population losses of the composites along the shortest path.
pub fn verify_chain_bound<C: LanguageCodec>(
    estimate: &EncoderEstimate,
    graph: &TranslationGraph,
    codecs: &Codecs<C>,
    sampler: &LatentSampler,
    config: &EvalConfig,
) -> Result<Vec<PairEvalRecord>> {
    let table = shortest_path_and_diameter(graph)?;
    let langs = graph.languages();
    let mut steps = BTreeSet::new();
    for (_, p) in &table.paths {
        for w in p.windows(2) {
            steps.insert((w[0], w[1]));
        }
    }
    let steps: Vec<(usize, usize)> = steps.into_iter().collect();
    let step_losses = steps
        .par_iter()
        .map(|&(i, j)| {
            population_loss(estimate, &langs[i], &langs[j], codecs, sampler, config.m, config.seed).map(|l| l.mean)
        })
        .collect::<Result<Vec<_>>>()?;
    let edge_losses: BTreeMap<(usize, usize), f64> = steps.into_iter().zip(step_losses).collect();
    table
        .paths
        .par_iter()
        .map(|((i, j), p)| {
            let (src, dst) = (&langs[*i], &langs[*j]);
            let measured = population_loss(estimate, src, dst, codecs, sampler, config.m, config.seed)?;
            let path = graph.path_langs(p);
            let losses: Vec<f64> = p.windows(2).map(|w| edge_losses[&(w[0], w[1])]).collect();
            let rho_hat = rho_hat_for_path(estimate, &path)?;
            let bound = 2.0 * rho_hat * rho_hat * losses.iter().sum::<f64>();
            Ok(PairEvalRecord {
                src: src.clone(),
                dst: dst.clone(),
                path_len: p.len() - 1,
                path,
                measured_loss: measured.mean,
                mc_stderr: measured.stderr,
                edge_losses: losses,
                rho_hat,
                holds: measured.mean <= bound * (1.0 + config.mc_slack) + 1e-12,
                bound,
            })
        })
        .collect()
}

fn check_sample_size_args(eps: f64, delta: f64, k: usize, p: usize, m_bound: f64) -> Result<()> {
    let mut bad = Vec::new();
    if !(eps > 0.0 && eps.is_finite()) {
        bad.push(format!("epsilon must be > 0, got {eps}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        bad.push(format!("delta must lie in (0, 1), got {delta}"));
    }
    if k < 1 {
        bad.push("K must be at least 1".to_string());
    }
    if p < 1 {
        bad.push("p must be at least 1".to_string());
    }
    if !(m_bound > 0.0 && m_bound.is_finite()) {
        bad.push(format!("M must be > 0, got {m_bound}"));
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(bad))
    }
}

/// `(16M⁴/ε²) (p ln(16M/ε) + ln(K²/δ))` before rounding up.
pub fn required_sample_size_real(eps: f64, delta: f64, k: usize, p: usize, m_bound: f64) -> Result<f64> {
    check_sample_size_args(eps, delta, k, p, m_bound)?;
    let c = 16.0 * m_bound.powi(4);
    let kf = k as f64;
    Ok(c / (eps * eps) * (p as f64 * (16.0 * m_bound / eps).ln() + (kf * kf / delta).ln()))
}

/// Corpus size per edge that makes every edge's generalization gap at most
/// `eps` simultaneously with probability `1 - δ`.
pub fn required_sample_size(eps: f64, delta: f64, k: usize, p: usize, m_bound: f64) -> Result<u64> {
    Ok(required_sample_size_real(eps, delta, k, p, m_bound)?.ceil().max(0.0) as u64)
}

/// `min(1, 2 exp(log N - n ε² / 16M⁴))`.
pub fn concentration_bound(n: u64, eps: f64, m_bound: f64, log_n: f64) -> f64 {
    (2.0 * (log_n - n as f64 * eps * eps / (16.0 * m_bound.powi(4))).exp()).min(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub trial: usize,
    pub empirical_loss: f64,
    pub population_loss: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub medians: Vec<(usize, f64)>,
    /// Least-squares slope of log median gap on log n. `None` when degenerate.
    pub slope: Option<f64>,
    /// Every median gap is numerically zero, as in the noiseless setting.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub m: usize,
    pub seed: u64,
    pub ridge: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_list.len() < 2 {
            bad.push("n_list needs at least two values".to_string());
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            bad.push("n_list must be strictly ascending".to_string());
        }
        if self.trials < 5 {
            bad.push(format!("trials must be at least 5, got {}", self.trials));
        }
        if self.m < MIN_EVAL_SAMPLES {
            bad.push(format!("m must be at least {MIN_EVAL_SAMPLES}, got {}", self.m));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits the edge at every corpus size and trial, recording the gap between
/// empirical and fresh-sample population loss.
pub fn sample_complexity_sweep<C: LanguageCodec>(
    src: &Lang,
    dst: &Lang,
    codecs: &Codecs<C>,
    sampler: &LatentSampler,
    config: &SweepConfig,
) -> Result<SweepResult> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = config
        .n_list
        .iter()
        .flat_map(|&n| (0..config.trials).map(move |t| (n, t)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, trial)| {
            let (ns, ts) = (n.to_string(), trial.to_string());
            let corpus = generate_corpus(
                src,
                dst,
                codecs,
                n,
                sampler,
                derive_seed(config.seed, &["sweep", &ns, &ts]),
            )?;
            let fit = fit_edge(&corpus, config.ridge)?;
            let pop = population_loss_of_map(
                &fit.map,
                src,
                dst,
                codecs,
                sampler,
                config.m,
                derive_seed(config.seed, &["sweep-eval", &ns, &ts]),
            )?;
            Ok(SweepRow {
                n,
                trial,
                empirical_loss: fit.empirical_loss,
                population_loss: pop.mean,
                gap: (pop.mean - fit.empirical_loss).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let medians: Vec<(usize, f64)> = config
        .n_list
        .iter()
        .map(|&n| {
            let mut gaps: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.gap).collect();
            (n, median(&mut gaps))
        })
        .collect();
    let degenerate = medians.iter().all(|m| m.1 <= 1e-10);
    let slope = if medians.iter().any(|m| m.1 <= 0.0) || degenerate {
        None
    } else {
        let lx: Vec<f64> = medians.iter().map(|m| (m.0 as f64).ln()).collect();
        let ly: Vec<f64> = medians.iter().map(|m| m.1.ln()).collect();
        Some(ols_slope(&lx, &ly))
    };
    Ok(SweepResult {
        rows,
        medians,
        slope,
        degenerate,
    })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation: Pearson correlation of the average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generative::{sample_ground_truth_codecs, AffineCodec, FunctionClassSpec};
    use crate::trainer::{train, TrainConfig};
    use nalgebra::DVector;

    fn one_d_codecs(scale: f64) -> Codecs<AffineCodec> {
        let mk = |s: f64| AffineCodec::new(AffineMap::linear(DMatrix::from_element(1, 1, s))).unwrap();
        BTreeMap::from([(Lang::new("A"), mk(1.0)), (Lang::new("B"), mk(scale))])
    }

    #[test]
    fn one_dimensional_population_loss() {
        let codecs = one_d_codecs(2.0);
        let sampler = LatentSampler::new(1, 1.0);
        let (a, b) = (Lang::new("A"), Lang::new("B"));
        let delta = 0.3;
        let map = AffineMap::linear(DMatrix::from_element(1, 1, 2.0 + delta));
        let est = population_loss_of_map(&map, &a, &b, &codecs, &sampler, 200_000, 1).unwrap();
        let expected = delta * delta / 3.0;
        assert!(
            (est.mean - expected).abs() < 4.0 * est.stderr,
            "{} vs {expected}",
            est.mean
        );
        let exact = AffineMap::linear(DMatrix::from_element(1, 1, 2.0));
        assert!(
            population_loss_of_map(&exact, &a, &b, &codecs, &sampler, 1000, 1)
                .unwrap()
                .mean
                < 1e-24
        );
        assert!(population_loss_of_map(&exact, &a, &b, &codecs, &sampler, 999, 1).is_err());
        assert!(population_loss_of_map(&exact, &a, &Lang::new("Z"), &codecs, &sampler, 1000, 1).is_err());
    }

    #[test]
    fn path_bound_sums_edges() {
        let l: Vec<Lang> = (0..5).map(|i| Lang::new(format!("L{i}"))).collect();
        let mut losses = BTreeMap::new();
        for (i, v) in [0.1, 0.2, 0.3, 0.4].iter().enumerate() {
            losses.insert((l[i].clone(), l[i + 1].clone()), *v);
        }
        let rho = 1.5;
        let b = path_bound(&losses, rho, &l).unwrap();
        assert!((b - 2.0 * rho * rho * 1.0).abs() < 1e-12);
        assert!((path_bound(&losses, rho, &l[..2]).unwrap() - 2.0 * rho * rho * 0.1).abs() < 1e-12);
        // reversed direction is looked up too
        let rev: Vec<Lang> = l.iter().rev().cloned().collect();
        assert!((path_bound(&losses, rho, &rev).unwrap() - b).abs() < 1e-12);
        let zeros: BTreeMap<_, _> = losses.keys().map(|k| (k.clone(), 0.0)).collect();
        assert_eq!(path_bound(&zeros, rho, &l).unwrap(), 0.0);
        assert!(path_bound(&losses, rho, &[l[0].clone(), l[2].clone()]).is_err());
    }

    #[test]
    fn composites_telescope() {
        let spec = FunctionClassSpec::default();
        let g = TranslationGraph::chain(3, 20).unwrap();
        let codecs = sample_ground_truth_codecs(&spec, g.languages(), 2).unwrap();
        let sampler = LatentSampler::from_spec(&spec);
        let corpora: Vec<_> = g
            .edges()
            .iter()
            .map(|e| generate_corpus(&e.a, &e.b, &codecs, 20, &sampler, 2).unwrap())
            .collect();
        let out = train(&g, &corpora, &TrainConfig::default(), &spec).unwrap();
        let l = g.languages();
        let est = &out.estimate;
        let direct = compose_zero_shot(est, &l[0], &l[2]).unwrap();
        let chained = compose_zero_shot(est, &l[1], &l[2])
            .unwrap()
            .after(&compose_zero_shot(est, &l[0], &l[1]).unwrap());
        assert!(direct.max_abs_diff(&chained) < 1e-10);
        assert!(
            compose_zero_shot(est, &l[1], &l[1])
                .unwrap()
                .max_abs_diff(&AffineMap::identity(4))
                < 1e-12
        );
        assert!(
            compose_zero_shot(est, &l[0], &l[1])
                .unwrap()
                .max_abs_diff(&out.fits[0].map)
                < 1e-10
        );
        let x = DVector::from_vec(vec![0.1, 0.2, -0.3, 0.4]);
        let seq = est
            .get(&l[2])
            .unwrap()
            .inverse()
            .unwrap()
            .apply(&est.get(&l[0]).unwrap().apply(&x));
        assert!((direct.apply(&x) - seq).amax() < 1e-12);
    }

    #[test]
    fn noiseless_chain_bound_records() {
        let spec = FunctionClassSpec::default();
        let g = TranslationGraph::chain(4, 30).unwrap();
        let codecs = sample_ground_truth_codecs(&spec, g.languages(), 5).unwrap();
        let sampler = LatentSampler::from_spec(&spec);
        let corpora: Vec<_> = g
            .edges()
            .iter()
            .map(|e| generate_corpus(&e.a, &e.b, &codecs, 30, &sampler, 5).unwrap())
            .collect();
        let out = train(&g, &corpora, &TrainConfig::default(), &spec).unwrap();
        let cfg = EvalConfig {
            m: 2000,
            ..EvalConfig::default()
        };
        let recs = verify_chain_bound(&out.estimate, &g, &codecs, &sampler, &cfg).unwrap();
        assert_eq!(recs.len(), 6);
        assert!(recs.iter().all(|r| r.measured_loss <= 1e-10 && r.holds));
        let adj = recs
            .iter()
            .find(|r| r.src.as_str() == "L0" && r.dst.as_str() == "L1")
            .unwrap();
        assert_eq!(adj.path_len, 1);
        assert!(recs.iter().all(|r| r.rho_hat >= 1.0));
    }

    #[test]
    fn sample_size_scaling() {
        let (eps, delta, k, p, m) = (0.1, 0.05, 4, 20, 1.0);
        let n1 = required_sample_size(eps, delta, k, p, m).unwrap();
        let n2 = required_sample_size(eps / 2.0, delta, k, p, m).unwrap();
        assert!(n2 as f64 >= 4.0 * n1 as f64);
        let r1 = required_sample_size_real(eps, delta, k, p, m).unwrap();
        let r2 = required_sample_size_real(eps, delta, 2 * k, p, m).unwrap();
        let c = 16.0 * m.powi(4);
        let expected = 2.0 * 2f64.ln() * c / (eps * eps);
        assert!(((r2 - r1) - expected).abs() < 1e-6 * expected);
        let mut last = u64::MAX;
        for d in [0.1, 0.3, 0.6, 0.9, 0.99] {
            let n = required_sample_size(eps, d, k, p, m).unwrap();
            assert!(n <= last);
            last = n;
        }
        assert!(matches!(required_sample_size(0.0, 1.5, 0, 0, -1.0), Err(Error::Validation(v)) if v.len() == 5));
    }

    #[test]
    fn concentration_shape() {
        let (eps, m) = (0.5, 1.0);
        assert_eq!(concentration_bound(0, eps, m, 0.0), 1.0);
        assert!(concentration_bound(10_000_000, eps, m, 3.0) < 1e-100);
        // doubling n squares the exponential factor
        let f = |n| concentration_bound(n, eps, m, 0.0) / 2.0;
        assert!((f(400) - f(200).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn formulas_are_mutually_consistent() {
        let (k, p, m) = (5, 20, 2.0);
        for eps in [0.05, 0.1, 0.2] {
            for delta in [0.01, 0.1, 0.5] {
                let n = required_sample_size(eps, delta, k, p, m).unwrap();
                let log_n = p as f64 * (16.0 * m / eps).ln();
                let ratio = concentration_bound(n, eps, m, log_n) / (delta / (k * k) as f64);
                assert!((0.5..=2.0 + 1e-9).contains(&ratio), "{ratio}");
            }
        }
    }

    #[test]
    fn spearman_reference_values() {
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
        // scipy.stats.spearmanr([1,1,2,3], [1,2,2,4]) = 0.8333...
        assert!((spearman(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 4.0]) - 0.8333333333333335).abs() < 1e-12);
    }

    #[test]
    fn slope_and_median() {
        let x: Vec<f64> = (1..6).map(|v| (v as f64).ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| -0.5 * v + 3.0).collect();
        assert!((ols_slope(&x, &y) + 0.5).abs() < 1e-12);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn noiseless_sweep_is_degenerate() {
        let spec = FunctionClassSpec::new(2, 1.0, 2.0, 1.0).unwrap();
        let ls = [Lang::new("A"), Lang::new("B")];
        let codecs = sample_ground_truth_codecs(&spec, &ls, 1).unwrap();
        let cfg = SweepConfig {
            n_list: vec![8, 16],
            trials: 5,
            m: 1000,
            seed: 3,
            ridge: 1e-10,
        };
        let r = sample_complexity_sweep(&ls[0], &ls[1], &codecs, &LatentSampler::from_spec(&spec), &cfg).unwrap();
        assert!(r.degenerate);
        assert!(r.slope.is_none());
        assert!(r.rows.iter().all(|row| row.gap >= 0.0 && row.gap <= 1e-10));
    }

    #[test]
    fn sweep_config_validation() {
        let cfg = SweepConfig {
            n_list: vec![64, 32],
            trials: 2,
            m: 10,
            seed: 0,
            ridge: 0.0,
        };
        match cfg.validate() {
            Err(Error::Validation(v)) => {
                assert_eq!(v.len(), 3);
                assert!(v[0].contains("n_list"));
            }
            other => panic!("{other:?}"),
        }
    }
}
