//! Empirical risk minimization over a translation graph.
//!
//! Each edge gets its own least-squares affine map. Only composites
//! `Ê_{L'}⁻¹ ∘ Ê_L` are identifiable, so per-language encoders are pinned by
//! setting one anchor encoder to the identity and propagating the edge maps
//! along a breadth-first spanning tree. An optional refinement then lowers the
//! summed edge loss by cycling block updates over the non-anchor languages.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::AffineMap;
use crate::discrete::Lang;
use crate::error::{Error, Result};
use crate::generative::{clip_singular_values, AlignedCorpus, FunctionClassSpec};
use crate::graph::TranslationGraph;

/// Condition number of the centered Gram matrix above which ridge kicks in.
pub const RIDGE_CONDITION: f64 = 1e12;
pub const MIN_SINGULAR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFit {
    pub source: Lang,
    pub target: Lang,
    pub map: AffineMap,
    pub empirical_loss: f64,
    pub n: usize,
    pub ridge_used: bool,
}

/// `(1/n) Σ ‖T x_i - y_i‖²`.
pub fn mean_squared_residual(map: &AffineMap, xs: &DMatrix<f64>, ys: &DMatrix<f64>) -> f64 {
    (map.apply_batch(xs) - ys).norm_squared() / xs.ncols() as f64
}

/// Least-squares affine map from the corpus sources to its targets.
pub fn fit_edge(corpus: &AlignedCorpus, ridge: f64) -> Result<EdgeFit> {
    if ridge.is_nan() || ridge < 0.0 {
        return Err(Error::arg(format!("ridge must be >= 0, got {ridge}")));
    }
    let (d, n) = (corpus.dim(), corpus.n());
    if n < d + 1 {
        return Err(Error::InsufficientData(format!(
            "edge {}-{} has {n} pairs but an affine fit in dimension {d} needs at least {}",
            corpus.source,
            corpus.target,
            d + 1
        )));
    }
    // centering separates the offset from the linear part
    let x_mean = corpus.xs.column_mean();
    let y_mean = corpus.ys.column_mean();
    let mut xc = corpus.xs.clone();
    let mut yc = corpus.ys.clone();
    for mut c in xc.column_iter_mut() {
        c -= &x_mean;
    }
    for mut c in yc.column_iter_mut() {
        c -= &y_mean;
    }
    let mut gram = &xc * xc.transpose();
    let cross = &yc * xc.transpose();
    let sv = gram.singular_values();
    let ill = sv.min() <= 0.0 || sv.max() / sv.min() > RIDGE_CONDITION;
    if ill {
        for i in 0..d {
            gram[(i, i)] += ridge * n as f64;
        }
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Conditioning(format!(
            "design for edge {}-{} is singular even with ridge {ridge}",
            corpus.source, corpus.target
        ))
    })?;
    let w = chol.solve(&cross.transpose()).transpose();
    if !w.iter().all(|x| x.is_finite()) {
        return Err(Error::Conditioning("non-finite least-squares solution".into()));
    }
    let b = &y_mean - &w * &x_mean;
    let map = AffineMap { w, b };
    let empirical_loss = mean_squared_residual(&map, &corpus.xs, &corpus.ys);
    Ok(EdgeFit {
        source: corpus.source.clone(),
        target: corpus.target.clone(),
        map,
        empirical_loss,
        n,
        ridge_used: ill,
    })
}

/// Singular values clipped into `[1/ρ, ρ]`, offset pulled back into the offset ball.
pub fn project_to_class(map: &AffineMap, spec: &FunctionClassSpec) -> AffineMap {
    let w = clip_singular_values(map.w.clone(), 1.0 / spec.rho, spec.rho);
    let norm = map.b.norm();
    let b = if norm > spec.offset_bound {
        &map.b * (spec.offset_bound / norm)
    } else {
        map.b.clone()
    };
    AffineMap { w, b }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Defaults to the first language of the graph.
    pub anchor: Option<Lang>,
    pub sweeps: usize,
    pub ridge: f64,
    pub project: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            anchor: None,
            sweeps: 0,
            ridge: 1e-10,
            project: false,
        }
    }
}

/// Per-language encoders with one anchor fixed to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderEstimate {
    pub anchor: Lang,
    pub encoders: BTreeMap<Lang, AffineMap>,
}

impl EncoderEstimate {
    pub fn get(&self, lang: &Lang) -> Result<&AffineMap> {
        self.encoders
            .get(lang)
            .ok_or_else(|| Error::arg(format!("no encoder for language {lang}")))
    }

    /// `Ê_dst⁻¹ ∘ Ê_src`.
    pub fn composite(&self, src: &Lang, dst: &Lang) -> Result<AffineMap> {
        let e_src = self.get(src)?;
        let e_dst = self.get(dst)?;
        e_dst.solve_after(e_src)
    }

    /// Every encoder replaced by `f ∘ Ê_L`. Composites are unchanged.
    pub fn gauge(&self, f: &AffineMap) -> EncoderEstimate {
        EncoderEstimate {
            anchor: self.anchor.clone(),
            encoders: self.encoders.iter().map(|(l, e)| (l.clone(), f.after(e))).collect(),
        }
    }

    pub fn check_invertible(&self) -> Result<()> {
        for (l, e) in &self.encoders {
            let s = e.min_singular_value();
            if s < MIN_SINGULAR {
                return Err(Error::Conditioning(format!("encoder for {l} has singular value {s:e}")));
            }
        }
        Ok(())
    }
}

/// Map from `from` sentences to `to` sentences, inverting the fit if it was
/// made in the other direction.
fn oriented(fits: &[EdgeFit], from: &Lang, to: &Lang) -> Result<AffineMap> {
    for f in fits {
        if &f.source == from && &f.target == to {
            return Ok(f.map.clone());
        }
        if &f.source == to && &f.target == from {
            return f.map.inverse();
        }
    }
    Err(Error::Graph(format!("no fitted map for edge {from}-{to}")))
}

/// `Ê_anchor = I`, and `Ê_child = Ê_parent ∘ T̂_{child→parent}` along the
/// breadth-first tree rooted at the anchor.
pub fn anchor_spanning_tree(graph: &TranslationGraph, fits: &[EdgeFit], anchor: &Lang) -> Result<EncoderEstimate> {
    graph.require_connected()?;
    let root = graph.index_of(anchor)?;
    let d = fits
        .first()
        .map(|f| f.map.dim())
        .ok_or_else(|| Error::InsufficientData("no edge fits".into()))?;
    let langs = graph.languages();
    let parents = graph.bfs_parents(root);
    let mut order: Vec<usize> = (0..langs.len()).collect();
    // parents must be resolved before children: sort by depth
    let depth = |mut i: usize| {
        let mut k = 0;
        while i != root {
            i = parents[i].expect("connected");
            k += 1;
        }
        k
    };
    order.sort_by_key(|&i| (depth(i), i));
    let mut encoders = BTreeMap::new();
    encoders.insert(anchor.clone(), AffineMap::identity(d));
    for &i in order.iter().skip(1) {
        let p = parents[i].expect("connected");
        let t = oriented(fits, &langs[i], &langs[p])?;
        if t.min_singular_value() < MIN_SINGULAR {
            return Err(Error::Conditioning(format!(
                "edge map {}-{} is not invertible",
                langs[i], langs[p]
            )));
        }
        let enc = encoders[&langs[p]].after(&t);
        encoders.insert(langs[i].clone(), enc);
    }
    Ok(EncoderEstimate {
        anchor: anchor.clone(),
        encoders,
    })
}

/// `(1/n) Σ ‖Ê_{L'}⁻¹(Ê_L(x_i)) - x'_i‖²` for the corpus of edge `(L, L')`.
pub fn empirical_edge_loss(estimate: &EncoderEstimate, corpus: &AlignedCorpus) -> Result<f64> {
    let t = estimate.composite(&corpus.source, &corpus.target)?;
    Ok(mean_squared_residual(&t, &corpus.xs, &corpus.ys))
}

pub fn total_objective(estimate: &EncoderEstimate, corpora: &[AlignedCorpus]) -> Result<f64> {
    corpora.iter().map(|c| empirical_edge_loss(estimate, c)).sum()
}

#[derive(Clone, Debug)]
pub struct RefineOutcome {
    pub estimate: EncoderEstimate,
    /// Objective before the first sweep and after each sweep.
    pub objectives: Vec<f64>,
}

/// Terms of the summed loss that involve one language's map `Θ = [W | b]`.
/// Each term has residuals `r_i` with `dr_i = P dΘ w_i` for a fixed `P`.
struct BlockTerm {
    p: DMatrix<f64>,
    w: DMatrix<f64>,
    r: DMatrix<f64>,
    weight: f64,
}

fn augment(xs: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, n) = xs.shape();
    let mut out = DMatrix::from_element(d + 1, n, 1.0);
    out.rows_mut(0, d).copy_from(xs);
    out
}

fn block_terms(
    estimate: &EncoderEstimate,
    lang: &Lang,
    map: &AffineMap,
    corpora: &[AlignedCorpus],
) -> Result<Vec<BlockTerm>> {
    let mut terms = Vec::new();
    let w_inv = map.inverse()?;
    for c in corpora {
        let weight = 1.0 / c.n() as f64;
        if &c.source == lang && &c.target != lang {
            let other_inv = estimate.get(&c.target)?.inverse()?;
            let pred = other_inv.after(map).apply_batch(&c.xs);
            terms.push(BlockTerm {
                p: other_inv.w.clone(),
                w: augment(&c.xs),
                r: pred - &c.ys,
                weight,
            });
        } else if &c.target == lang && &c.source != lang {
            let v = w_inv.after(estimate.get(&c.source)?).apply_batch(&c.xs);
            terms.push(BlockTerm {
                p: -&w_inv.w,
                w: augment(&v),
                r: &v - &c.ys,
                weight,
            });
        }
    }
    Ok(terms)
}

fn block_objective(terms: &[BlockTerm]) -> f64 {
    terms.iter().map(|t| t.weight * t.r.norm_squared()).sum()
}

/// Gauss-Newton on one language's map with the others held fixed. Only
/// steps that lower the block objective are accepted.
fn refine_block(estimate: &EncoderEstimate, lang: &Lang, corpora: &[AlignedCorpus]) -> Result<AffineMap> {
    let mut map = estimate.get(lang)?.clone();
    let d = map.dim();
    let mut terms = block_terms(estimate, lang, &map, corpora)?;
    let mut f = block_objective(&terms);
    for _ in 0..20 {
        let p = d * (d + 1);
        let mut h = DMatrix::zeros(p, p);
        let mut g = DMatrix::zeros(d, d + 1);
        for t in &terms {
            let ww = &t.w * t.w.transpose();
            let pp = t.p.transpose() * &t.p;
            h += ww.kronecker(&pp) * t.weight;
            g += (t.p.transpose() * &t.r * t.w.transpose()) * t.weight;
        }
        let damping = 1e-12 * h.diagonal().max().max(1e-300);
        for i in 0..p {
            h[(i, i)] += damping;
        }
        let Some(chol) = h.cholesky() else { break };
        let step = chol.solve(&DVector::from_column_slice(g.as_slice()));
        let step = DMatrix::from_column_slice(d, d + 1, step.as_slice());
        let mut accepted = None;
        let mut alpha = 1.0;
        for _ in 0..30 {
            let theta = AffineMap {
                w: &map.w - step.columns(0, d) * alpha,
                b: &map.b - step.column(d) * alpha,
            };
            if theta.min_singular_value() >= MIN_SINGULAR {
                let cand = block_terms(estimate, lang, &theta, corpora)?;
                let fc = block_objective(&cand);
                if fc < f {
                    accepted = Some((theta, cand, fc));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((theta, cand, fc)) = accepted else { break };
        let gain = f - fc;
        map = theta;
        terms = cand;
        f = fc;
        if gain <= 1e-15 * (1.0 + f) {
            break;
        }
    }
    Ok(map)
}

/// Cycles over non-anchor languages in graph order, re-solving each map
/// with the rest fixed. Fails if a sweep ever raises the objective.
pub fn joint_refine(
    graph: &TranslationGraph,
    estimate: &EncoderEstimate,
    corpora: &[AlignedCorpus],
    sweeps: usize,
) -> Result<RefineOutcome> {
    estimate.check_invertible()?;
    let mut est = estimate.clone();
    let mut objectives = vec![total_objective(&est, corpora)?];
    for _ in 0..sweeps {
        for lang in graph.languages() {
            if lang == &est.anchor {
                continue;
            }
            let updated = refine_block(&est, lang, corpora)?;
            est.encoders.insert(lang.clone(), updated);
        }
        let obj = total_objective(&est, corpora)?;
        let prev = *objectives.last().expect("non-empty");
        if obj > prev + 1e-9 {
            return Err(Error::InternalConsistency(format!(
                "refinement raised the objective from {prev:e} to {obj:e}"
            )));
        }
        objectives.push(obj);
    }
    Ok(RefineOutcome {
        estimate: est,
        objectives,
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub fits: Vec<EdgeFit>,
    pub estimate: EncoderEstimate,
    pub objectives: Vec<f64>,
}

/// Fits every edge, anchors, and optionally refines. `corpora` must hold
/// one corpus per graph edge.
pub fn train(
    graph: &TranslationGraph,
    corpora: &[AlignedCorpus],
    config: &TrainConfig,
    spec: &FunctionClassSpec,
) -> Result<TrainOutcome> {
    graph.require_connected()?;
    for e in graph.edges() {
        let present = corpora
            .iter()
            .any(|c| (c.source == e.a && c.target == e.b) || (c.source == e.b && c.target == e.a));
        if !present {
            return Err(Error::arg(format!("missing corpus for edge {}-{}", e.a, e.b)));
        }
    }
    let mut fits = corpora
        .par_iter()
        .map(|c| fit_edge(c, config.ridge))
        .collect::<Result<Vec<_>>>()?;
    if config.project {
        for f in &mut fits {
            f.map = project_to_class(&f.map, spec);
        }
    }
    let anchor = config.anchor.clone().unwrap_or_else(|| graph.languages()[0].clone());
    let estimate = anchor_spanning_tree(graph, &fits, &anchor)?;
    let refined = joint_refine(graph, &estimate, corpora, config.sweeps)?;
    Ok(TrainOutcome {
        fits,
        estimate: refined.estimate,
        objectives: refined.objectives,
    })
}
