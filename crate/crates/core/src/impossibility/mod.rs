//! Lower bounds on the translation error of any decoder that sits on top of a
//! language-invariant representation, plus the machinery to check them.
//!
//! Two instance shapes are supported. A [`TwoToOneInstance`] has two source
//! languages feeding one target; a [`ManyToManyInstance`] carries a joint
//! (parallel) distribution for every translated ordered pair. The bounds only
//! depend on how far apart the *target-side* marginals are, which is why a
//! representation that hides the source language cannot do well on both tasks.

mod brute;
pub mod random;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::discrete::{pushforward, tv_distance, FiniteDistribution, Lang, Sentence, Translator, PROB_TOL};
use crate::error::{Error, Result};

pub use brute::{brute_force_min_error, for_each_candidate, BruteForceBest, BruteForceOutcome, Candidate, Objective};

/// Representation atoms are plain indices into `Z = {0, .., |Z|-1}`.
pub type ZAtom = usize;

/// Weighted aligned pairs `(source sentence, target sentence, mass)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    pairs: Vec<(Sentence, Sentence, f64)>,
}

impl JointDistribution {
    pub fn new(pairs: Vec<(Sentence, Sentence, f64)>) -> Result<Self> {
        let joint = JointDistribution { pairs };
        joint.source_marginal()?;
        Ok(joint)
    }

    /// Aligns a source marginal through a deterministic ground-truth map.
    pub fn from_marginal(
        marginal: &FiniteDistribution<Sentence>,
        f_star: &Translator<Sentence, Sentence>,
    ) -> Result<Self> {
        let pairs = marginal
            .iter()
            .map(|(s, w)| Ok((s.clone(), f_star.apply(s)?.clone(), w)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Sentence, &Sentence, f64)> + '_ {
        self.pairs.iter().map(|(s, t, w)| (s, t, *w))
    }

    pub fn source_marginal(&self) -> Result<FiniteDistribution<Sentence>> {
        marginal(self.pairs.iter().map(|(s, _, w)| (s.clone(), *w)))
    }

    pub fn target_marginal(&self) -> Result<FiniteDistribution<Sentence>> {
        marginal(self.pairs.iter().map(|(_, t, w)| (t.clone(), *w)))
    }
}

fn marginal(entries: impl Iterator<Item = (Sentence, f64)>) -> Result<FiniteDistribution<Sentence>> {
    let mut acc: BTreeMap<Sentence, f64> = BTreeMap::new();
    for (s, w) in entries {
        *acc.entry(s).or_insert(0.0) += w;
    }
    FiniteDistribution::new(acc.into_iter().collect())
}

/// Two source languages translated into one target.
#[derive(Clone, Debug)]
pub struct TwoToOneInstance {
    pub sources: [Lang; 2],
    pub target: Lang,
    pub marginals: [FiniteDistribution<Sentence>; 2],
    pub translators: [Translator<Sentence, Sentence>; 2],
    /// Sentence set of the target language, the decoder's codomain.
    pub target_sentences: Vec<Sentence>,
}

impl TwoToOneInstance {
    pub fn new(
        sources: [Lang; 2],
        target: Lang,
        marginals: [FiniteDistribution<Sentence>; 2],
        translators: [Translator<Sentence, Sentence>; 2],
        target_sentences: Vec<Sentence>,
    ) -> Result<Self> {
        if sources[0] == sources[1] {
            return Err(Error::domain("source languages must be distinct"));
        }
        for i in 0..2 {
            for (s, _) in marginals[i].iter() {
                if s.source_tag != sources[i] {
                    return Err(Error::domain(format!("sentence {s} is not in {}", sources[i])));
                }
                let image = translators[i].apply(s)?;
                if image.source_tag != target {
                    return Err(Error::domain(format!("image {image} is not in {target}")));
                }
            }
        }
        let mut vocab: BTreeSet<Sentence> = target_sentences.into_iter().collect();
        for tr in &translators {
            vocab.extend(tr.iter().map(|(_, t)| t.clone()));
        }
        Ok(TwoToOneInstance {
            sources,
            target,
            marginals,
            translators,
            target_sentences: vocab.into_iter().collect(),
        })
    }

    /// `f*_i ♯ D_i` for both sources.
    pub fn target_marginals(&self) -> Result<[FiniteDistribution<Sentence>; 2]> {
        Ok([
            pushforward(&self.marginals[0], &self.translators[0])?,
            pushforward(&self.marginals[1], &self.translators[1])?,
        ])
    }

    pub fn sentence_count(&self) -> usize {
        self.marginals[0].atoms().len() + self.marginals[1].atoms().len()
    }

    /// The same instance seen as a many-to-many instance with two joints.
    pub fn to_many_to_many(&self) -> Result<ManyToManyInstance> {
        let languages = vec![self.sources[0].clone(), self.sources[1].clone(), self.target.clone()];
        let mut joints = BTreeMap::new();
        let mut translators = BTreeMap::new();
        for i in 0..2 {
            let key = (self.sources[i].clone(), self.target.clone());
            joints.insert(
                key.clone(),
                JointDistribution::from_marginal(&self.marginals[i], &self.translators[i])?,
            );
            translators.insert(key, self.translators[i].clone());
        }
        let mut vocab = BTreeMap::new();
        vocab.insert(self.target.clone(), self.target_sentences.clone());
        ManyToManyInstance::new(languages, vocab, joints, translators)
    }
}

/// Joint distributions for a set of ordered language pairs.
#[derive(Clone, Debug)]
pub struct ManyToManyInstance {
    languages: Vec<Lang>,
    vocab: BTreeMap<Lang, Vec<Sentence>>,
    joints: BTreeMap<(Lang, Lang), JointDistribution>,
    translators: BTreeMap<(Lang, Lang), Translator<Sentence, Sentence>>,
}

impl ManyToManyInstance {
    /// Validates that every joint is generated by its ground-truth translator
    /// and that sentences carry the right language tags. When more than one
    /// target language is present every source sentence must carry its
    /// target prefix, which keeps the source sets of different tasks disjoint.
    pub fn new(
        languages: Vec<Lang>,
        vocab: BTreeMap<Lang, Vec<Sentence>>,
        joints: BTreeMap<(Lang, Lang), JointDistribution>,
        translators: BTreeMap<(Lang, Lang), Translator<Sentence, Sentence>>,
    ) -> Result<Self> {
        let known: BTreeSet<&Lang> = languages.iter().collect();
        if known.len() != languages.len() {
            return Err(Error::domain("duplicate language"));
        }
        let targets: BTreeSet<&Lang> = joints.keys().map(|(_, k)| k).collect();
        let prefixed = targets.len() > 1;
        for ((src, tgt), joint) in &joints {
            if !known.contains(src) || !known.contains(tgt) {
                return Err(Error::domain(format!("joint {src}->{tgt} names an unknown language")));
            }
            let f_star = translators
                .get(&(src.clone(), tgt.clone()))
                .ok_or_else(|| Error::domain(format!("missing translator {src}->{tgt}")))?;
            for (s, t, _) in joint.pairs() {
                if &s.source_tag != src {
                    return Err(Error::domain(format!(
                        "sentence {s} in joint {src}->{tgt} is not in {src}"
                    )));
                }
                if prefixed && s.target_tag.as_ref() != Some(tgt) {
                    return Err(Error::domain(format!("sentence {s} lacks the <{tgt}> prefix")));
                }
                if &t.source_tag != tgt {
                    return Err(Error::domain(format!("target {t} is not in {tgt}")));
                }
                if f_star.apply(s)? != t {
                    return Err(Error::domain(format!(
                        "joint {src}->{tgt} disagrees with its translator at {s}"
                    )));
                }
            }
        }
        let mut vocab = vocab;
        for ((_, tgt), joint) in &joints {
            let entry = vocab.entry(tgt.clone()).or_default();
            let mut set: BTreeSet<Sentence> = entry.drain(..).collect();
            set.extend(joint.pairs().map(|(_, t, _)| t.clone()));
            entry.extend(set);
        }
        Ok(ManyToManyInstance {
            languages,
            vocab,
            joints,
            translators,
        })
    }

    pub fn languages(&self) -> &[Lang] {
        &self.languages
    }

    pub fn language_count(&self) -> usize {
        self.languages.len()
    }

    pub fn joints(&self) -> impl Iterator<Item = (&(Lang, Lang), &JointDistribution)> + '_ {
        self.joints.iter()
    }

    pub fn joint(&self, src: &Lang, tgt: &Lang) -> Option<&JointDistribution> {
        self.joints.get(&(src.clone(), tgt.clone()))
    }

    pub fn translator(&self, src: &Lang, tgt: &Lang) -> Result<&Translator<Sentence, Sentence>> {
        self.translators
            .get(&(src.clone(), tgt.clone()))
            .ok_or_else(|| Error::domain(format!("no ground-truth translator {src}->{tgt}")))
    }

    pub fn target_vocab(&self, lang: &Lang) -> &[Sentence] {
        self.vocab.get(lang).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Target languages that receive at least one joint, in sorted order.
    pub fn targets(&self) -> Vec<Lang> {
        let set: BTreeSet<&Lang> = self.joints.keys().map(|(_, k)| k).collect();
        set.into_iter().cloned().collect()
    }

    /// Joints translating into `target`, ordered by source language.
    pub fn joints_into<'a>(&'a self, target: &'a Lang) -> impl Iterator<Item = (&'a Lang, &'a JointDistribution)> + 'a {
        self.joints
            .iter()
            .filter(move |((_, k), _)| k == target)
            .map(|((i, _), j)| (i, j))
    }

    /// Every source sentence across all joints, deduplicated and sorted.
    pub fn source_sentences(&self) -> Vec<Sentence> {
        let set: BTreeSet<Sentence> = self
            .joints
            .values()
            .flat_map(|j| j.pairs().map(|(s, _, _)| s.clone()))
            .collect();
        set.into_iter().collect()
    }
}

/// Encoder into a representation set split into one block per target language.
#[derive(Clone, Debug)]
pub struct PartitionedRepresentation {
    blocks: BTreeMap<Lang, BTreeSet<ZAtom>>,
    encoder: Translator<Sentence, ZAtom>,
}

impl PartitionedRepresentation {
    pub fn new(blocks: BTreeMap<Lang, BTreeSet<ZAtom>>, encoder: Translator<Sentence, ZAtom>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for atoms in blocks.values() {
            for z in atoms {
                if !seen.insert(*z) {
                    return Err(Error::domain(format!("atom {z} appears in two blocks")));
                }
            }
        }
        for (s, z) in encoder.iter() {
            if !seen.contains(z) {
                return Err(Error::domain(format!("{s} is encoded to atom {z} outside every block")));
            }
        }
        Ok(PartitionedRepresentation { blocks, encoder })
    }

    pub fn encoder(&self) -> &Translator<Sentence, ZAtom> {
        &self.encoder
    }

    pub fn block(&self, lang: &Lang) -> Option<&BTreeSet<ZAtom>> {
        self.blocks.get(lang)
    }
}

/// Whether every pair of pushforwards `g♯D_i`, `g♯D_j` is within `epsilon` in TV.
pub fn check_epsilon_universal(
    g: &Translator<Sentence, ZAtom>,
    marginals: &[FiniteDistribution<Sentence>],
    epsilon: f64,
) -> Result<bool> {
    if marginals.len() < 2 {
        return Err(Error::arg("epsilon-universality needs at least two marginals"));
    }
    check_epsilon(epsilon)?;
    let pushed = marginals
        .iter()
        .map(|d| pushforward(d, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_within(&pushed, epsilon))
}

fn pairwise_within<A: Ord + Clone>(dists: &[FiniteDistribution<A>], epsilon: f64) -> bool {
    for i in 0..dists.len() {
        for j in (i + 1)..dists.len() {
            if tv_distance(&dists[i], &dists[j]) > epsilon + PROB_TOL {
                return false;
            }
        }
    }
    true
}

/// Many-to-many universality: for every target, each source marginal's
/// pushforward lives inside that target's block and the pushforwards are
/// pairwise within `epsilon`. Leaking support is a `false`, not an error.
pub fn check_epsilon_universal_partitioned(
    rep: &PartitionedRepresentation,
    instance: &ManyToManyInstance,
    epsilon: f64,
) -> Result<bool> {
    check_epsilon(epsilon)?;
    for target in instance.targets() {
        let Some(block) = rep.block(&target) else {
            return Ok(false);
        };
        let mut pushed = Vec::new();
        for (_, joint) in instance.joints_into(&target) {
            let p = pushforward(&joint.source_marginal()?, rep.encoder())?;
            if p.positive_support().any(|z| !block.contains(z)) {
                return Ok(false);
            }
            pushed.push(p);
        }
        if !pairwise_within(&pushed, epsilon) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::arg(format!(
            "epsilon must be a finite value >= 0, got {epsilon}"
        )));
    }
    Ok(())
}

/// `max(0, d_TV(f*_0♯D_0, f*_1♯D_1) - epsilon)`: no epsilon-universal encoder
/// and decoder can push the summed error of the two tasks below this.
pub fn two_to_one_bound(instance: &TwoToOneInstance, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let [p, q] = instance.target_marginals()?;
    Ok((tv_distance(&p, &q) - epsilon).max(0.0))
}

/// TV between the target marginals of two tasks sharing a target.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairTv {
    pub target: Lang,
    pub source_a: Lang,
    pub source_b: Lang,
    pub tv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManyToManyBounds {
    pub max_bound: f64,
    pub avg_bound: f64,
    pub tv_max: f64,
    pub pair_tvs: Vec<PairTv>,
}

/// Target-marginal TV for every target and every unordered pair of sources.
pub fn target_pair_tvs(instance: &ManyToManyInstance) -> Result<Vec<PairTv>> {
    let mut out = Vec::new();
    for target in instance.targets() {
        let margs = instance
            .joints_into(&target)
            .map(|(src, j)| Ok((src.clone(), j.target_marginal()?)))
            .collect::<Result<Vec<_>>>()?;
        for a in 0..margs.len() {
            for b in (a + 1)..margs.len() {
                out.push(PairTv {
                    target: target.clone(),
                    source_a: margs[a].0.clone(),
                    source_b: margs[b].0.clone(),
                    tv: tv_distance(&margs[a].1, &margs[b].1),
                });
            }
        }
    }
    Ok(out)
}

/// Lower bounds on the worst-task error and on the `1/K²`-normalized error sum.
pub fn many_to_many_bounds(instance: &ManyToManyInstance, epsilon: f64) -> Result<ManyToManyBounds> {
    check_epsilon(epsilon)?;
    let k = instance.language_count();
    if k < 2 {
        return Err(Error::arg("many-to-many bounds need at least two languages"));
    }
    let pair_tvs = target_pair_tvs(instance)?;
    let tv_max = pair_tvs.iter().map(|p| p.tv).fold(0.0, f64::max);
    let tv_sum: f64 = pair_tvs.iter().map(|p| p.tv).sum();
    let kf = k as f64;
    Ok(ManyToManyBounds {
        max_bound: (0.5 * tv_max - 0.5 * epsilon).max(0.0),
        avg_bound: (tv_sum / (kf * kf * (kf - 1.0)) - 0.5 * epsilon).max(0.0),
        tv_max,
        pair_tvs,
    })
}

/// Two sentences per language; the target marginals are
/// `((1+δ)/2, (1-δ)/2)` and its mirror image, so their TV is exactly `δ`.
pub fn make_worst_case(delta: f64) -> Result<TwoToOneInstance> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::arg(format!("delta must lie in [0, 1], got {delta}")));
    }
    let (l0, l1, l) = (Lang::new("L0"), Lang::new("L1"), Lang::new("L"));
    let hi = 0.5 * (1.0 + delta);
    let lo = 0.5 * (1.0 - delta);
    let x = Sentence::new(l.clone(), "x");
    let y = Sentence::new(l.clone(), "y");
    let mk = |lang: &Lang| {
        let a = Sentence::new(lang.clone(), "a");
        let b = Sentence::new(lang.clone(), "b");
        (a, b)
    };
    let (a0, b0) = mk(&l0);
    let (a1, b1) = mk(&l1);
    let d0 = FiniteDistribution::new(vec![(a0.clone(), hi), (b0.clone(), lo)])?;
    let d1 = FiniteDistribution::new(vec![(a1.clone(), hi), (b1.clone(), lo)])?;
    let f0 = Translator::from_pairs([(a0, x.clone()), (b0, y.clone())]);
    let f1 = Translator::from_pairs([(a1, y.clone()), (b1, x.clone())]);
    TwoToOneInstance::new([l0, l1], l, [d0, d1], [f0, f1], vec![x, y])
}

/// Lower bounds plus an optional exhaustive minimum, as emitted by the CLI.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub instance_id: String,
    pub epsilon: f64,
    pub pair_tvs: Vec<PairTv>,
    pub tv_max: f64,
    /// `max(0, tv_max - ε)`: the two-task sum bound for the worst pair.
    pub bound_sum: f64,
    pub bound_max: f64,
    pub bound_avg: f64,
    pub brute_force: Option<BruteForceSummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BruteForceSummary {
    pub objective: Objective,
    pub z_size: usize,
    pub feasible: bool,
    pub value: Option<f64>,
    pub encoder: Option<BTreeMap<String, ZAtom>>,
    pub decoder: Option<BTreeMap<ZAtom, String>>,
    pub holds: bool,
}

impl BoundReport {
    pub fn compute(instance_id: &str, instance: &ManyToManyInstance, epsilon: f64) -> Result<Self> {
        let b = many_to_many_bounds(instance, epsilon)?;
        Ok(BoundReport {
            instance_id: instance_id.to_string(),
            epsilon,
            bound_sum: (b.tv_max - epsilon).max(0.0),
            bound_max: b.max_bound,
            bound_avg: b.avg_bound,
            tv_max: b.tv_max,
            pair_tvs: b.pair_tvs,
            brute_force: None,
        })
    }

    /// The bound the given objective is compared against.
    pub fn bound_for(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Sum => self.bound_sum,
            Objective::Max => self.bound_max,
            Objective::Avg => self.bound_avg,
        }
    }

    /// Runs the exhaustive search and records whether it respects the bound.
    pub fn attach_brute_force(
        &mut self,
        instance: &ManyToManyInstance,
        z_size: usize,
        objective: Objective,
    ) -> Result<()> {
        let outcome = brute_force_min_error(instance, z_size, self.epsilon, objective)?;
        let bound = self.bound_for(objective);
        let summary = match outcome.best {
            Some(best) => BruteForceSummary {
                objective,
                z_size,
                feasible: true,
                value: Some(best.value),
                holds: best.value >= bound - 1e-9,
                encoder: Some(best.encoder.iter().map(|(s, z)| (s.to_string(), *z)).collect()),
                decoder: Some(best.decoder.iter().map(|(z, s)| (*z, s.to_string())).collect()),
            },
            None => BruteForceSummary {
                objective,
                z_size,
                feasible: false,
                value: None,
                holds: true,
                encoder: None,
                decoder: None,
            },
        };
        self.brute_force = Some(summary);
        Ok(())
    }

    pub fn holds(&self) -> bool {
        self.brute_force.as_ref().is_none_or(|b| b.holds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_instance(d0: [f64; 2], d1: [f64; 2]) -> (Translator<Sentence, ZAtom>, [FiniteDistribution<Sentence>; 2]) {
        let a0 = Sentence::new("L0", "a");
        let b0 = Sentence::new("L0", "b");
        let a1 = Sentence::new("L1", "a");
        let b1 = Sentence::new("L1", "b");
        let g = Translator::from_pairs([(a0.clone(), 0), (a1.clone(), 0), (b0.clone(), 1), (b1.clone(), 1)]);
        let m0 = FiniteDistribution::new(vec![(a0, d0[0]), (b0, d0[1])]).unwrap();
        let m1 = FiniteDistribution::new(vec![(a1, d1[0]), (b1, d1[1])]).unwrap();
        (g, [m0, m1])
    }

    #[test]
    fn constant_encoder_is_universal() {
        let (g, m) = pair_instance([0.9, 0.1], [0.1, 0.9]);
        let c = Translator::constant(g.domain(), 7);
        assert!(check_epsilon_universal(&c, &m, 0.0).unwrap());
    }

    #[test]
    fn merged_images_differ_by_point_eight() {
        let (g, m) = pair_instance([0.9, 0.1], [0.1, 0.9]);
        assert!(!check_epsilon_universal(&g, &m, 0.5).unwrap());
        assert!(check_epsilon_universal(&g, &m, 0.8).unwrap());
    }

    #[test]
    fn universality_boundary_is_inclusive() {
        let (g, m) = pair_instance([0.75, 0.25], [0.5, 0.5]);
        assert!(check_epsilon_universal(&g, &m, 0.25).unwrap());
        assert!(!check_epsilon_universal(&g, &m, 0.2499).unwrap());
    }

    #[test]
    fn universality_needs_two_marginals() {
        let (g, m) = pair_instance([0.5, 0.5], [0.5, 0.5]);
        assert!(matches!(
            check_epsilon_universal(&g, &m[..1], 0.1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn worst_case_bounds() {
        for (delta, expected) in [(0.0, 0.0), (1.0, 1.0), (0.8, 0.8)] {
            let inst = make_worst_case(delta).unwrap();
            assert!((two_to_one_bound(&inst, 0.0).unwrap() - expected).abs() < PROB_TOL);
        }
        assert!(make_worst_case(1.5).is_err());
        assert!(make_worst_case(-0.1).is_err());
    }

    #[test]
    fn two_to_one_bound_clips() {
        let inst = make_worst_case(0.4).unwrap();
        assert_eq!(two_to_one_bound(&inst, 0.5).unwrap(), 0.0);
        assert!((two_to_one_bound(&inst, 0.1).unwrap() - 0.3).abs() < PROB_TOL);
    }

    #[test]
    fn identical_target_marginals_give_zero_bound() {
        let l0 = Lang::new("L0");
        let l1 = Lang::new("L1");
        let l = Lang::new("L");
        let a0 = Sentence::new("L0", "a");
        let a1 = Sentence::new("L1", "a");
        let x = Sentence::new("L", "x");
        let inst = TwoToOneInstance::new(
            [l0, l1],
            l,
            [
                FiniteDistribution::point(a0.clone()),
                FiniteDistribution::point(a1.clone()),
            ],
            [
                Translator::from_pairs([(a0, x.clone())]),
                Translator::from_pairs([(a1, x.clone())]),
            ],
            vec![x],
        )
        .unwrap();
        assert_eq!(two_to_one_bound(&inst, 0.0).unwrap(), 0.0);
    }

    /// K = 2 with the diagonal tasks included, so target L0 receives from
    /// both L0 and L1 and the max bound is half the two-to-one bound.
    fn k2_instance(delta: f64) -> ManyToManyInstance {
        let langs = [Lang::new("L0"), Lang::new("L1")];
        let hi = 0.5 * (1.0 + delta);
        let lo = 0.5 * (1.0 - delta);
        let mut joints = BTreeMap::new();
        let mut translators = BTreeMap::new();
        for src in &langs {
            for tgt in &langs {
                let a = Sentence::prefixed(tgt.clone(), src.clone(), "a");
                let b = Sentence::prefixed(tgt.clone(), src.clone(), "b");
                let x = Sentence::new(tgt.clone(), "x");
                let y = Sentence::new(tgt.clone(), "y");
                let f = if src == tgt {
                    Translator::from_pairs([(a.clone(), x), (b.clone(), y)])
                } else {
                    Translator::from_pairs([(a.clone(), y), (b.clone(), x)])
                };
                let m = FiniteDistribution::new(vec![(a, hi), (b, lo)]).unwrap();
                joints.insert(
                    (src.clone(), tgt.clone()),
                    JointDistribution::from_marginal(&m, &f).unwrap(),
                );
                translators.insert((src.clone(), tgt.clone()), f);
            }
        }
        ManyToManyInstance::new(langs.to_vec(), BTreeMap::new(), joints, translators).unwrap()
    }

    #[test]
    fn many_to_many_k2_is_half_the_two_to_one_bound() {
        let b = many_to_many_bounds(&k2_instance(0.8), 0.0).unwrap();
        assert!((b.tv_max - 0.8).abs() < PROB_TOL);
        assert!((b.max_bound - 0.4).abs() < PROB_TOL);
        // two targets, one pair each: (0.8 + 0.8) / (4 * 1)
        assert!((b.avg_bound - 0.4).abs() < PROB_TOL);
    }

    #[test]
    fn many_to_many_equal_marginals_and_large_epsilon() {
        let b = many_to_many_bounds(&k2_instance(0.0), 0.0).unwrap();
        assert_eq!((b.max_bound, b.avg_bound), (0.0, 0.0));
        let b = many_to_many_bounds(&k2_instance(0.8), 2.0).unwrap();
        assert_eq!((b.max_bound, b.avg_bound), (0.0, 0.0));
    }

    #[test]
    fn unprefixed_sentences_rejected_with_several_targets() {
        let inst = k2_instance(0.5);
        let mut joints: BTreeMap<_, _> = inst.joints().map(|(k, v)| (k.clone(), v.clone())).collect();
        let key = (Lang::new("L0"), Lang::new("L1"));
        let bare = Sentence::new("L0", "a");
        let y = Sentence::new("L1", "y");
        joints.insert(
            key.clone(),
            JointDistribution::new(vec![(bare.clone(), y.clone(), 1.0)]).unwrap(),
        );
        let mut translators = BTreeMap::new();
        for k in joints.keys() {
            translators.insert(k.clone(), inst.translator(&k.0, &k.1).unwrap().clone());
        }
        translators.insert(key, Translator::from_pairs([(bare, y)]));
        let err = ManyToManyInstance::new(inst.languages().to_vec(), BTreeMap::new(), joints, translators);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    fn block_rep(inst: &ManyToManyInstance, misplace: bool) -> PartitionedRepresentation {
        // target L0 -> atom 0, target L1 -> atom 1
        let mut blocks = BTreeMap::new();
        blocks.insert(Lang::new("L0"), BTreeSet::from([0]));
        blocks.insert(Lang::new("L1"), BTreeSet::from([1]));
        let mut first = true;
        let g = Translator::from_fn(inst.source_sentences().iter(), |s| {
            let home = if s.target_tag.as_ref().unwrap().as_str() == "L0" {
                0
            } else {
                1
            };
            home
        });
        let g = if misplace {
            Translator::from_pairs(g.iter().map(|(s, z)| {
                let z = if first && *z == 0 {
                    first = false;
                    1
                } else {
                    *z
                };
                (s.clone(), z)
            }))
        } else {
            g
        };
        PartitionedRepresentation::new(blocks, g).unwrap()
    }

    #[test]
    fn partitioned_universality() {
        let inst = k2_instance(0.8);
        assert!(check_epsilon_universal_partitioned(&block_rep(&inst, false), &inst, 0.0).unwrap());
        assert!(!check_epsilon_universal_partitioned(&block_rep(&inst, true), &inst, 1.0).unwrap());
    }

    #[test]
    fn overlapping_blocks_rejected() {
        let mut blocks = BTreeMap::new();
        blocks.insert(Lang::new("A"), BTreeSet::from([0, 1]));
        blocks.insert(Lang::new("B"), BTreeSet::from([1]));
        let g = Translator::from_pairs([(Sentence::new("A", "s"), 0)]);
        assert!(PartitionedRepresentation::new(blocks, g).is_err());
    }

    #[test]
    fn bound_report_uses_worst_pair() {
        let inst = make_worst_case(0.8).unwrap().to_many_to_many().unwrap();
        let mut r = BoundReport::compute("w", &inst, 0.1).unwrap();
        assert!((r.bound_sum - 0.7).abs() < PROB_TOL);
        r.attach_brute_force(&inst, 2, Objective::Sum).unwrap();
        assert!(r.holds());
        assert!(r.brute_force.unwrap().value.unwrap() >= 0.7);
    }
}
