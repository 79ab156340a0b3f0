//! Random small instances for property tests and bound sweeps.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{JointDistribution, ManyToManyInstance, TwoToOneInstance};
use crate::discrete::{FiniteDistribution, Lang, Sentence, Translator};
use crate::error::{Error, Result};

/// Flat-Dirichlet weights; exponential draws normalized to one.
fn simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x: f64| x / total).collect()
}

fn vocab(lang: &Lang, n: usize) -> Vec<Sentence> {
    (0..n).map(|i| Sentence::new(lang.clone(), format!("t{i}"))).collect()
}

/// Two sources with `per_source` sentences each, mapped uniformly at random
/// into `target_size` target sentences.
pub fn random_two_to_one<R: Rng + ?Sized>(
    rng: &mut R,
    per_source: usize,
    target_size: usize,
) -> Result<TwoToOneInstance> {
    if per_source == 0 || target_size == 0 {
        return Err(Error::arg("random instances need at least one sentence per language"));
    }
    let sources = [Lang::new("L0"), Lang::new("L1")];
    let target = Lang::new("L");
    let targets = vocab(&target, target_size);
    let mut marginals = Vec::new();
    let mut translators = Vec::new();
    for src in &sources {
        let atoms: Vec<Sentence> = (0..per_source)
            .map(|i| Sentence::new(src.clone(), format!("s{i}")))
            .collect();
        let weights = simplex(rng, per_source);
        translators.push(Translator::from_fn(&atoms, |_| {
            targets[rng.random_range(0..target_size)].clone()
        }));
        marginals.push(FiniteDistribution::from_masses(
            atoms.into_iter().zip(weights).collect(),
        )?);
    }
    let [m0, m1]: [_; 2] = marginals.try_into().expect("two marginals");
    let [f0, f1]: [_; 2] = translators.try_into().expect("two translators");
    TwoToOneInstance::new(sources, target, [m0, m1], [f0, f1], targets)
}

/// All ordered off-diagonal pairs of `k` languages. Every task gets one
/// source sentence, then the remaining `total_sentences - k(k-1)` are
/// scattered over random tasks.
pub fn random_many_to_many<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    total_sentences: usize,
    vocab_size: usize,
) -> Result<ManyToManyInstance> {
    if k < 2 || vocab_size == 0 {
        return Err(Error::arg("need at least two languages and a non-empty vocabulary"));
    }
    let langs: Vec<Lang> = (0..k).map(|i| Lang::new(format!("L{i}"))).collect();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    if total_sentences < pairs.len() {
        return Err(Error::arg(format!(
            "need at least {} source sentences for {k} languages",
            pairs.len()
        )));
    }
    let mut counts = vec![1usize; pairs.len()];
    for _ in pairs.len()..total_sentences {
        counts[rng.random_range(0..pairs.len())] += 1;
    }
    let vocabs: BTreeMap<Lang, Vec<Sentence>> = langs.iter().map(|l| (l.clone(), vocab(l, vocab_size))).collect();
    let mut joints = BTreeMap::new();
    let mut translators = BTreeMap::new();
    for (&(i, j), &n) in pairs.iter().zip(&counts) {
        let (src, tgt) = (&langs[i], &langs[j]);
        let atoms: Vec<Sentence> = (0..n)
            .map(|s| Sentence::prefixed(tgt.clone(), src.clone(), format!("s{s}")))
            .collect();
        let f = Translator::from_fn(&atoms, |_| vocabs[tgt][rng.random_range(0..vocab_size)].clone());
        let m = FiniteDistribution::from_masses(atoms.into_iter().zip(simplex(rng, n)).collect())?;
        joints.insert((src.clone(), tgt.clone()), JointDistribution::from_marginal(&m, &f)?);
        translators.insert((src.clone(), tgt.clone()), f);
    }
    ManyToManyInstance::new(langs, vocabs, joints, translators)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn many_to_many_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = random_many_to_many(&mut rng, 3, 8, 2).unwrap();
        assert_eq!(inst.joints().count(), 6);
        assert_eq!(inst.source_sentences().len(), 8);
        assert!(random_many_to_many(&mut rng, 3, 5, 2).is_err());
    }

    #[test]
    fn two_to_one_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = random_two_to_one(&mut rng, 3, 2).unwrap();
        assert_eq!(inst.sentence_count(), 6);
        assert!(inst.target_sentences.len() <= 2);
    }
}
