//! Finite distributions over sentences and representation atoms.
//!
//! Everything here is exact bookkeeping over small supports: total variation
//! as half the L1 distance on the unioned support, pushforwards through total
//! maps, and the 0-1 disagreement mass between two maps. The two inequalities
//! the impossibility bounds rest on (disagreement dominates pushforward TV, and
//! post-processing cannot increase TV) are exposed as checks so they can be
//! exercised on arbitrary instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impossibility::ManyToManyInstance;

/// Absolute tolerance for every probability comparison in the crate.
pub const PROB_TOL: f64 = 1e-12;

/// Language identifier, rendered as the `<L>` token that prefixes sentences.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lang(pub String);

impl Lang {
    pub fn new(name: impl Into<String>) -> Self {
        Lang(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Lang {
    fn from(s: &str) -> Self {
        Lang(s.to_string())
    }
}

/// An opaque sentence. The source tag decides which language's sentence set
/// the sentence belongs to; the optional target tag is the many-to-many prefix.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sentence {
    pub source_tag: Lang,
    pub target_tag: Option<Lang>,
    pub body: String,
}

impl Sentence {
    pub fn new(source: impl Into<Lang>, body: impl Into<String>) -> Self {
        Sentence {
            source_tag: source.into(),
            target_tag: None,
            body: body.into(),
        }
    }

    pub fn prefixed(target: impl Into<Lang>, source: impl Into<Lang>, body: impl Into<String>) -> Self {
        Sentence {
            source_tag: source.into(),
            target_tag: Some(target.into()),
            body: body.into(),
        }
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = &self.target_tag {
            write!(f, "<{t}>")?;
        }
        write!(f, "<{}>{}", self.source_tag, self.body)
    }
}

/// Probability weights over a finite, duplicate-free support.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDistribution<A> {
    atoms: Vec<A>,
    weights: Vec<f64>,
}

impl<A: Ord + Clone> FiniteDistribution<A> {
    /// Builds a distribution, rejecting negative weights, duplicate atoms and
    /// total mass away from one by more than [`PROB_TOL`].
    pub fn new(entries: Vec<(A, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("distribution has empty support"));
        }
        let mut seen = BTreeSet::new();
        let mut total = 0.0;
        for (atom, w) in &entries {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::domain(format!("invalid weight {w}")));
            }
            if !seen.insert(atom.clone()) {
                return Err(Error::domain("duplicate atom in support"));
            }
            total += w;
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::domain(format!("weights sum to {total}, not 1")));
        }
        let (atoms, weights) = entries.into_iter().unzip();
        Ok(FiniteDistribution { atoms, weights })
    }

    /// Normalizes nonnegative masses to sum to one.
    pub fn from_masses(entries: Vec<(A, f64)>) -> Result<Self> {
        let total: f64 = entries.iter().map(|(_, w)| *w).sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::domain("total mass must be positive"));
        }
        Self::new(entries.into_iter().map(|(a, w)| (a, w / total)).collect())
    }

    pub fn uniform(atoms: Vec<A>) -> Result<Self> {
        let w = 1.0 / atoms.len() as f64;
        Self::from_masses(atoms.into_iter().map(|a| (a, w)).collect())
    }

    pub fn point(atom: A) -> Self {
        FiniteDistribution {
            atoms: vec![atom],
            weights: vec![1.0],
        }
    }

    pub fn atoms(&self) -> &[A] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&A, f64)> + '_ {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// Mass of `atom`, zero when it is outside the support.
    pub fn mass(&self, atom: &A) -> f64 {
        self.iter().filter(|(a, _)| *a == atom).map(|(_, w)| w).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Atoms carrying strictly positive mass.
    pub fn positive_support(&self) -> impl Iterator<Item = &A> + '_ {
        self.iter().filter(|(_, w)| *w > 0.0).map(|(a, _)| a)
    }

    pub(crate) fn to_map(&self) -> BTreeMap<A, f64> {
        let mut m = BTreeMap::new();
        for (a, w) in self.iter() {
            *m.entry(a.clone()).or_insert(0.0) += w;
        }
        m
    }
}

/// A total map from a finite domain to some codomain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Translator<A: Ord, B> {
    table: BTreeMap<A, B>,
}

impl<A: Ord + Clone + fmt::Debug, B: Clone> Translator<A, B> {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (A, B)>) -> Self {
        Translator {
            table: pairs.into_iter().collect(),
        }
    }

    pub fn from_fn<'a>(domain: impl IntoIterator<Item = &'a A>, mut f: impl FnMut(&A) -> B) -> Self
    where
        A: 'a,
    {
        Translator {
            table: domain.into_iter().map(|a| (a.clone(), f(a))).collect(),
        }
    }

    pub fn constant<'a>(domain: impl IntoIterator<Item = &'a A>, value: B) -> Self
    where
        A: 'a,
    {
        Self::from_fn(domain, |_| value.clone())
    }

    pub fn apply(&self, a: &A) -> Result<&B> {
        self.table
            .get(a)
            .ok_or_else(|| Error::domain(format!("atom {a:?} is outside the translator's domain")))
    }

    pub fn domain(&self) -> impl Iterator<Item = &A> + '_ {
        self.table.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&A, &B)> + '_ {
        self.table.iter()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// `next ∘ self`, defined on the domain of `self`.
    pub fn then<C: Clone>(&self, next: &Translator<B, C>) -> Result<Translator<A, C>>
    where
        B: Ord + fmt::Debug,
    {
        let mut table = BTreeMap::new();
        for (a, b) in &self.table {
            table.insert(a.clone(), next.apply(b)?.clone());
        }
        Ok(Translator { table })
    }
}

impl<A: Ord + Clone + fmt::Debug> Translator<A, A> {
    pub fn identity<'a>(domain: impl IntoIterator<Item = &'a A>) -> Self
    where
        A: 'a,
    {
        Self::from_fn(domain, |a| a.clone())
    }
}

/// Half the L1 distance over the union of both supports.
pub fn tv_distance<A: Ord + Clone>(p: &FiniteDistribution<A>, q: &FiniteDistribution<A>) -> f64 {
    let mut diff = p.to_map();
    for (a, w) in q.iter() {
        *diff.entry(a.clone()).or_insert(0.0) -= w;
    }
    let tv = 0.5 * diff.values().map(|d| d.abs()).sum::<f64>();
    tv.clamp(0.0, 1.0)
}

pub fn pushforward<A, B>(d: &FiniteDistribution<A>, f: &Translator<A, B>) -> Result<FiniteDistribution<B>>
where
    A: Ord + Clone + fmt::Debug,
    B: Ord + Clone,
{
    let mut mass: BTreeMap<B, f64> = BTreeMap::new();
    for (a, w) in d.iter() {
        *mass.entry(f.apply(a)?.clone()).or_insert(0.0) += w;
    }
    Ok(FiniteDistribution {
        atoms: mass.keys().cloned().collect(),
        weights: mass.values().copied().collect(),
    })
}

/// D-mass of the atoms on which `f` and `f_star` disagree.
pub fn zero_one_error<A, B>(d: &FiniteDistribution<A>, f: &Translator<A, B>, f_star: &Translator<A, B>) -> Result<f64>
where
    A: Ord + Clone + fmt::Debug,
    B: Clone + PartialEq,
{
    let mut err = 0.0;
    for (a, w) in d.iter() {
        if f.apply(a)? != f_star.apply(a)? {
            err += w;
        }
    }
    Ok(err)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisagreementCheck {
    pub tv: f64,
    pub disagreement: f64,
    pub holds: bool,
}

/// TV between the two pushforwards never exceeds the disagreement mass.
pub fn disagreement_bound_check<A, B>(
    d: &FiniteDistribution<A>,
    f: &Translator<A, B>,
    f_prime: &Translator<A, B>,
) -> Result<DisagreementCheck>
where
    A: Ord + Clone + fmt::Debug,
    B: Ord + Clone,
{
    let tv = tv_distance(&pushforward(d, f)?, &pushforward(d, f_prime)?);
    let disagreement = zero_one_error(d, f, f_prime)?;
    Ok(DisagreementCheck {
        tv,
        disagreement,
        holds: tv <= disagreement + PROB_TOL,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataProcessingCheck {
    pub before: f64,
    pub after: f64,
    pub holds: bool,
}

pub fn data_processing_check<A, B>(
    d: &FiniteDistribution<A>,
    d_prime: &FiniteDistribution<A>,
    h: &Translator<A, B>,
) -> Result<DataProcessingCheck>
where
    A: Ord + Clone + fmt::Debug,
    B: Ord + Clone,
{
    let before = tv_distance(d, d_prime);
    let after = tv_distance(&pushforward(d, h)?, &pushforward(d_prime, h)?);
    Ok(DataProcessingCheck {
        before,
        after,
        holds: after <= before + PROB_TOL,
    })
}

/// The translator into `target` that dispatches on each sentence's source tag
/// and applies that source's ground-truth map.
///
/// Its domain is every source sentence of every joint distribution that
/// translates into `target`.
pub fn perfect_universal_translator(
    instance: &ManyToManyInstance,
    target: &Lang,
) -> Result<Translator<Sentence, Sentence>> {
    let mut table = BTreeMap::new();
    let mut any = false;
    for (pair, joint) in instance.joints() {
        if &pair.1 != target {
            continue;
        }
        any = true;
        for (src, _, _) in joint.pairs() {
            let f_star = instance.translator(&src.source_tag, target)?;
            table.insert(src.clone(), f_star.apply(src)?.clone());
        }
    }
    if !any {
        return Err(Error::domain(format!("no source language translates into {target}")));
    }
    Ok(Translator { table })
}
