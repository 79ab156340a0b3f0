//! Exhaustive search over block-respecting encoders `g: Σ* -> Z` and decoders
//! `h: Z -> target sentences`, restricted to encoders that are
//! epsilon-universal for every target.
//!
//! Enumeration order is fixed so results are reproducible: block assignments
//! of the atoms first, then encoders, then decoders, each lexicographic with
//! the lowest index most significant. The first strict minimizer wins.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ManyToManyInstance, ZAtom};
use crate::discrete::{Lang, Sentence, Translator, PROB_TOL};
use crate::error::{Error, Result};

pub const MAX_SENTENCES: usize = 8;
pub const MAX_Z: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Sum of the per-task errors.
    Sum,
    /// Worst per-task error.
    Max,
    /// Sum of the per-task errors divided by `K²`.
    Avg,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Objective::Sum),
            "max" => Ok(Objective::Max),
            "avg" => Ok(Objective::Avg),
            other => Err(Error::arg(format!(
                "unknown objective {other:?} (expected sum, max or avg)"
            ))),
        }
    }
}

struct Task {
    pair: (Lang, Lang),
    block: usize,
    /// (sentence index, weight, index of the correct answer in the block vocab)
    entries: Vec<(usize, f64, usize)>,
}

struct Problem {
    sentences: Vec<Sentence>,
    sentence_block: Vec<usize>,
    block_langs: Vec<Lang>,
    block_vocab: Vec<Vec<Sentence>>,
    tasks: Vec<Task>,
    avg_denominator: f64,
    z_size: usize,
    epsilon: f64,
}

impl Problem {
    fn compile(instance: &ManyToManyInstance, z_size: usize, epsilon: f64) -> Result<Self> {
        if epsilon.is_nan() || epsilon < 0.0 || !epsilon.is_finite() {
            return Err(Error::arg(format!(
                "epsilon must be a finite value >= 0, got {epsilon}"
            )));
        }
        if z_size == 0 {
            return Err(Error::arg("z_size must be at least 1"));
        }
        let sentences = instance.source_sentences();
        if sentences.len() > MAX_SENTENCES || z_size > MAX_Z {
            return Err(Error::Resource(format!(
                "brute force is limited to {MAX_SENTENCES} source sentences and |Z| <= {MAX_Z}, got {} and {z_size}",
                sentences.len()
            )));
        }
        let index: BTreeMap<&Sentence, usize> = sentences.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let block_langs = instance.targets();
        let block_vocab: Vec<Vec<Sentence>> = block_langs.iter().map(|l| instance.target_vocab(l).to_vec()).collect();
        let mut sentence_block = vec![usize::MAX; sentences.len()];
        let mut tasks = Vec::new();
        for ((src, tgt), joint) in instance.joints() {
            let block = block_langs
                .iter()
                .position(|l| l == tgt)
                .expect("targets are drawn from joints");
            let mut entries = Vec::new();
            for (s, t, w) in joint.pairs() {
                let si = index[s];
                if sentence_block[si] != usize::MAX && sentence_block[si] != block {
                    return Err(Error::domain(format!(
                        "sentence {s} is a source for two different targets"
                    )));
                }
                sentence_block[si] = block;
                let ti = block_vocab[block]
                    .iter()
                    .position(|v| v == t)
                    .expect("vocab contains joint targets");
                entries.push((si, w, ti));
            }
            tasks.push(Task {
                pair: (src.clone(), tgt.clone()),
                block,
                entries,
            });
        }
        let k = instance.language_count() as f64;
        Ok(Problem {
            sentences,
            sentence_block,
            block_langs,
            block_vocab,
            tasks,
            avg_denominator: k * k,
            z_size,
            epsilon,
        })
    }

    fn feasible(&self, g: &[usize], scratch: &mut Vec<Vec<f64>>) -> bool {
        for b in 0..self.block_langs.len() {
            scratch.clear();
            for task in self.tasks.iter().filter(|t| t.block == b) {
                let mut p = vec![0.0; self.z_size];
                for &(si, w, _) in &task.entries {
                    p[g[si]] += w;
                }
                scratch.push(p);
            }
            for i in 0..scratch.len() {
                for j in (i + 1)..scratch.len() {
                    let tv = 0.5
                        * scratch[i]
                            .iter()
                            .zip(&scratch[j])
                            .map(|(a, b)| (a - b).abs())
                            .sum::<f64>();
                    if tv > self.epsilon + PROB_TOL {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Calls `f` with each index vector of the given radices, last index fastest.
fn odometer(radices: &[usize], mut f: impl FnMut(&[usize])) {
    if radices.contains(&0) {
        return;
    }
    let mut idx = vec![0; radices.len()];
    loop {
        f(&idx);
        let mut pos = radices.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < radices[pos] {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// One feasible (encoder, decoder) pair seen during enumeration.
pub struct Candidate<'a> {
    problem: &'a Problem,
    /// Block (target index) of each atom.
    pub partition: &'a [usize],
    /// Atom of each source sentence, in sorted sentence order.
    pub g: &'a [ZAtom],
    /// Chosen vocab index of each atom within its block.
    pub h: &'a [usize],
}

impl Candidate<'_> {
    pub fn task_errors(&self) -> Vec<f64> {
        self.problem
            .tasks
            .iter()
            .map(|t| {
                t.entries
                    .iter()
                    .filter(|&&(si, _, ti)| self.h[self.g[si]] != ti)
                    .fold(0.0, |acc, e| acc + e.1)
            })
            .collect()
    }

    pub fn objective(&self, objective: Objective) -> f64 {
        let errs = self.task_errors();
        match objective {
            Objective::Sum => errs.iter().fold(0.0, |a, e| a + e),
            Objective::Max => errs.iter().copied().fold(0.0, f64::max),
            Objective::Avg => errs.iter().fold(0.0, |a, e| a + e) / self.problem.avg_denominator,
        }
    }

    pub fn encoder(&self) -> Translator<Sentence, ZAtom> {
        Translator::from_pairs(self.problem.sentences.iter().cloned().zip(self.g.iter().copied()))
    }

    pub fn decoder(&self) -> Translator<ZAtom, Sentence> {
        Translator::from_pairs(
            (0..self.problem.z_size).map(|z| (z, self.problem.block_vocab[self.partition[z]][self.h[z]].clone())),
        )
    }

    pub fn blocks(&self) -> BTreeMap<Lang, BTreeSet<ZAtom>> {
        let mut out: BTreeMap<Lang, BTreeSet<ZAtom>> = BTreeMap::new();
        for (z, &b) in self.partition.iter().enumerate() {
            out.entry(self.problem.block_langs[b].clone()).or_default().insert(z);
        }
        out
    }

    pub fn task_pairs(&self) -> impl Iterator<Item = &(Lang, Lang)> + '_ {
        self.problem.tasks.iter().map(|t| &t.pair)
    }
}

fn enumerate(problem: &Problem, mut f: impl FnMut(&Candidate)) {
    let nb = problem.block_langs.len();
    let mut scratch = Vec::new();
    odometer(&vec![nb; problem.z_size], |partition| {
        let block_atoms: Vec<Vec<usize>> = (0..nb)
            .map(|b| (0..problem.z_size).filter(|&z| partition[z] == b).collect())
            .collect();
        let radices: Vec<usize> = problem.sentence_block.iter().map(|&b| block_atoms[b].len()).collect();
        let h_radices: Vec<usize> = partition.iter().map(|&b| problem.block_vocab[b].len()).collect();
        odometer(&radices, |digits| {
            let g: Vec<usize> = digits
                .iter()
                .zip(&problem.sentence_block)
                .map(|(&d, &b)| block_atoms[b][d])
                .collect();
            if !problem.feasible(&g, &mut scratch) {
                return;
            }
            odometer(&h_radices, |h| {
                f(&Candidate {
                    problem,
                    partition,
                    g: &g,
                    h,
                })
            });
        });
    });
}

/// Visits every feasible candidate in the canonical enumeration order.
pub fn for_each_candidate(
    instance: &ManyToManyInstance,
    z_size: usize,
    epsilon: f64,
    f: impl FnMut(&Candidate),
) -> Result<()> {
    let problem = Problem::compile(instance, z_size, epsilon)?;
    enumerate(&problem, f);
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BruteForceBest {
    pub value: f64,
    pub task_errors: Vec<((Lang, Lang), f64)>,
    pub encoder: Translator<Sentence, ZAtom>,
    pub decoder: Translator<ZAtom, Sentence>,
    pub blocks: BTreeMap<Lang, BTreeSet<ZAtom>>,
}

#[derive(Clone, Debug)]
pub struct BruteForceOutcome {
    /// `None` when no block-respecting encoder is epsilon-universal.
    pub best: Option<BruteForceBest>,
    pub candidates: u64,
}

/// Minimum of `objective` over all epsilon-universal encoders and all decoders.
pub fn brute_force_min_error(
    instance: &ManyToManyInstance,
    z_size: usize,
    epsilon: f64,
    objective: Objective,
) -> Result<BruteForceOutcome> {
    let problem = Problem::compile(instance, z_size, epsilon)?;
    let mut best: Option<BruteForceBest> = None;
    let mut candidates = 0u64;
    enumerate(&problem, |c| {
        candidates += 1;
        let value = c.objective(objective);
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(BruteForceBest {
                value,
                task_errors: c.task_pairs().cloned().zip(c.task_errors()).collect(),
                encoder: c.encoder(),
                decoder: c.decoder(),
                blocks: c.blocks(),
            });
        }
    });
    Ok(BruteForceOutcome { best, candidates })
}
