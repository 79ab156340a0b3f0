//! File formats. Structured data is JSON, tables are CSV with a header row
//! and LF line endings. Floats are written in Rust's shortest round-trip
//! form, so identical values always produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::affine::{AffineData, AffineMap};
use crate::discrete::{FiniteDistribution, Lang, Sentence, Translator};
use crate::error::{Error, Result};
use crate::generative::{AlignedCorpus, Codecs, CorpusMeta, FunctionClassSpec, LanguageCodec, RandomizedCodec};
use crate::impossibility::{JointDistribution, ManyToManyInstance, TwoToOneInstance};
use crate::trainer::EncoderEstimate;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

/// Writes `rows` with the given header.
pub fn write_csv<R: AsRef<[String]>>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.as_ref())?;
    }
    w.flush()?;
    Ok(())
}

/// Finite instance document. Each translator key `"src->dst"` declares one
/// task whose source sentences are the translator's domain. The task's
/// weights come from `marginals["src->dst"]` if present, else from
/// `marginals[src]`, aligned to `sentences[src]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub languages: Vec<Lang>,
    pub sentences: BTreeMap<Lang, Vec<String>>,
    pub marginals: BTreeMap<String, Vec<f64>>,
    pub translators: BTreeMap<String, BTreeMap<String, String>>,
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn split_task(key: &str) -> Result<(Lang, Lang)> {
    key.split_once("->")
        .map(|(a, b)| (Lang::new(a), Lang::new(b)))
        .ok_or_else(|| schema(&format!("translators.{key}"), "key must look like \"src->dst\""))
}

impl InstanceDoc {
    pub fn to_instance(&self) -> Result<ManyToManyInstance> {
        let tasks = self
            .translators
            .keys()
            .map(|k| split_task(k))
            .collect::<Result<Vec<_>>>()?;
        let targets: std::collections::BTreeSet<&Lang> = tasks.iter().map(|t| &t.1).collect();
        let prefixed = targets.len() > 1;
        let mut joints = BTreeMap::new();
        let mut translators = BTreeMap::new();
        for ((src, dst), (key, table)) in tasks.iter().zip(&self.translators) {
            let field = format!("translators.{key}");
            for l in [src, dst] {
                if !self.languages.contains(l) {
                    return Err(schema(&field, format!("unknown language {l}")));
                }
            }
            let ids = self
                .sentences
                .get(src)
                .ok_or_else(|| schema(&format!("sentences.{src}"), "missing"))?;
            let targets = self
                .sentences
                .get(dst)
                .ok_or_else(|| schema(&format!("sentences.{dst}"), "missing"))?;
            let weights = self
                .marginals
                .get(key)
                .or_else(|| self.marginals.get(src.as_str()))
                .ok_or_else(|| schema(&format!("marginals.{src}"), format!("no weights for task {key}")))?;
            if weights.len() != ids.len() {
                return Err(schema(
                    &format!("marginals.{src}"),
                    format!("{} weights for {} sentences", weights.len(), ids.len()),
                ));
            }
            let mut entries = Vec::new();
            let mut pairs = Vec::new();
            for (id, &w) in ids.iter().zip(weights) {
                match table.get(id) {
                    Some(t) => {
                        if !targets.contains(t) {
                            return Err(schema(&field, format!("target sentence {t} is not in sentences.{dst}")));
                        }
                        let s = if prefixed {
                            Sentence::prefixed(dst.clone(), src.clone(), id.clone())
                        } else {
                            Sentence::new(src.clone(), id.clone())
                        };
                        let t = Sentence::new(dst.clone(), t.clone());
                        entries.push((s.clone(), w));
                        pairs.push((s, t));
                    }
                    None if w == 0.0 => {}
                    None => return Err(schema(&field, format!("sentence {id} has mass {w} but no translation"))),
                }
            }
            if let Some(extra) = table.keys().find(|id| !ids.contains(id)) {
                return Err(schema(&field, format!("sentence {extra} is not in sentences.{src}")));
            }
            let f = Translator::from_pairs(pairs);
            let m = FiniteDistribution::new(entries).map_err(|e| schema(&format!("marginals.{key}"), e.to_string()))?;
            joints.insert((src.clone(), dst.clone()), JointDistribution::from_marginal(&m, &f)?);
            translators.insert((src.clone(), dst.clone()), f);
        }
        let vocab = targets
            .iter()
            .map(|&l| {
                let v = self.sentences[l]
                    .iter()
                    .map(|id| Sentence::new(l.clone(), id.clone()))
                    .collect();
                (l.clone(), v)
            })
            .collect();
        ManyToManyInstance::new(self.languages.clone(), vocab, joints, translators)
    }

    /// Succeeds when the document has exactly two tasks into one target.
    pub fn to_two_to_one(&self) -> Result<TwoToOneInstance> {
        let inst = self.to_instance()?;
        let targets = inst.targets();
        let tasks: Vec<_> = inst.joints().collect();
        if tasks.len() != 2 || targets.len() != 1 {
            return Err(Error::arg("instance is not two-to-one"));
        }
        let target = targets[0].clone();
        let [(k0, j0), (k1, j1)] = [tasks[0], tasks[1]];
        TwoToOneInstance::new(
            [k0.0.clone(), k1.0.clone()],
            target.clone(),
            [j0.source_marginal()?, j1.source_marginal()?],
            [
                inst.translator(&k0.0, &target)?.clone(),
                inst.translator(&k1.0, &target)?.clone(),
            ],
            inst.target_vocab(&target).to_vec(),
        )
    }

    pub fn from_two_to_one(inst: &TwoToOneInstance) -> Self {
        let mut languages = inst.sources.to_vec();
        languages.push(inst.target.clone());
        let mut sentences = BTreeMap::new();
        let mut marginals = BTreeMap::new();
        let mut translators = BTreeMap::new();
        for i in 0..2 {
            let src = &inst.sources[i];
            sentences.insert(
                src.clone(),
                inst.marginals[i].atoms().iter().map(|s| s.body.clone()).collect(),
            );
            marginals.insert(src.to_string(), inst.marginals[i].weights().to_vec());
            let table = inst.translators[i]
                .iter()
                .map(|(s, t)| (s.body.clone(), t.body.clone()))
                .collect();
            translators.insert(format!("{src}->{}", inst.target), table);
        }
        sentences.insert(
            inst.target.clone(),
            inst.target_sentences.iter().map(|s| s.body.clone()).collect(),
        );
        InstanceDoc {
            languages,
            sentences,
            marginals,
            translators,
        }
    }

    pub fn from_many_to_many(inst: &ManyToManyInstance) -> Self {
        let mut sentences: BTreeMap<Lang, std::collections::BTreeSet<String>> = BTreeMap::new();
        for ((src, _), j) in inst.joints() {
            sentences
                .entry(src.clone())
                .or_default()
                .extend(j.pairs().map(|(s, _, _)| s.body.clone()));
        }
        for t in inst.targets() {
            sentences
                .entry(t.clone())
                .or_default()
                .extend(inst.target_vocab(&t).iter().map(|s| s.body.clone()));
        }
        let sentences: BTreeMap<Lang, Vec<String>> = sentences
            .into_iter()
            .map(|(l, s)| (l, s.into_iter().collect()))
            .collect();
        let mut marginals = BTreeMap::new();
        let mut translators = BTreeMap::new();
        for ((src, dst), j) in inst.joints() {
            let key = format!("{src}->{dst}");
            let mass: BTreeMap<&str, f64> = j.pairs().map(|(s, _, w)| (s.body.as_str(), w)).collect();
            marginals.insert(
                key.clone(),
                sentences[src]
                    .iter()
                    .map(|id| mass.get(id.as_str()).copied().unwrap_or(0.0))
                    .collect(),
            );
            translators.insert(
                key,
                j.pairs().map(|(s, t, _)| (s.body.clone(), t.body.clone())).collect(),
            );
        }
        InstanceDoc {
            languages: inst.languages().to_vec(),
            sentences,
            marginals,
            translators,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodecDoc {
    pub spec: FunctionClassSpec,
    pub k: usize,
    pub sigma: f64,
    pub codecs: BTreeMap<Lang, AffineData>,
}

impl CodecDoc {
    pub fn from_codecs(spec: &FunctionClassSpec, k: usize, sigma: f64, codecs: &Codecs<RandomizedCodec>) -> Self {
        CodecDoc {
            spec: *spec,
            k,
            sigma,
            codecs: codecs
                .iter()
                .map(|(l, c)| (l.clone(), c.decoder_map().to_data()))
                .collect(),
        }
    }

    pub fn to_codecs(&self) -> Result<Codecs<RandomizedCodec>> {
        self.spec.validate()?;
        self.codecs
            .iter()
            .map(|(l, data)| {
                let map = AffineMap::try_from(data.clone())?;
                Ok((l.clone(), RandomizedCodec::new(self.spec.d, self.k, self.sigma, map)?))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderDoc {
    pub anchor: Lang,
    pub encoders: BTreeMap<Lang, AffineData>,
    pub spec: FunctionClassSpec,
}

impl EncoderDoc {
    pub fn from_estimate(est: &EncoderEstimate, spec: &FunctionClassSpec) -> Self {
        EncoderDoc {
            anchor: est.anchor.clone(),
            encoders: est.encoders.iter().map(|(l, m)| (l.clone(), m.to_data())).collect(),
            spec: *spec,
        }
    }

    pub fn to_estimate(&self) -> Result<EncoderEstimate> {
        let encoders = self
            .encoders
            .iter()
            .map(|(l, d)| Ok((l.clone(), AffineMap::try_from(d.clone())?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        if !encoders.contains_key(&self.anchor) {
            return Err(schema("anchor", format!("anchor {} has no encoder", self.anchor)));
        }
        Ok(EncoderEstimate {
            anchor: self.anchor.clone(),
            encoders,
        })
    }
}

/// Corpus file: `pairs` has shape `(n, 2, d + k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub source: Lang,
    pub target: Lang,
    pub meta: CorpusMeta,
    pub pairs: Vec<[Vec<f64>; 2]>,
}

impl CorpusDoc {
    pub fn from_corpus(c: &AlignedCorpus) -> Self {
        let pairs =
            c.xs.column_iter()
                .zip(c.ys.column_iter())
                .map(|(x, y)| [x.iter().copied().collect(), y.iter().copied().collect()])
                .collect();
        CorpusDoc {
            source: c.source.clone(),
            target: c.target.clone(),
            meta: c.meta.clone(),
            pairs,
        }
    }

    pub fn to_corpus(&self) -> Result<AlignedCorpus> {
        let n = self.pairs.len();
        let d = self.pairs.first().map_or(0, |p| p[0].len());
        if n == 0 || self.pairs.iter().any(|p| p[0].len() != d || p[1].len() != d) {
            return Err(schema("pairs", "pairs must be a non-empty (n, 2, dim) array"));
        }
        let xs = DMatrix::from_iterator(d, n, self.pairs.iter().flat_map(|p| p[0].iter().copied()));
        let ys = DMatrix::from_iterator(d, n, self.pairs.iter().flat_map(|p| p[1].iter().copied()));
        Ok(AlignedCorpus {
            source: self.source.clone(),
            target: self.target.clone(),
            xs,
            ys,
            meta: self.meta.clone(),
        })
    }
}

pub fn corpus_file_name(source: &Lang, target: &Lang) -> String {
    format!("corpus_{source}_{target}.json")
}
