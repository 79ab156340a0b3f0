//! The encoder-decoder generative process: a latent `z` drawn uniformly from
//! a ball is decoded into every language by that language's ground-truth
//! decoder, and aligned corpora are pairs of decodings of shared latents.
//!
//! Codecs are affine. The randomized variant appends `k` nuisance
//! coordinates `σ r` to the latent before decoding; its encoder keeps only
//! the first `d` coordinates of the inverse, so decoding and re-encoding
//! recovers `z` exactly whatever the noise.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affine::AffineMap;
use crate::discrete::Lang;
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Bounds for the ground-truth function class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionClassSpec {
    pub d: usize,
    #[serde(rename = "B")]
    pub latent_radius: f64,
    pub rho: f64,
    pub offset_bound: f64,
}

impl Default for FunctionClassSpec {
    fn default() -> Self {
        FunctionClassSpec {
            d: 4,
            latent_radius: 1.0,
            rho: 2.0,
            offset_bound: 1.0,
        }
    }
}

impl FunctionClassSpec {
    pub fn new(d: usize, latent_radius: f64, rho: f64, offset_bound: f64) -> Result<Self> {
        let spec = FunctionClassSpec {
            d,
            latent_radius,
            rho,
            offset_bound,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.d == 0 {
            bad.push("d must be at least 1".to_string());
        }
        if !(self.latent_radius >= 0.0 && self.latent_radius.is_finite()) {
            bad.push(format!("B must be finite and >= 0, got {}", self.latent_radius));
        }
        if !(self.rho >= 1.0 && self.rho.is_finite()) {
            bad.push(format!("rho must be finite and >= 1, got {}", self.rho));
        }
        if !(self.offset_bound >= 0.0 && self.offset_bound.is_finite()) {
            bad.push(format!(
                "offset_bound must be finite and >= 0, got {}",
                self.offset_bound
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Sup-norm bound on decoded sentences: `ρB + offset_bound`.
    pub fn m_bound(&self) -> f64 {
        self.rho * self.latent_radius + self.offset_bound
    }
}

/// Uniform distribution on the closed ball of radius `radius` in `R^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatentSampler {
    pub d: usize,
    pub radius: f64,
}

impl LatentSampler {
    pub fn new(d: usize, radius: f64) -> Self {
        LatentSampler { d, radius }
    }

    pub fn from_spec(spec: &FunctionClassSpec) -> Self {
        Self::new(spec.d, spec.latent_radius)
    }

    /// `m` draws, one per column.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> DMatrix<f64> {
        uniform_ball(rng, self.d, self.radius, m)
    }
}

fn uniform_ball<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64, m: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(d, m);
    for mut col in out.column_iter_mut() {
        let g = DVector::<f64>::from_fn(d, |_, _| StandardNormal.sample(rng));
        let u: f64 = rng.random();
        let norm = g.norm();
        if norm > 0.0 {
            col.copy_from(&(g * (radius * u.powf(1.0 / d as f64) / norm)));
        }
    }
    out
}

/// Standard normal truncated to `[-3, 3]` by rejection.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = StandardNormal.sample(rng);
        if x.abs() <= 3.0 {
            return x;
        }
    }
}

/// Gaussian matrix with its singular values clipped into `[1/ρ, ρ]`.
pub fn sample_band_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize, rho: f64) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    clip_singular_values(g, 1.0 / rho, rho)
}

pub(crate) fn clip_singular_values(w: DMatrix<f64>, lo: f64, hi: f64) -> DMatrix<f64> {
    let svd = w.svd(true, true);
    let s = svd.singular_values.map(|x| x.clamp(lo, hi));
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    u * DMatrix::from_diagonal(&s) * v_t
}

/// Decodes latents into one language and encodes back.
pub trait LanguageCodec: Send + Sync {
    fn latent_dim(&self) -> usize;
    /// Dimension of the sentence space.
    fn dim(&self) -> usize;
    fn sigma(&self) -> f64;
    fn nuisance_dim(&self) -> usize {
        self.dim() - self.latent_dim()
    }
    /// Decodes each column of `zs`; randomized codecs draw their seeds from `noise`.
    fn decode_batch(&self, zs: &DMatrix<f64>, noise: &mut ChaCha8Rng) -> DMatrix<f64>;
    fn encode_batch(&self, xs: &DMatrix<f64>) -> DMatrix<f64>;
    /// The full affine decoder on `R^dim` (latent and nuisance coordinates).
    fn decoder_map(&self) -> &AffineMap;
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineCodec {
    decoder: AffineMap,
    encoder: AffineMap,
}

impl AffineCodec {
    pub fn new(decoder: AffineMap) -> Result<Self> {
        let encoder = decoder.inverse()?;
        Ok(AffineCodec { decoder, encoder })
    }

    pub fn decoder(&self) -> &AffineMap {
        &self.decoder
    }

    pub fn encoder(&self) -> &AffineMap {
        &self.encoder
    }

    pub fn decode(&self, z: &DVector<f64>) -> DVector<f64> {
        self.decoder.apply(z)
    }

    pub fn encode(&self, x: &DVector<f64>) -> DVector<f64> {
        self.encoder.apply(x)
    }
}

impl LanguageCodec for AffineCodec {
    fn latent_dim(&self) -> usize {
        self.decoder.dim()
    }

    fn dim(&self) -> usize {
        self.decoder.dim()
    }

    fn sigma(&self) -> f64 {
        0.0
    }

    fn decode_batch(&self, zs: &DMatrix<f64>, _noise: &mut ChaCha8Rng) -> DMatrix<f64> {
        self.decoder.apply_batch(zs)
    }

    fn encode_batch(&self, xs: &DMatrix<f64>) -> DMatrix<f64> {
        self.encoder.apply_batch(xs)
    }

    fn decoder_map(&self) -> &AffineMap {
        &self.decoder
    }
}

/// `decode(z, r) = W [z; σ r] + b` with `r` truncated standard normal in `R^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomizedCodec {
    d: usize,
    k: usize,
    sigma: f64,
    inner: AffineCodec,
}

impl RandomizedCodec {
    pub fn new(d: usize, k: usize, sigma: f64, decoder: AffineMap) -> Result<Self> {
        if decoder.dim() != d + k {
            return Err(Error::arg(format!(
                "decoder acts on R^{} but d + k = {}",
                decoder.dim(),
                d + k
            )));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::arg(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(RandomizedCodec {
            d,
            k,
            sigma,
            inner: AffineCodec::new(decoder)?,
        })
    }

    /// Replaces the encoder, breaking the exact inverse. For negative tests.
    pub fn with_encoder(mut self, encoder: AffineMap) -> Self {
        self.inner.encoder = encoder;
        self
    }

    pub fn affine(&self) -> &AffineCodec {
        &self.inner
    }

    /// Decodes with explicit nuisance seeds `r` (one column per latent).
    pub fn decode_with(&self, zs: &DMatrix<f64>, rs: &DMatrix<f64>) -> DMatrix<f64> {
        let m = zs.ncols();
        let mut full = DMatrix::zeros(self.d + self.k, m);
        full.rows_mut(0, self.d).copy_from(zs);
        if self.k > 0 {
            full.rows_mut(self.d, self.k).copy_from(&(rs * self.sigma));
        }
        self.inner.decoder.apply_batch(&full)
    }
}

impl LanguageCodec for RandomizedCodec {
    fn latent_dim(&self) -> usize {
        self.d
    }

    fn dim(&self) -> usize {
        self.d + self.k
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn decode_batch(&self, zs: &DMatrix<f64>, noise: &mut ChaCha8Rng) -> DMatrix<f64> {
        let rs = DMatrix::from_fn(self.k, zs.ncols(), |_, _| truncated_normal(noise));
        self.decode_with(zs, &rs)
    }

    fn encode_batch(&self, xs: &DMatrix<f64>) -> DMatrix<f64> {
        self.inner.encoder.apply_batch(xs).rows(0, self.d).into_owned()
    }

    fn decoder_map(&self) -> &AffineMap {
        &self.inner.decoder
    }
}

pub type Codecs<C> = BTreeMap<Lang, C>;

fn sample_decoder(spec: &FunctionClassSpec, dim: usize, lang: &Lang, seed: u64) -> AffineMap {
    let mut rng = rng_for(seed, &["codec", lang.as_str()]);
    let w = sample_band_matrix(&mut rng, dim, spec.rho);
    let b = uniform_ball(&mut rng, dim, spec.offset_bound, 1).column(0).into_owned();
    AffineMap { w, b }
}

/// One ground-truth codec per language, seeded per language name.
pub fn sample_ground_truth_codecs(
    spec: &FunctionClassSpec,
    languages: &[Lang],
    seed: u64,
) -> Result<Codecs<AffineCodec>> {
    spec.validate()?;
    if languages.len() < 2 {
        return Err(Error::arg("need at least two languages"));
    }
    languages
        .iter()
        .map(|l| Ok((l.clone(), AffineCodec::new(sample_decoder(spec, spec.d, l, seed))?)))
        .collect()
}

/// Randomized codecs on `R^{d+k}`. With `k = 0` the matrices coincide with
/// [`sample_ground_truth_codecs`] for the same seed.
pub fn sample_randomized_codecs(
    spec: &FunctionClassSpec,
    k: usize,
    sigma: f64,
    languages: &[Lang],
    seed: u64,
) -> Result<Codecs<RandomizedCodec>> {
    spec.validate()?;
    if languages.len() < 2 {
        return Err(Error::arg("need at least two languages"));
    }
    languages
        .iter()
        .map(|l| {
            Ok((
                l.clone(),
                RandomizedCodec::new(spec.d, k, sigma, sample_decoder(spec, spec.d + k, l, seed))?,
            ))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub seed: u64,
    pub sigma: f64,
    pub k: usize,
    pub codec_hash: String,
}

/// Pairs `(x_i, x'_i)` stored column-wise in `xs` and `ys`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedCorpus {
    pub source: Lang,
    pub target: Lang,
    pub xs: DMatrix<f64>,
    pub ys: DMatrix<f64>,
    pub meta: CorpusMeta,
}

impl AlignedCorpus {
    pub fn n(&self) -> usize {
        self.xs.ncols()
    }

    pub fn dim(&self) -> usize {
        self.xs.nrows()
    }
}

/// Short hex digest of the decoders, for provenance in corpus metadata.
pub fn codec_hash(maps: &[&AffineMap]) -> String {
    let mut h = Sha256::new();
    for m in maps {
        for x in m.w.iter().chain(m.b.iter()) {
            h.update(x.to_le_bytes());
        }
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn lookup<'a, C>(codecs: &'a Codecs<C>, lang: &Lang) -> Result<&'a C> {
    codecs
        .get(lang)
        .ok_or_else(|| Error::arg(format!("no codec for language {lang}")))
}

/// `n` aligned pairs decoded from shared latents. Latents and each side's
/// nuisance seeds come from separate streams keyed by `(seed, src, dst)`.
pub fn generate_corpus<C: LanguageCodec>(
    src: &Lang,
    dst: &Lang,
    codecs: &Codecs<C>,
    n: usize,
    sampler: &LatentSampler,
    seed: u64,
) -> Result<AlignedCorpus> {
    if n == 0 {
        return Err(Error::arg("corpus size n must be at least 1"));
    }
    let (cs, ct) = (lookup(codecs, src)?, lookup(codecs, dst)?);
    if cs.latent_dim() != sampler.d || ct.latent_dim() != sampler.d {
        return Err(Error::arg("codec latent dimension does not match the sampler"));
    }
    let (a, b) = (src.as_str(), dst.as_str());
    let zs = sampler.sample(&mut rng_for(seed, &["latent", a, b]), n);
    let xs = cs.decode_batch(&zs, &mut rng_for(seed, &["noise", a, b, "src"]));
    let ys = ct.decode_batch(&zs, &mut rng_for(seed, &["noise", a, b, "dst"]));
    Ok(AlignedCorpus {
        source: src.clone(),
        target: dst.clone(),
        xs,
        ys,
        meta: CorpusMeta {
            seed,
            sigma: cs.sigma(),
            k: cs.nuisance_dim(),
            codec_hash: codec_hash(&[cs.decoder_map(), ct.decoder_map()]),
        },
    })
}

/// Two-sample comparison of means and covariances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentTest {
    pub mean_gap: f64,
    pub mean_se: f64,
    pub cov_gap: f64,
    pub cov_se: f64,
}

impl MomentTest {
    /// Larger of the two gaps in standard-error units.
    pub fn stat(&self) -> f64 {
        ratio(self.mean_gap, self.mean_se).max(ratio(self.cov_gap, self.cov_se))
    }

    pub fn holds(&self) -> bool {
        self.stat() <= 3.0
    }
}

fn ratio(gap: f64, se: f64) -> f64 {
    if se > 0.0 {
        gap / se
    } else if gap <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn column_mean(xs: &DMatrix<f64>) -> DVector<f64> {
    xs.column_mean()
}

fn centered(xs: &DMatrix<f64>) -> DMatrix<f64> {
    let mu = column_mean(xs);
    let mut c = xs.clone();
    for mut col in c.column_iter_mut() {
        col -= &mu;
    }
    c
}

/// Per-entry mean and variance of the centered products `c_i c_j`.
fn product_moments(c: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (d, m) = (c.nrows(), c.ncols() as f64);
    let mut mean = DMatrix::zeros(d, d);
    let mut sq = DMatrix::zeros(d, d);
    for col in c.column_iter() {
        let p = col * col.transpose();
        sq += p.component_mul(&p);
        mean += p;
    }
    mean /= m;
    sq /= m;
    let var = sq - mean.component_mul(&mean);
    (mean, var)
}

pub fn moment_test(a: &DMatrix<f64>, b: &DMatrix<f64>) -> MomentTest {
    let (ma, mb) = (a.ncols() as f64, b.ncols() as f64);
    let (ca, cb) = (centered(a), centered(b));
    let mean_gap = (column_mean(a) - column_mean(b)).norm();
    let tr_a = ca.norm_squared() / ma;
    let tr_b = cb.norm_squared() / mb;
    let mean_se = (tr_a / ma + tr_b / mb).sqrt();
    let (cov_a, var_a) = product_moments(&ca);
    let (cov_b, var_b) = product_moments(&cb);
    let cov_gap = (cov_a - cov_b).norm();
    let cov_se = (var_a.map(|v| v.max(0.0)).sum() / ma + var_b.map(|v| v.max(0.0)).sum() / mb).sqrt();
    MomentTest {
        mean_gap,
        mean_se,
        cov_gap,
        cov_se,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    /// Round-trip latents against a fresh latent sample.
    pub test: MomentTest,
    /// Largest `‖encode(decode(z)) - z‖` over the sample.
    pub max_roundtrip_error: f64,
    pub holds: bool,
}

/// Decodes `m` latents, encodes them back and compares the result with an
/// independent draw from the latent distribution.
pub fn invariance_test<C: LanguageCodec>(
    codec: &C,
    sampler: &LatentSampler,
    m: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    if m < 1000 {
        return Err(Error::arg(format!("invariance test needs m >= 1000, got {m}")));
    }
    let zs = sampler.sample(&mut rng_for(seed, &["invariance", "latent"]), m);
    let xs = codec.decode_batch(&zs, &mut rng_for(seed, &["invariance", "noise"]));
    let back = codec.encode_batch(&xs);
    let fresh = sampler.sample(&mut rng_for(seed, &["invariance", "fresh"]), m);
    let max_roundtrip_error = (&back - &zs).column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let test = moment_test(&back, &fresh);
    Ok(InvarianceReport {
        test,
        max_roundtrip_error,
        holds: test.holds(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropositionReport {
    pub pairs: Vec<(Lang, Lang, MomentTest)>,
    pub max_stat: f64,
    pub holds: bool,
}

/// Largest pairwise moment statistic over a list of samples.
pub fn pairwise_moment_check(labels: &[Lang], samples: &[DMatrix<f64>]) -> PropositionReport {
    let mut pairs = Vec::new();
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            pairs.push((
                labels[i].clone(),
                labels[j].clone(),
                moment_test(&samples[i], &samples[j]),
            ));
        }
    }
    let max_stat = pairs.iter().map(|p| p.2.stat()).fold(0.0, f64::max);
    PropositionReport {
        pairs,
        max_stat,
        holds: max_stat <= 3.0,
    }
}

/// Target-side samples of `D_{L_i, L}(L)` for one source `L_i`.
pub fn target_marginal_sample<C: LanguageCodec>(
    codecs: &Codecs<C>,
    source: &Lang,
    target: &Lang,
    sampler: &LatentSampler,
    m: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    lookup(codecs, source)?;
    let ct = lookup(codecs, target)?;
    let (a, b) = (source.as_str(), target.as_str());
    let zs = sampler.sample(&mut rng_for(seed, &["marginal", a, b]), m);
    Ok(ct.decode_batch(&zs, &mut rng_for(seed, &["marginal-noise", a, b])))
}

/// Every source's target-side marginal is the same pushforward of the latent
/// distribution; checks that the samples agree in mean and covariance.
pub fn proposition_zero_check<C: LanguageCodec>(
    codecs: &Codecs<C>,
    sources: &[Lang],
    target: &Lang,
    sampler: &LatentSampler,
    m: usize,
    seed: u64,
) -> Result<PropositionReport> {
    if sources.len() < 2 {
        return Err(Error::arg("need at least two source languages"));
    }
    if m < 1000 {
        return Err(Error::arg(format!("moment check needs m >= 1000, got {m}")));
    }
    let samples = sources
        .iter()
        .map(|s| target_marginal_sample(codecs, s, target, sampler, m, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_moment_check(sources, &samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn langs(k: usize) -> Vec<Lang> {
        (0..k).map(|i| Lang::new(format!("L{i}"))).collect()
    }

    #[test]
    fn band_collapses_to_isometries() {
        let spec = FunctionClassSpec::new(3, 1.0, 1.0, 0.0).unwrap();
        for c in sample_ground_truth_codecs(&spec, &langs(3), 5).unwrap().values() {
            let w = &c.decoder().w;
            assert!((w.transpose() * w - DMatrix::identity(3, 3)).amax() < 1e-10);
            assert_eq!(c.decoder().b.amax(), 0.0);
        }
    }

    #[test]
    fn codecs_respect_the_band() {
        let spec = FunctionClassSpec::default();
        let codecs = sample_ground_truth_codecs(&spec, &langs(4), 11).unwrap();
        for c in codecs.values() {
            assert!(c.decoder().op_norm() <= spec.rho + 1e-10);
            assert!(c.decoder().min_singular_value() >= 1.0 / spec.rho - 1e-10);
            assert!(c.decoder().b.norm() <= spec.offset_bound + 1e-12);
        }
        let ls = langs(4);
        for a in &ls {
            for b in &ls {
                let comp = codecs[b].encoder().after(codecs[a].decoder());
                assert!(comp.op_norm() <= spec.rho * spec.rho + 1e-9);
            }
        }
    }

    #[test]
    fn codec_sampling_is_deterministic() {
        let spec = FunctionClassSpec::default();
        let a = sample_ground_truth_codecs(&spec, &langs(3), 9).unwrap();
        let b = sample_ground_truth_codecs(&spec, &langs(3), 9).unwrap();
        assert_eq!(a, b);
        let c = sample_ground_truth_codecs(&spec, &langs(3), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn latent_draws_stay_in_ball() {
        let s = LatentSampler::new(3, 1.5);
        let zs = s.sample(&mut ChaCha8Rng::seed_from_u64(1), 5000);
        assert!(zs.column_iter().all(|c| c.norm() <= 1.5 + 1e-12));
        let zero = LatentSampler::new(2, 0.0).sample(&mut ChaCha8Rng::seed_from_u64(1), 10);
        assert_eq!(zero.amax(), 0.0);
    }

    #[test]
    fn latent_mean_near_zero() {
        let (d, m, b) = (3usize, 100_000usize, 1.0);
        let zs = LatentSampler::new(d, b).sample(&mut ChaCha8Rng::seed_from_u64(2), m);
        let tol = 4.0 * b / ((m * (d + 2)) as f64).sqrt();
        assert!(zs.column_mean().amax() <= tol);
    }

    #[test]
    fn corpus_shares_latents() {
        let spec = FunctionClassSpec::default();
        let ls = langs(2);
        let codecs = sample_ground_truth_codecs(&spec, &ls, 3).unwrap();
        let sampler = LatentSampler::from_spec(&spec);
        let c = generate_corpus(&ls[0], &ls[1], &codecs, 50, &sampler, 4).unwrap();
        let za = codecs[&ls[0]].encode_batch(&c.xs);
        let zb = codecs[&ls[1]].encode_batch(&c.ys);
        assert!((za - zb).amax() < 1e-9);
        assert!(c.xs.column_iter().all(|x| x.norm() <= spec.m_bound() + 1e-9));
        let same = generate_corpus(&ls[0], &ls[0], &codecs, 10, &sampler, 4).unwrap();
        assert_eq!(same.xs, same.ys);
        assert!(generate_corpus(&ls[0], &Lang::new("X"), &codecs, 10, &sampler, 4).is_err());
    }

    #[test]
    fn corpus_mean_is_decoded_origin() {
        let spec = FunctionClassSpec::default();
        let ls = langs(2);
        let codecs = sample_ground_truth_codecs(&spec, &ls, 8).unwrap();
        let sampler = LatentSampler::from_spec(&spec);
        let c = generate_corpus(&ls[0], &ls[1], &codecs, 20_000, &sampler, 1).unwrap();
        let gap = c.xs.column_mean() - &codecs[&ls[0]].decoder().b;
        // per-coordinate sd is at most rho * B / sqrt(d + 2)
        let tol = 5.0 * spec.rho * spec.latent_radius / ((20_000 * (spec.d + 2)) as f64).sqrt();
        assert!(gap.amax() <= tol, "{gap}");
    }

    #[test]
    fn zero_noise_randomized_matches_deterministic() {
        let spec = FunctionClassSpec::default();
        let ls = langs(2);
        let det = sample_ground_truth_codecs(&spec, &ls, 21).unwrap();
        let rnd = sample_randomized_codecs(&spec, 0, 0.0, &ls, 21).unwrap();
        let sampler = LatentSampler::from_spec(&spec);
        let a = generate_corpus(&ls[0], &ls[1], &det, 40, &sampler, 2).unwrap();
        let b = generate_corpus(&ls[0], &ls[1], &rnd, 40, &sampler, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn randomized_encode_recovers_latent() {
        let spec = FunctionClassSpec::default();
        let ls = langs(2);
        let codecs = sample_randomized_codecs(&spec, 2, 0.3, &ls, 6).unwrap();
        let sampler = LatentSampler::from_spec(&spec);
        let zs = sampler.sample(&mut ChaCha8Rng::seed_from_u64(0), 200);
        let mut noise = ChaCha8Rng::seed_from_u64(1);
        for c in codecs.values() {
            let xs = c.decode_batch(&zs, &mut noise);
            assert!((c.encode_batch(&xs) - &zs).amax() < 1e-9);
        }
    }

    #[test]
    fn nuisance_variance_matches_columns() {
        // with z fixed at 0, Var(x) = σ² Var(r) Σ_j w_j w_j^T over nuisance columns
        let (d, k, sigma) = (2, 2, 0.5);
        let spec = FunctionClassSpec::new(d, 1.0, 2.0, 0.0).unwrap();
        let codec = &sample_randomized_codecs(&spec, k, sigma, &langs(2), 3).unwrap()[&Lang::new("L0")];
        let m = 40_000;
        let xs = codec.decode_batch(&DMatrix::zeros(d, m), &mut ChaCha8Rng::seed_from_u64(4));
        let var_r = 0.9733369246625415;
        let w = &codec.decoder_map().w;
        let cols = w.columns(d, k);
        let expected = (cols * cols.transpose()) * (sigma * sigma * var_r);
        let c = centered(&xs);
        let got = (&c * c.transpose()) / m as f64;
        assert!((got - expected).amax() < 0.02);
    }

    #[test]
    fn invariance_holds_for_nuisance_codec() {
        let spec = FunctionClassSpec::default();
        let codecs = sample_randomized_codecs(&spec, 2, 0.05, &langs(2), 12).unwrap();
        let sampler = LatentSampler::from_spec(&spec);
        let r = invariance_test(&codecs[&Lang::new("L0")], &sampler, 4000, 3).unwrap();
        assert!(r.max_roundtrip_error <= 1e-9);
        assert!(r.holds);
    }

    #[test]
    fn corrupted_encoder_fails_invariance() {
        let spec = FunctionClassSpec::default();
        let codecs = sample_randomized_codecs(&spec, 2, 0.05, &langs(2), 12).unwrap();
        let good = codecs[&Lang::new("L0")].clone();
        let wrong = codecs[&Lang::new("L1")].affine().encoder().clone();
        let bad = good.with_encoder(wrong);
        let r = invariance_test(&bad, &LatentSampler::from_spec(&spec), 4000, 3).unwrap();
        assert!(!r.holds);
        assert!(r.max_roundtrip_error > 0.1);
    }

    #[test]
    fn proposition_moments_match() {
        let spec = FunctionClassSpec::default();
        let ls = langs(3);
        let codecs = sample_ground_truth_codecs(&spec, &ls, 1).unwrap();
        let sampler = LatentSampler::from_spec(&spec);
        let r = proposition_zero_check(&codecs, &ls[..2], &ls[2], &sampler, 10_000, 5).unwrap();
        assert!(r.holds, "{}", r.max_stat);
        // identical streams give identical samples
        let s = target_marginal_sample(&codecs, &ls[0], &ls[2], &sampler, 2000, 5).unwrap();
        let r = pairwise_moment_check(&ls[..2], &[s.clone(), s]);
        assert_eq!(r.max_stat, 0.0);
    }

    #[test]
    fn mismatched_decoder_breaks_proposition() {
        let spec = FunctionClassSpec::default();
        let ls = langs(3);
        let codecs = sample_ground_truth_codecs(&spec, &ls, 1).unwrap();
        let sampler = LatentSampler::from_spec(&spec);
        let good = target_marginal_sample(&codecs, &ls[0], &ls[2], &sampler, 5000, 5).unwrap();
        // decode the second source's latents through the wrong language
        let bad = target_marginal_sample(&codecs, &ls[1], &ls[1], &sampler, 5000, 5).unwrap();
        assert!(!pairwise_moment_check(&ls[..2], &[good, bad]).holds);
    }

    #[test]
    fn spec_validation_collects_everything() {
        match FunctionClassSpec::new(0, -1.0, 0.5, -2.0) {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 4),
            other => panic!("{other:?}"),
        }
        assert_eq!(FunctionClassSpec::default().m_bound(), 3.0);
    }
}
