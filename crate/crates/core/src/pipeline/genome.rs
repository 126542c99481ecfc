use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{HyperparamSpace, ModelSpec};

pub const MIN_INSTANCE_FRACTION: f64 = 0.1;

/// Number of independently mutated genes.
pub const N_GENES: usize = 5;

/// Which data-reduction components a genome uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrMode {
    NoDr,
    OnlyIs,
    OnlyFs,
    IsAndFs,
}

impl DrMode {
    pub const ALL: [DrMode; 4] = [DrMode::NoDr, DrMode::OnlyIs, DrMode::OnlyFs, DrMode::IsAndFs];

    pub fn uses_instances(&self) -> bool {
        matches!(self, DrMode::OnlyIs | DrMode::IsAndFs)
    }

    pub fn uses_features(&self) -> bool {
        matches!(self, DrMode::OnlyFs | DrMode::IsAndFs)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DrMode::NoDr => "no_dr",
            DrMode::OnlyIs => "only_is",
            DrMode::OnlyFs => "only_fs",
            DrMode::IsAndFs => "is_and_fs",
        }
    }
}

/// One candidate pipeline: data reduction plus a configured model.
///
/// `instance_fraction` and `feature_mask` are always stored, but only take
/// effect when `dr_mode` enables them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineGenome {
    pub dr_mode: DrMode,
    pub instance_fraction: f64,
    pub instance_seed: u64,
    /// One bit per original (pre-encoding) feature column.
    pub feature_mask: Vec<bool>,
    pub model_spec: ModelSpec,
}

impl PipelineGenome {
    pub fn effective_fraction(&self) -> f64 {
        if self.dr_mode.uses_instances() {
            self.instance_fraction
        } else {
            1.0
        }
    }

    pub fn effective_mask(&self) -> Vec<bool> {
        if self.dr_mode.uses_features() {
            self.feature_mask.clone()
        } else {
            vec![true; self.feature_mask.len()]
        }
    }

    /// Original feature indices kept by the effective mask.
    pub fn selected_features(&self) -> Vec<usize> {
        self.effective_mask()
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.feature_mask.len() != n_features {
            return Err(Error::Contract(format!(
                "feature mask has {} bits for {n_features} features",
                self.feature_mask.len()
            )));
        }
        if !self.feature_mask.iter().any(|&b| b) {
            return Err(Error::Contract("feature mask selects no feature".into()));
        }
        if !(MIN_INSTANCE_FRACTION..=1.0).contains(&self.instance_fraction) {
            return Err(Error::Contract(format!(
                "instance fraction {} outside [{MIN_INSTANCE_FRACTION}, 1]",
                self.instance_fraction
            )));
        }
        HyperparamSpace::default().check(&self.model_spec)
    }

    /// Stable text form, also used as a cache key and final tie-breaker.
    pub fn to_key(&self) -> String {
        serde_json::to_string(self).expect("genome serialises")
    }
}

fn repair<R: Rng + ?Sized>(g: &mut PipelineGenome, rng: &mut R) {
    if !g.feature_mask.iter().any(|&b| b) && !g.feature_mask.is_empty() {
        let i = rng.gen_range(0..g.feature_mask.len());
        g.feature_mask[i] = true;
    }
    g.instance_fraction = g.instance_fraction.clamp(MIN_INSTANCE_FRACTION, 1.0);
}

/// Uniform mode, uniform fraction, Bernoulli(0.5) mask bits, and a model
/// drawn from `space`.
pub fn random_genome<R: Rng + ?Sized>(
    rng: &mut R,
    n_features: usize,
    space: &HyperparamSpace,
) -> PipelineGenome {
    let mut g = PipelineGenome {
        dr_mode: *DrMode::ALL.choose(rng).unwrap(),
        instance_fraction: rng.gen_range(MIN_INSTANCE_FRACTION..=1.0),
        instance_seed: rng.gen(),
        feature_mask: (0..n_features).map(|_| rng.gen_bool(0.5)).collect(),
        model_spec: space.sample(rng),
    };
    repair(&mut g, rng);
    g
}

fn resample_hyperparameters<R: Rng + ?Sized>(
    spec: &ModelSpec,
    rng: &mut R,
    space: &HyperparamSpace,
) -> ModelSpec {
    if rng.gen_bool(0.5) {
        space.sample_for(spec.model_id(), rng)
    } else {
        space.sample(rng)
    }
}

/// Each gene changes with probability `p_gene`: the mode and model are
/// resampled, the fraction jittered by up to 0.1, the seed redrawn. Mask bits
/// flip independently with probability `p_gene / n_features`.
pub fn mutate<R: Rng + ?Sized>(
    g: &PipelineGenome,
    rng: &mut R,
    p_gene: f64,
    space: &HyperparamSpace,
) -> PipelineGenome {
    let p_gene = p_gene.clamp(0.0, 1.0);
    let mut out = g.clone();
    if rng.gen_bool(p_gene) {
        out.dr_mode = *DrMode::ALL.choose(rng).unwrap();
    }
    if rng.gen_bool(p_gene) {
        out.instance_fraction = (out.instance_fraction + rng.gen_range(-0.1..=0.1))
            .clamp(MIN_INSTANCE_FRACTION, 1.0);
    }
    if rng.gen_bool(p_gene) {
        out.instance_seed = rng.gen();
    }
    let n = out.feature_mask.len().max(1);
    let p_bit = p_gene / n as f64;
    for bit in out.feature_mask.iter_mut() {
        if rng.gen_bool(p_bit) {
            *bit = !*bit;
        }
    }
    if rng.gen_bool(p_gene) {
        out.model_spec = resample_hyperparameters(&out.model_spec, rng, space);
    }
    repair(&mut out, rng);
    out
}

/// Uniform crossover: every scalar gene and every mask bit is swapped between
/// the children with probability 0.5.
pub fn crossover<R: Rng + ?Sized>(
    a: &PipelineGenome,
    b: &PipelineGenome,
    rng: &mut R,
) -> (PipelineGenome, PipelineGenome) {
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    if rng.gen_bool(0.5) {
        std::mem::swap(&mut c1.dr_mode, &mut c2.dr_mode);
    }
    if rng.gen_bool(0.5) {
        std::mem::swap(&mut c1.instance_fraction, &mut c2.instance_fraction);
    }
    if rng.gen_bool(0.5) {
        std::mem::swap(&mut c1.instance_seed, &mut c2.instance_seed);
    }
    for (x, y) in c1.feature_mask.iter_mut().zip(c2.feature_mask.iter_mut()) {
        if rng.gen_bool(0.5) {
            std::mem::swap(x, y);
        }
    }
    if rng.gen_bool(0.5) {
        std::mem::swap(&mut c1.model_spec, &mut c2.model_spec);
    }
    repair(&mut c1, rng);
    repair(&mut c2, rng);
    (c1, c2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn space() -> HyperparamSpace {
        HyperparamSpace::default()
    }

    #[test]
    fn random_genome_is_seeded_and_valid() {
        let a = random_genome(&mut rng::rng_from(3), 14, &space());
        let b = random_genome(&mut rng::rng_from(3), 14, &space());
        assert_eq!(a, b);
        a.validate(14).unwrap();
    }

    #[test]
    fn dr_modes_roughly_uniform() {
        let mut r = rng::rng_from(8);
        let mut counts = [0usize; 4];
        for _ in 0..400 {
            let g = random_genome(&mut r, 6, &space());
            counts[DrMode::ALL.iter().position(|&m| m == g.dr_mode).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / 400.0;
            assert!((0.15..=0.35).contains(&f), "{counts:?}");
        }
    }

    #[test]
    fn zero_rate_mutation_is_identity() {
        let g = random_genome(&mut rng::rng_from(1), 10, &space());
        assert_eq!(mutate(&g, &mut rng::rng_from(2), 0.0, &space()), g);
    }

    #[test]
    fn full_rate_mutation_keeps_fraction_near_one() {
        let mut g = random_genome(&mut rng::rng_from(1), 10, &space());
        g.instance_fraction = 1.0;
        for s in 0..50 {
            let m = mutate(&g, &mut rng::rng_from(s), 1.0, &space());
            assert!((0.9..=1.0).contains(&m.instance_fraction));
        }
    }

    #[test]
    fn empty_mask_is_repaired() {
        let mut g = random_genome(&mut rng::rng_from(1), 1, &space());
        g.feature_mask = vec![true];
        // the only bit flips with probability 1
        let m = mutate(&g, &mut rng::rng_from(0), 1.0, &space());
        assert_eq!(m.feature_mask, vec![true]);
    }

    #[test]
    fn crossover_of_equal_parents_is_identity() {
        let g = random_genome(&mut rng::rng_from(4), 9, &space());
        let (a, b) = crossover(&g, &g, &mut rng::rng_from(5));
        assert_eq!((a, b), (g.clone(), g));
    }

    #[test]
    fn complementary_masks_split_between_children() {
        let mut a = random_genome(&mut rng::rng_from(4), 12, &space());
        let mut b = random_genome(&mut rng::rng_from(5), 12, &space());
        a.feature_mask = (0..12).map(|i| i % 2 == 0).collect();
        b.feature_mask = a.feature_mask.iter().map(|x| !x).collect();
        for s in 0..30 {
            let (c1, c2) = crossover(&a, &b, &mut rng::rng_from(s));
            if c1.feature_mask.iter().any(|&x| x) && c2.feature_mask.iter().any(|&x| x) {
                for i in 0..12 {
                    assert_ne!(c1.feature_mask[i], c2.feature_mask[i]);
                }
            }
            assert!([a.instance_fraction, b.instance_fraction].contains(&c1.instance_fraction));
            assert!([a.instance_fraction, b.instance_fraction].contains(&c2.instance_fraction));
        }
    }

    #[test]
    fn json_round_trip() {
        let g = random_genome(&mut rng::rng_from(11), 7, &space());
        let back: PipelineGenome = serde_json::from_str(&g.to_key()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn effective_values_follow_mode() {
        let mut g = random_genome(&mut rng::rng_from(2), 5, &space());
        g.feature_mask = vec![true, false, false, false, false];
        g.instance_fraction = 0.3;
        g.dr_mode = DrMode::NoDr;
        assert_eq!(g.effective_fraction(), 1.0);
        assert_eq!(g.selected_features().len(), 5);
        g.dr_mode = DrMode::IsAndFs;
        assert_eq!(g.effective_fraction(), 0.3);
        assert_eq!(g.selected_features(), vec![0]);
    }

    proptest! {
        #[test]
        fn operators_preserve_invariants(s1 in any::<u64>(), s2 in any::<u64>(), p in 0.0f64..=1.0, n in 1usize..20) {
            let mut r = rng::rng_from(s1);
            let a = random_genome(&mut r, n, &space());
            let b = random_genome(&mut rng::rng_from(s2), n, &space());
            let (c1, c2) = crossover(&a, &b, &mut r);
            for g in [&a, &b, &c1, &c2, &mutate(&c1, &mut r, p, &space())] {
                prop_assert!(g.validate(n).is_ok());
            }
        }
    }
}
