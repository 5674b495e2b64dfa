//! Synthetic data: features uniform in a ball of declared radius, labels from a
//! logistic link on a fixed direction. Every example is drawn from its own
//! counter-keyed stream, so datasets regenerate bit-identically.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::losses::{sigmoid, Example};
use crate::rng::{Domain, StreamKey};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Generator name; only `"ball"` is provided.
    pub distribution: String,
    pub dim: usize,
    pub radius: f64,
    /// Slope of the label link `P(y = 1 | x) = σ(slope·⟨θ, x⟩/radius)`.
    pub label_slope: f64,
}

impl DatasetSpec {
    pub fn ball(dim: usize, radius: f64) -> Self {
        Self {
            distribution: "ball".into(),
            dim,
            radius,
            label_slope: 4.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.distribution != "ball" {
            return Err(invalid(format!("unknown distribution {:?}", self.distribution)));
        }
        if self.dim < 1 {
            return Err(invalid("dataset dim must be >= 1"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid("dataset radius must be positive"));
        }
        Ok(())
    }

    /// Draws one example from the stream `key`.
    pub fn draw(&self, key: StreamKey) -> Example {
        let mut rng = key.rng();
        let d = self.dim;
        let mut x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let g = crate::stats::norm(&x);
        let u: f64 = rng.random();
        let r = self.radius * u.powf(1.0 / d as f64);
        let k = if g > 0.0 { r / g } else { 0.0 };
        x.iter_mut().for_each(|v| *v *= k);
        // rounding can push the norm a hair over the radius
        let nx = crate::stats::norm(&x);
        if nx > self.radius {
            let s = self.radius / nx;
            x.iter_mut().for_each(|v| *v *= s);
        }
        let proj = x.iter().sum::<f64>() / (d as f64).sqrt();
        let p = sigmoid(self.label_slope * proj / self.radius);
        let label = if rng.random::<f64>() < p { 1.0 } else { -1.0 };
        Example::new(x, label)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: String,
    pub spec: DatasetSpec,
    pub seed: u64,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

pub fn generate_dataset(spec: &DatasetSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n < 2 {
        return Err(invalid("dataset size n must be >= 2"));
    }
    let examples = (0..n)
        .map(|j| spec.draw(StreamKey::new(seed, Domain::Data).replica(j as u64)))
        .collect();
    Ok(Dataset {
        id: format!("{}-d{}-r{}-n{}-s{}", spec.distribution, spec.dim, spec.radius, n, seed),
        spec: spec.clone(),
        seed,
        examples,
    })
}

/// Neighboring datasets `S`, `S'` that differ only at `swap_index` (1-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborPair {
    pub base: Dataset,
    pub variant: Dataset,
    pub swap_index: usize,
    pub replacement: Example,
}

pub fn make_neighbor(base: &Dataset, swap_index: usize, seed: u64) -> Result<NeighborPair> {
    let n = base.len();
    if swap_index < 1 || swap_index > n {
        return Err(invalid(format!("swap index {swap_index} outside 1..={n}")));
    }
    let replacement = base
        .spec
        .draw(StreamKey::new(seed, Domain::Replacement).replica(swap_index as u64));
    Ok(NeighborPair::with_replacement(base, swap_index, replacement))
}

impl NeighborPair {
    fn with_replacement(base: &Dataset, swap_index: usize, replacement: Example) -> Self {
        let mut variant = base.clone();
        variant.examples[swap_index - 1] = replacement.clone();
        variant.id = format!("{}~swap{}", base.id, swap_index);
        Self {
            base: base.clone(),
            variant,
            swap_index,
            replacement,
        }
    }

    /// Degenerate pair whose "replacement" is the original example, so `S' = S`.
    pub fn identical(base: &Dataset, swap_index: usize) -> Result<Self> {
        if swap_index < 1 || swap_index > base.len() {
            return Err(invalid(format!("swap index {swap_index} outside 1..={}", base.len())));
        }
        let same = base.examples[swap_index - 1].clone();
        Ok(Self::with_replacement(base, swap_index, same))
    }

    /// Puts the original example back into the variant.
    pub fn restore(&self) -> Dataset {
        let mut d = self.variant.clone();
        d.examples[self.swap_index - 1] = self.base.examples[self.swap_index - 1].clone();
        d.id = self.base.id.clone();
        d
    }
}
