use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, FAILURE, NORMAL};
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.6,
            val_frac: 0.2,
            test_frac: 0.2,
            stratified: true,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        let s = Self {
            train_frac,
            val_frac,
            test_frac,
            stratified: true,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let f = [self.train_frac, self.val_frac, self.test_frac];
        if f.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!(
                "split fractions must be positive, got {f:?}"
            )));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::SplitFractions(sum));
        }
        Ok(())
    }

    /// Per-part counts for a class of `n` rows: rounded train and val sizes,
    /// test takes the remainder, every part gets at least one row.
    fn part_sizes(&self, n: usize) -> [usize; 3] {
        let mut train = ((self.train_frac * n as f64).round() as usize).max(1);
        let mut val = ((self.val_frac * n as f64).round() as usize).max(1);
        while train + val + 1 > n {
            if train >= val && train > 1 {
                train -= 1;
            } else {
                val -= 1;
            }
        }
        [train, val, n - train - val]
    }
}

/// Splits `d` into disjoint train/validation/test parts. Rows within each
/// part keep their original order.
pub fn stratified_split(d: &Dataset, s: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    s.validate()?;
    let mut rng = seeded(s.seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    let mut assign = |mut idx: Vec<usize>, class: u8| -> Result<()> {
        if idx.len() < 3 {
            return Err(Error::TooFewSamples {
                class,
                count: idx.len(),
                needed: 3,
            });
        }
        idx.shuffle(&mut rng);
        let [a, b, _] = s.part_sizes(idx.len());
        parts[0].extend_from_slice(&idx[..a]);
        parts[1].extend_from_slice(&idx[a..a + b]);
        parts[2].extend_from_slice(&idx[a + b..]);
        Ok(())
    };
    if s.stratified {
        assign(d.indices_of(NORMAL), NORMAL)?;
        assign(d.indices_of(FAILURE), FAILURE)?;
    } else {
        assign((0..d.len()).collect(), FAILURE)?;
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    let [train, val, test] = parts;
    Ok((d.subset(&train)?, d.subset(&val)?, d.subset(&test)?))
}
