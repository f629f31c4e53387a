use crate::error::{Error, Result};

/// SplitMix64 (Steele, Lea and Flood), pinned so a split is reproducible
/// from any language.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform-ish index in `0..bound` by multiply-shift: `(x * bound) >> 64`.
    pub fn below(&mut self, bound: usize) -> usize {
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Shuffles a copy of `items` with Fisher–Yates driven by [`SplitMix64`]
/// (for `i` from `n - 1` down to 1, swap `i` with `below(i + 1)`), then cuts
/// train, val and test off the front in that order. Items past
/// `train + val + test` are dropped.
pub fn split_dataset<T: Clone>(items: &[T], spec: SplitSpec) -> Result<Splits<T>> {
    let need = spec
        .train
        .checked_add(spec.val)
        .and_then(|s| s.checked_add(spec.test))
        .ok_or_else(|| Error::InvalidSplit("split counts overflow".into()))?;
    if need > items.len() {
        return Err(Error::InvalidSplit(format!(
            "{}+{}+{} = {need} exceeds {} items",
            spec.train,
            spec.val,
            spec.test,
            items.len()
        )));
    }
    let mut v = items.to_vec();
    let mut rng = SplitMix64::new(spec.seed);
    for i in (1..v.len()).rev() {
        let j = rng.below(i + 1);
        v.swap(i, j);
    }
    v.truncate(need);
    let test = v.split_off(spec.train + spec.val);
    let val = v.split_off(spec.train);
    Ok(Splits { train: v, val, test })
}
