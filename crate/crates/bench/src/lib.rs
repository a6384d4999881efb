//! Fixtures shared by the kernel benchmarks.

use osmc::datagen::gen_gaussian;
use osmc::masking::sample_mask;
use osmc::{ObservedEntries, Rng};

/// Gaussian ground truth observed at `k` entries per row.
pub fn observed_gaussian(m: usize, d: usize, r: usize, k: usize, seed: u64) -> ObservedEntries {
    let mut rng = Rng::new(seed);
    let gt = gen_gaussian(m, d, r, &mut rng).expect("valid shape");
    let obs = sample_mask(m, d, k, &mut rng).expect("valid k");
    gt.observe(&obs).expect("matching shape")
}
