//! Count-Min sketch over a discretized value range, the estimated empirical
//! distribution it induces, and mean/median predictors built on it.
//!
//! ```
//! use streamcast::sketch::{CountMinTable, Eedf, HashFamily, IntervalMap};
//!
//! let hashes = HashFamily::sample(5, 50, 200, 42).unwrap();
//! let range = IntervalMap::new(0.0, 10.0, 200).unwrap();
//! let mut table = CountMinTable::with_range(hashes, range).unwrap();
//! for y in [1.0, 2.0, 2.5, 7.0] {
//!     table.update(y).unwrap();
//! }
//! let eedf = Eedf::from_table(&table).unwrap();
//! assert!(eedf.mean() > 0.0);
//! ```

mod eedf;
mod hash;
mod table;

pub use eedf::{median_index, median_index_counts, median_value, Eedf};
pub use hash::{HashFamily, PRIME};
pub use table::{CountMinTable, IntervalMap, Placement};

/// Hash count and width for an additive error `eps` with failure probability
/// `delta`: `d = ceil(ln(1/delta))`, `V = ceil(2/eps)`.
pub fn dimensions_for(eps: f64, delta: f64) -> (usize, usize) {
    let d = (1.0 / delta).ln().ceil().max(1.0) as usize;
    let v = (2.0 / eps).ceil() as usize;
    (d, v)
}
