use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Result};

/// Modulus of the universal family (the Mersenne prime 2^31 - 1).
pub const PRIME: u64 = (1 << 31) - 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Buckets {
    Universal(Vec<(u64, u64)>),
    Table(Vec<Vec<usize>>),
}

/// `d` hash functions from keys `0..k_int` onto buckets `0..v`.
///
/// Sampled families use `h_j(k) = ((a_j k + b_j) mod p) mod v`. A family can
/// also be given as an explicit lookup table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashFamily {
    v: usize,
    k_int: usize,
    pub(crate) buckets: Buckets,
}

impl HashFamily {
    pub fn sample(d: usize, v: usize, k_int: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::sample_with(d, v, k_int, &mut rng)
    }

    pub fn sample_with<R: Rng>(d: usize, v: usize, k_int: usize, rng: &mut R) -> Result<Self> {
        check_shape(d, v, k_int)?;
        if k_int as u64 >= PRIME {
            return Err(param(format!("K_int = {k_int} must be below {PRIME}")));
        }
        let coeffs = (0..d)
            .map(|_| (rng.random_range(1..PRIME), rng.random_range(0..PRIME)))
            .collect();
        Ok(Self {
            v,
            k_int,
            buckets: Buckets::Universal(coeffs),
        })
    }

    /// Explicit coefficients; used when restoring a serialized sketch.
    pub fn from_coefficients(v: usize, k_int: usize, coeffs: Vec<(u64, u64)>) -> Result<Self> {
        check_shape(coeffs.len(), v, k_int)?;
        if k_int as u64 >= PRIME {
            return Err(param(format!("K_int = {k_int} must be below {PRIME}")));
        }
        if coeffs.iter().any(|&(a, b)| a == 0 || a >= PRIME || b >= PRIME) {
            return Err(param("hash coefficients out of range"));
        }
        Ok(Self {
            v,
            k_int,
            buckets: Buckets::Universal(coeffs),
        })
    }

    /// `table[j][k]` is the bucket of key `k` under function `j`.
    pub fn from_table(v: usize, table: Vec<Vec<usize>>) -> Result<Self> {
        let k_int = table.first().map_or(0, |r| r.len());
        if table.is_empty() || k_int == 0 {
            return Err(param("hash table must be nonempty"));
        }
        if table.iter().any(|r| r.len() != k_int || r.iter().any(|&b| b >= v)) {
            return Err(param("hash table rows must share a length and stay below V"));
        }
        Ok(Self {
            v,
            k_int,
            buckets: Buckets::Table(table),
        })
    }

    pub fn d(&self) -> usize {
        match &self.buckets {
            Buckets::Universal(c) => c.len(),
            Buckets::Table(t) => t.len(),
        }
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn k_int(&self) -> usize {
        self.k_int
    }

    pub fn coefficients(&self) -> Option<&[(u64, u64)]> {
        match &self.buckets {
            Buckets::Universal(c) => Some(c),
            Buckets::Table(_) => None,
        }
    }

    #[inline]
    pub fn bucket(&self, j: usize, key: usize) -> usize {
        match &self.buckets {
            Buckets::Universal(c) => {
                let (a, b) = c[j];
                (((a * key as u64 + b) % PRIME) % self.v as u64) as usize
            }
            Buckets::Table(t) => t[j][key],
        }
    }
}

fn check_shape(d: usize, v: usize, k_int: usize) -> Result<()> {
    if d == 0 {
        return Err(param("need at least one hash function"));
    }
    if v < 2 {
        return Err(param("V must be at least 2"));
    }
    if k_int < v {
        return Err(param(format!("K_int = {k_int} must be at least V = {v}")));
    }
    Ok(())
}
