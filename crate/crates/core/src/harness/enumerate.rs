use crate::allocation::Partition;
use crate::error::{Error, Result};

/// Largest `n` accepted by [`enumerate_partitions`]; Bell(12) = 4,213,597.
pub const MAX_ENUMERATION: usize = 12;

/// Every set partition of `[n]` in canonical form, listed in lexicographic
/// order of restricted growth strings.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>> {
    if n > MAX_ENUMERATION {
        return Err(Error::TooLarge {
            n,
            limit: MAX_ENUMERATION,
        });
    }
    if n == 0 {
        return Ok(vec![Partition::empty()]);
    }
    let mut out = Vec::new();
    // a[i] is the block of index i + 1; a[i] <= 1 + max(a[..i]).
    let mut a = vec![0usize; n];
    let mut maxes = vec![0usize; n];
    loop {
        let k = maxes[n - 1] + 1;
        let mut blocks = vec![Vec::new(); k];
        for (i, &b) in a.iter().enumerate() {
            blocks[b].push(i + 1);
        }
        out.push(Partition::from_valid_blocks(n, blocks));

        // Advance to the next restricted growth string.
        let mut i = n - 1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            if a[i] <= maxes[i - 1] {
                a[i] += 1;
                maxes[i] = maxes[i - 1].max(a[i]);
                for j in i + 1..n {
                    a[j] = 0;
                    maxes[j] = maxes[i];
                }
                break;
            }
            i -= 1;
        }
    }
}
