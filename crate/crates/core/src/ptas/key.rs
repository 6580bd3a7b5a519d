//! Memo keys of the hierarchical dynamic program.
//!
//! A key names a tree node, the time already taken on each machine inside
//! that node (`v`), and how many pushed-down jobs of each size are waiting
//! at the node itself or at one of its children (`u`).

use thiserror::Error;

use crate::instance::Time;

/// Occupied `(start, end)` pairs on one machine.
pub type Blocks = Vec<(Time, Time)>;

/// Sparse count vector entry: `(slot, size index, count)`. Slot 0 is the
/// node itself, slot `1 + i` its `i`-th child.
pub type CountEntry = (u32, u32, u32);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("overlapping blocked pairs {first:?} and {second:?} on machine {machine}")]
    Overlap { machine: usize, first: (Time, Time), second: (Time, Time) },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DpKey {
    pub node: usize,
    pub v: Vec<Blocks>,
    pub u: Vec<CountEntry>,
}

/// Sorts the pairs and merges abutting ones. Empty pairs vanish.
pub fn canonicalize_blocks(machine: usize, mut pairs: Blocks) -> Result<Blocks, KeyError> {
    pairs.retain(|&(s, e)| s < e);
    pairs.sort_unstable();
    let mut out: Blocks = Vec::with_capacity(pairs.len());
    for (s, e) in pairs {
        match out.last_mut() {
            Some(last) if s < last.1 => {
                return Err(KeyError::Overlap { machine, first: *last, second: (s, e) });
            }
            Some(last) if s == last.1 => last.1 = e,
            _ => out.push((s, e)),
        }
    }
    Ok(out)
}

/// Canonical form of a state: `v` per machine sorted and merged, `u` sorted
/// with zero entries dropped and duplicate slots summed.
pub fn canonicalize_key(node: usize, v: Vec<Blocks>, mut u: Vec<CountEntry>) -> Result<DpKey, KeyError> {
    let v = v
        .into_iter()
        .enumerate()
        .map(|(m, pairs)| canonicalize_blocks(m, pairs))
        .collect::<Result<Vec<_>, _>>()?;
    u.sort_unstable();
    let mut merged: Vec<CountEntry> = Vec::with_capacity(u.len());
    for (slot, sigma, n) in u {
        match merged.last_mut() {
            Some(last) if last.0 == slot && last.1 == sigma => last.2 += n,
            _ => merged.push((slot, sigma, n)),
        }
    }
    merged.retain(|e| e.2 > 0);
    Ok(DpKey { node, v, u: merged })
}

/// The pairs of `blocks` clipped to `[lo, hi]`.
pub fn clip(blocks: &[(Time, Time)], lo: Time, hi: Time) -> Blocks {
    blocks
        .iter()
        .filter_map(|&(s, e)| {
            let (s, e) = (s.max(lo), e.min(hi));
            (s < e).then_some((s, e))
        })
        .collect()
}

/// True when `[s, e)` meets no pair of `blocks`.
pub fn is_free(blocks: &[(Time, Time)], s: Time, e: Time) -> bool {
    blocks.iter().all(|&(bs, be)| e <= bs || be <= s)
}
