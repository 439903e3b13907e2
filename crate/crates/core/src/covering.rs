//! Covering schemes: which function shares and input shares each server
//! holds, and which products `F_u x_v` it computes.
//!
//! All indices are 1-based. Server `l` holds the function shares in `A_l`,
//! the input shares in `B_l`, and computes the cells in `C_l`. A scheme is
//! valid when:
//!
//! - **cover**: the products `A_l x B_l` together contain `[a] x [b]`;
//! - **function privacy**: every `A_l` is a proper subset of `[a]`;
//! - **input privacy**: every `B_l` is a proper subset of `[b]`;
//! - **partition**: `C_l` is inside `A_l x B_l`, the `C_l` are pairwise
//!   disjoint and together they are exactly `[a] x [b]`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A product index `(u, v)`: function share `u` times input share `v`.
pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Structure,
    Cover,
    FunctionPrivacy,
    InputPrivacy,
    Partition,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Structure => "structure",
            Condition::Cover => "cover",
            Condition::FunctionPrivacy => "function privacy",
            Condition::InputPrivacy => "input privacy",
            Condition::Partition => "partition",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `k`, `a` or `b` below 2, or set lists of the wrong length.
    Parameters { k: usize, a: usize, b: usize },
    /// An empty `A_l` or `B_l`, or an index outside `[a]` / `[b]`.
    BadSet { server: usize, detail: String },
    Uncovered { u: usize, v: usize },
    FullFunctionSet { server: usize },
    FullInputSet { server: usize },
    CellOutsideProduct { server: usize, cell: Cell },
    Overlap { cell: Cell, first: usize, second: usize },
    Unassigned { cell: Cell },
}

impl Violation {
    pub fn condition(&self) -> Condition {
        match self {
            Violation::Parameters { .. } | Violation::BadSet { .. } => Condition::Structure,
            Violation::Uncovered { .. } => Condition::Cover,
            Violation::FullFunctionSet { .. } => Condition::FunctionPrivacy,
            Violation::FullInputSet { .. } => Condition::InputPrivacy,
            Violation::CellOutsideProduct { .. } | Violation::Overlap { .. } | Violation::Unassigned { .. } => {
                Condition::Partition
            }
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} condition: ", self.condition())?;
        match self {
            Violation::Parameters { k, a, b } => write!(f, "bad parameters k={k}, a={a}, b={b}"),
            Violation::BadSet { server, detail } => write!(f, "server {server}: {detail}"),
            Violation::Uncovered { u, v } => write!(f, "({u}, {v}) is in no A_l x B_l"),
            Violation::FullFunctionSet { server } => write!(f, "A_{server} is all of [a]"),
            Violation::FullInputSet { server } => write!(f, "B_{server} is all of [b]"),
            Violation::CellOutsideProduct { server, cell } => {
                write!(f, "C_{server} contains {cell:?} outside A_{server} x B_{server}")
            }
            Violation::Overlap { cell, first, second } => write!(f, "{cell:?} is in both C_{first} and C_{second}"),
            Violation::Unassigned { cell } => write!(f, "{cell:?} is in no C_l"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveringScheme {
    pub k: usize,
    pub a: usize,
    pub b: usize,
    #[serde(rename = "A")]
    pub a_sets: Vec<BTreeSet<usize>>,
    #[serde(rename = "B")]
    pub b_sets: Vec<BTreeSet<usize>>,
    #[serde(rename = "C")]
    pub c_sets: Vec<BTreeSet<Cell>>,
}

/// What one server needs to know about the scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerSlice {
    pub server: usize,
    pub a_set: BTreeSet<usize>,
    pub b_set: BTreeSet<usize>,
    pub c_set: BTreeSet<Cell>,
}

fn set<const N: usize>(items: [usize; N]) -> BTreeSet<usize> {
    items.into_iter().collect()
}

/// The three-server instantiation with `a = b = 3`: fewest servers.
pub fn pi_s() -> CoveringScheme {
    CoveringScheme {
        k: 3,
        a: 3,
        b: 3,
        a_sets: vec![set([1, 2]), set([1, 3]), set([2, 3])],
        b_sets: vec![set([1, 2]), set([1, 3]), set([2, 3])],
        c_sets: vec![
            [(1, 1), (1, 2), (2, 1), (2, 2)].into_iter().collect(),
            [(1, 3), (3, 1), (3, 3)].into_iter().collect(),
            [(2, 3), (3, 2)].into_iter().collect(),
        ],
    }
}

/// The four-server instantiation with `a = b = 2`: least total work.
pub fn pi_w() -> CoveringScheme {
    let cells = [(1, 1), (1, 2), (2, 1), (2, 2)];
    CoveringScheme {
        k: 4,
        a: 2,
        b: 2,
        a_sets: cells.iter().map(|&(u, _)| set([u])).collect(),
        b_sets: cells.iter().map(|&(_, v)| set([v])).collect(),
        c_sets: cells.iter().map(|&c| [c].into_iter().collect()).collect(),
    }
}

impl CoveringScheme {
    /// Builds a scheme from `A`/`B` sets, deriving the partition by
    /// lowest-index assignment, and validates it.
    pub fn from_cover(a: usize, b: usize, a_sets: Vec<BTreeSet<usize>>, b_sets: Vec<BTreeSet<usize>>) -> Result<Self> {
        let c_sets = derive_partition(a, b, &a_sets, &b_sets)?;
        let scheme = CoveringScheme {
            k: a_sets.len(),
            a,
            b,
            a_sets,
            b_sets,
            c_sets,
        };
        scheme.validate().map_err(Error::InvalidScheme)?;
        Ok(scheme)
    }

    /// Checks every condition in order (structure, cover, function privacy,
    /// input privacy, partition) and reports the first violation.
    pub fn validate(&self) -> std::result::Result<(), Violation> {
        match self.violations().into_iter().next() {
            Some(v) => Err(v),
            None => Ok(()),
        }
    }

    /// Every violation, in checking order. Structural problems stop the scan.
    pub fn violations(&self) -> Vec<Violation> {
        let (k, a, b) = (self.k, self.a, self.b);
        if k < 2 || a < 2 || b < 2 || self.a_sets.len() != k || self.b_sets.len() != k || self.c_sets.len() != k {
            return vec![Violation::Parameters { k, a, b }];
        }
        let mut out = Vec::new();
        for l in 0..k {
            let server = l + 1;
            for (sets, bound, name) in [(&self.a_sets, a, "A"), (&self.b_sets, b, "B")] {
                let s = &sets[l];
                if s.is_empty() {
                    out.push(Violation::BadSet {
                        server,
                        detail: format!("{name}_{server} is empty"),
                    });
                } else if s.iter().any(|&i| i == 0 || i > bound) {
                    out.push(Violation::BadSet {
                        server,
                        detail: format!("{name}_{server} has an index outside [{bound}]"),
                    });
                }
            }
            if self.c_sets[l].iter().any(|&(u, v)| u == 0 || u > a || v == 0 || v > b) {
                out.push(Violation::BadSet {
                    server,
                    detail: format!("C_{server} has a cell outside [{a}] x [{b}]"),
                });
            }
        }
        if !out.is_empty() {
            return out;
        }

        for u in 1..=a {
            for v in 1..=b {
                if !(0..k).any(|l| self.a_sets[l].contains(&u) && self.b_sets[l].contains(&v)) {
                    out.push(Violation::Uncovered { u, v });
                }
            }
        }
        for l in 0..k {
            if self.a_sets[l].len() == a {
                out.push(Violation::FullFunctionSet { server: l + 1 });
            }
        }
        for l in 0..k {
            if self.b_sets[l].len() == b {
                out.push(Violation::FullInputSet { server: l + 1 });
            }
        }
        let mut owner = vec![None; a * b];
        for l in 0..k {
            for &(u, v) in &self.c_sets[l] {
                if !(self.a_sets[l].contains(&u) && self.b_sets[l].contains(&v)) {
                    out.push(Violation::CellOutsideProduct {
                        server: l + 1,
                        cell: (u, v),
                    });
                }
                let slot = &mut owner[(u - 1) * b + (v - 1)];
                match *slot {
                    Some(first) => out.push(Violation::Overlap {
                        cell: (u, v),
                        first,
                        second: l + 1,
                    }),
                    None => *slot = Some(l + 1),
                }
            }
        }
        for (i, o) in owner.iter().enumerate() {
            if o.is_none() {
                out.push(Violation::Unassigned {
                    cell: (i / b + 1, i % b + 1),
                });
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    /// `sum |C_l|`; equals `ab` for a valid scheme.
    pub fn total_cells(&self) -> usize {
        self.c_sets.iter().map(BTreeSet::len).sum()
    }

    /// The part of the scheme server `server` (1-based) needs.
    pub fn slice(&self, server: usize) -> Option<ServerSlice> {
        let l = server.checked_sub(1).filter(|&l| l < self.k)?;
        Some(ServerSlice {
            server,
            a_set: self.a_sets[l].clone(),
            b_set: self.b_sets[l].clone(),
            c_set: self.c_sets[l].clone(),
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Malformed(format!("covering scheme: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scheme serializes")
    }

    /// SHA-256 over a canonical binary encoding of the scheme.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        let put = |h: &mut Sha256, n: usize| h.update((n as u32).to_be_bytes());
        put(&mut h, self.k);
        put(&mut h, self.a);
        put(&mut h, self.b);
        for sets in [&self.a_sets, &self.b_sets] {
            for s in sets.iter() {
                put(&mut h, s.len());
                s.iter().for_each(|&i| put(&mut h, i));
            }
        }
        for c in &self.c_sets {
            put(&mut h, c.len());
            for &(u, v) in c {
                put(&mut h, u);
                put(&mut h, v);
            }
        }
        h.finalize().into()
    }
}

/// Assigns each cell of `[a] x [b]` to the lowest-indexed server whose
/// `A_l x B_l` contains it.
pub fn derive_partition(
    a: usize,
    b: usize,
    a_sets: &[BTreeSet<usize>],
    b_sets: &[BTreeSet<usize>],
) -> Result<Vec<BTreeSet<Cell>>> {
    if a_sets.len() != b_sets.len() {
        return Err(Error::DimensionMismatch {
            expected: a_sets.len(),
            found: b_sets.len(),
        });
    }
    let mut c_sets = vec![BTreeSet::new(); a_sets.len()];
    for u in 1..=a {
        for v in 1..=b {
            let l = (0..a_sets.len())
                .find(|&l| a_sets[l].contains(&u) && b_sets[l].contains(&v))
                .ok_or(Error::Uncovered { u, v })?;
            c_sets[l].insert((u, v));
        }
    }
    Ok(c_sets)
}

/// Limits for the exhaustive searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBounds {
    pub max_side: usize,
    pub max_k: usize,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self { max_side: 4, max_k: 5 }
    }
}

/// Hard cap on `a * b`: cells are tracked in a `u64` mask.
const MAX_CELLS: usize = 64;

struct Candidate {
    a_mask: u32,
    b_mask: u32,
    cells: u64,
}

fn candidates(a: usize, b: usize) -> Vec<Candidate> {
    let mut out = Vec::new();
    // Nonempty proper subsets only.
    for a_mask in 1..(1u32 << a) - 1 {
        for b_mask in 1..(1u32 << b) - 1 {
            let mut cells = 0u64;
            for u in 0..a {
                for v in 0..b {
                    if a_mask >> u & 1 == 1 && b_mask >> v & 1 == 1 {
                        cells |= 1 << (u * b + v);
                    }
                }
            }
            out.push(Candidate { a_mask, b_mask, cells });
        }
    }
    out
}

fn dfs(cands: &[Candidate], covered: u64, full: u64, left: usize, chosen: &mut Vec<usize>) -> bool {
    if covered == full {
        return true;
    }
    if left == 0 {
        return false;
    }
    // Some chosen product must cover the lowest uncovered cell.
    let cell = (!covered & full).trailing_zeros();
    for (i, c) in cands.iter().enumerate() {
        if c.cells >> cell & 1 == 1 {
            chosen.push(i);
            if dfs(cands, covered | c.cells, full, left - 1, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

fn mask_to_set(mask: u32) -> BTreeSet<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).map(|i| i as usize + 1).collect()
}

/// Exhaustively searches for a `k`-covering of `[a] x [b]` by products of
/// nonempty proper subsets, returning it as a validated scheme. Products
/// may repeat, so fewer than `k` distinct products are padded by repeating
/// the last one (the repeats get empty partition cells).
pub fn find_covering(a: usize, b: usize, k: usize) -> Result<Option<CoveringScheme>> {
    if a < 2 || b < 2 || k < 2 {
        return Err(Error::SearchBound(format!("need a, b, k >= 2, got a={a}, b={b}, k={k}")));
    }
    if a * b > MAX_CELLS || a >= 32 || b >= 32 {
        return Err(Error::SearchBound(format!("a*b = {} exceeds {MAX_CELLS}", a * b)));
    }
    let cands = candidates(a, b);
    let full = if a * b == 64 { u64::MAX } else { (1u64 << (a * b)) - 1 };
    let mut chosen = Vec::new();
    if !dfs(&cands, 0, full, k, &mut chosen) {
        return Ok(None);
    }
    let last = *chosen.last().expect("a covering has at least one product");
    chosen.resize(k, last);
    let a_sets = chosen.iter().map(|&i| mask_to_set(cands[i].a_mask)).collect();
    let b_sets = chosen.iter().map(|&i| mask_to_set(cands[i].b_mask)).collect();
    CoveringScheme::from_cover(a, b, a_sets, b_sets).map(Some)
}

/// Smallest `k >= 2` for which `[a] x [b]` has a `k`-covering.
pub fn search_min_k(a: usize, b: usize) -> Result<usize> {
    search_min_k_with(a, b, &SearchBounds::default())
}

pub fn search_min_k_with(a: usize, b: usize, bounds: &SearchBounds) -> Result<usize> {
    if a < 2 || b < 2 || a > bounds.max_side || b > bounds.max_side {
        return Err(Error::SearchBound(format!(
            "a, b must lie in [2, {}], got a={a}, b={b}",
            bounds.max_side
        )));
    }
    for k in 2..=bounds.max_k {
        if find_covering(a, b, k)?.is_some() {
            return Ok(k);
        }
    }
    Err(Error::SearchBound(format!("no covering with k <= {}", bounds.max_k)))
}

/// The least `ab` found for `k` servers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinProduct {
    pub ab: usize,
    pub a: usize,
    pub b: usize,
}

/// Least `ab` over `a, b` in `[2, max_side]` such that a `k`-covering
/// exists; `None` if there is none in the search box.
pub fn search_min_ab(k: usize) -> Result<Option<MinProduct>> {
    search_min_ab_with(k, &SearchBounds::default())
}

pub fn search_min_ab_with(k: usize, bounds: &SearchBounds) -> Result<Option<MinProduct>> {
    if k < 2 || k > bounds.max_k {
        return Err(Error::SearchBound(format!("k must lie in [2, {}], got {k}", bounds.max_k)));
    }
    let mut boxes: Vec<(usize, usize)> = (2..=bounds.max_side)
        .flat_map(|a| (2..=bounds.max_side).map(move |b| (a, b)))
        .collect();
    boxes.sort_by_key(|&(a, b)| (a * b, a));
    for (a, b) in boxes {
        if find_covering(a, b, k)?.is_some() {
            return Ok(Some(MinProduct { ab: a * b, a, b }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn builtins_validate() {
        assert_eq!(pi_s().validate(), Ok(()));
        assert_eq!(pi_w().validate(), Ok(()));
        assert_eq!(pi_s().total_cells(), 9);
        assert_eq!(pi_w().total_cells(), 4);
        assert_eq!(search_min_k(3, 3).unwrap(), pi_s().k);
        for l in 0..4 {
            assert_eq!(pi_w().a_sets[l].len(), 1);
            assert_eq!(pi_w().b_sets[l].len(), 1);
            assert_eq!(pi_w().c_sets[l].len(), 1);
        }
    }

    #[test]
    fn full_a_set_breaks_function_privacy() {
        let mut s = pi_s();
        s.a_sets[0] = set([1, 2, 3]);
        assert_eq!(s.validate(), Err(Violation::FullFunctionSet { server: 1 }));
        assert_eq!(s.violations().len(), 1);
    }

    #[test]
    fn full_b_set_breaks_input_privacy() {
        let mut s = pi_w();
        s.b_sets[2] = set([1, 2]);
        assert_eq!(s.validate(), Err(Violation::FullInputSet { server: 3 }));
    }

    #[test]
    fn overlapping_cells_break_partition() {
        let mut s = pi_s();
        s.c_sets[1].insert((1, 1));
        let v = s.validate().unwrap_err();
        assert_eq!(v, Violation::Overlap { cell: (1, 1), first: 1, second: 2 });
        assert_eq!(v.condition(), Condition::Partition);
        assert_eq!(s.violations().len(), 1);
    }

    #[test]
    fn every_single_mutation_is_caught() {
        // Toggle one index in one set of either builtin: each mutation must
        // violate at least one condition.
        for base in [pi_s(), pi_w()] {
            for l in 0..base.k {
                for i in 1..=base.a.max(base.b) {
                    for which in 0..2 {
                        let mut s = base.clone();
                        let sets = if which == 0 { &mut s.a_sets } else { &mut s.b_sets };
                        if !sets[l].remove(&i) {
                            sets[l].insert(i);
                        }
                        assert!(!s.violations().is_empty(), "server {l} index {i} side {which}");
                    }
                }
                for u in 1..=base.a {
                    for v in 1..=base.b {
                        let mut s = base.clone();
                        if !s.c_sets[l].remove(&(u, v)) {
                            s.c_sets[l].insert((u, v));
                        }
                        let conds: BTreeSet<_> = s.violations().iter().map(Violation::condition).collect();
                        assert_eq!(conds, [Condition::Partition].into(), "C_{} toggle {:?}", l + 1, (u, v));
                    }
                }
            }
        }
    }

    #[test]
    fn structural_problems() {
        let mut s = pi_w();
        s.a_sets[0].clear();
        assert_eq!(s.validate().unwrap_err().condition(), Condition::Structure);
        let mut s = pi_w();
        s.k = 3;
        assert!(matches!(s.validate(), Err(Violation::Parameters { .. })));
        let mut s = pi_w();
        s.b_sets[0] = set([3]);
        assert_eq!(s.validate().unwrap_err().condition(), Condition::Structure);
    }

    #[test]
    fn derive_partition_reproduces_builtins() {
        let s = pi_s();
        assert_eq!(derive_partition(3, 3, &s.a_sets, &s.b_sets).unwrap(), s.c_sets);
        let w = pi_w();
        assert_eq!(derive_partition(2, 2, &w.a_sets, &w.b_sets).unwrap(), w.c_sets);
    }

    #[test]
    fn derive_partition_reports_uncovered_pair() {
        let a_sets = vec![set([1]), set([2])];
        let b_sets = vec![set([1]), set([2])];
        assert_eq!(derive_partition(2, 2, &a_sets, &b_sets), Err(Error::Uncovered { u: 1, v: 2 }));
    }

    #[test]
    fn min_k_matches_known_values() {
        assert_eq!(search_min_k(2, 2).unwrap(), 4);
        assert_eq!(search_min_k(3, 3).unwrap(), 3);
        assert_eq!(search_min_k(4, 2).unwrap(), 4);
        assert!(search_min_k(5, 2).is_err());
        assert!(search_min_k(1, 2).is_err());
    }

    #[test]
    fn min_ab_matches_known_values() {
        assert_eq!(search_min_ab(2).unwrap(), None);
        assert_eq!(search_min_ab(3).unwrap().map(|p| p.ab), Some(9));
        assert_eq!(search_min_ab(4).unwrap().map(|p| p.ab), Some(4));
        assert_eq!(search_min_ab(5).unwrap().map(|p| p.ab), Some(4));
        assert!(search_min_ab(6).is_err());
    }

    #[test]
    fn json_roundtrip_uses_documented_keys() {
        let s = pi_s();
        let json = s.to_json();
        assert!(json.contains("\"A\":[[1,2],[1,3],[2,3]]"), "{json}");
        assert!(json.contains("\"C\":[[[1,1],[1,2],[2,1],[2,2]]"), "{json}");
        assert_eq!(CoveringScheme::from_json(&json).unwrap(), s);
        assert!(CoveringScheme::from_json("{\"k\":2}").is_err());
    }

    #[test]
    fn digest_distinguishes_schemes() {
        assert_eq!(pi_s().digest(), pi_s().digest());
        assert_ne!(pi_s().digest(), pi_w().digest());
    }

    proptest! {
        #[test]
        fn found_coverings_partition_correctly(a in 2usize..5, b in 2usize..5, k in 3usize..6) {
            if let Some(s) = find_covering(a, b, k).unwrap() {
                let c = derive_partition(a, b, &s.a_sets, &s.b_sets).unwrap();
                let mut all = BTreeSet::new();
                for (l, cl) in c.iter().enumerate() {
                    for cell in cl {
                        prop_assert!(s.a_sets[l].contains(&cell.0) && s.b_sets[l].contains(&cell.1));
                        prop_assert!(all.insert(*cell));
                    }
                }
                prop_assert_eq!(all.len(), a * b);
                prop_assert!(s.is_valid());
            } else {
                prop_assert!(k == 3 && (a == 2 || b == 2));
            }
        }
    }
}
