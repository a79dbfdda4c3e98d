//! Finite operation tables, variable maps, minors, composition and bounded
//! clone generation.
//!
//! An [`Operation`] is a total function `E_k^n -> E_k` stored as a value
//! table. The index convention is fixed: the tuple `(x1,...,xn)` maps to
//! the index `sum_i x_i * k^(n-i)`, i.e. the first argument is the most
//! significant base-`k` digit. Every serialized table uses this layout.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single domain element. Domains of size up to 65536 are supported,
/// which covers the materialized power domains used by the gadget
/// constructions (up to 256 elements) with room to spare.
pub type Element = u16;

pub(crate) fn checked_table_len(k: usize, arity: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::invalid("domain size", "must be at least 1"));
    }
    if k > Element::MAX as usize + 1 {
        return Err(Error::invalid(
            "domain size",
            format!("{k} exceeds the supported maximum of 65536"),
        ));
    }
    k.checked_pow(arity as u32)
        .filter(|len| *len <= 1 << 32)
        .ok_or_else(|| Error::invalid("table", format!("k^n overflows for k={k}, n={arity}")))
}

/// Encodes a tuple as a table index, first coordinate most significant.
pub fn encode_tuple(k: usize, tuple: &[Element]) -> usize {
    let mut idx = 0usize;
    for &x in tuple {
        idx = idx * k + x as usize;
    }
    idx
}

/// Decodes a table index into `out`, first coordinate most significant.
pub fn decode_tuple(k: usize, idx: usize, out: &mut [Element]) {
    let mut rest = idx;
    for slot in out.iter_mut().rev() {
        *slot = (rest % k) as Element;
        rest /= k;
    }
}

/// Iterates over all tuples of length `n` over `E_k` in lexicographic order.
pub fn tuples(k: usize, n: usize) -> impl Iterator<Item = Vec<Element>> {
    let len = k.checked_pow(n as u32).expect("tuple space overflow");
    (0..len).map(move |idx| {
        let mut t = vec![0; n];
        decode_tuple(k, idx, &mut t);
        t
    })
}

#[derive(Serialize, Deserialize)]
struct RawOperation {
    domain: usize,
    arity: usize,
    table: Vec<Element>,
}

/// A finitary operation on `E_k`, stored as a full value table.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawOperation", into = "RawOperation")]
pub struct Operation {
    domain_size: usize,
    arity: usize,
    table: Vec<Element>,
}

impl std::fmt::Debug for Operation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Operation(k={}, n={}, table={:?})",
            self.domain_size, self.arity, self.table
        )
    }
}

impl TryFrom<RawOperation> for Operation {
    type Error = Error;
    fn try_from(raw: RawOperation) -> Result<Self> {
        Operation::new(raw.domain, raw.arity, raw.table)
    }
}

impl From<Operation> for RawOperation {
    fn from(op: Operation) -> Self {
        RawOperation {
            domain: op.domain_size,
            arity: op.arity,
            table: op.table,
        }
    }
}

impl Operation {
    /// Builds an operation from an explicit table, validating the invariants.
    pub fn new(domain_size: usize, arity: usize, table: Vec<Element>) -> Result<Self> {
        if arity == 0 {
            return Err(Error::invalid("arity", "nullary operations are not represented"));
        }
        let expect = checked_table_len(domain_size, arity)?;
        if table.len() != expect {
            return Err(Error::invalid(
                "table",
                format!("length {} does not match k^n = {}", table.len(), expect),
            ));
        }
        if let Some(&bad) = table.iter().find(|&&v| v as usize >= domain_size) {
            return Err(Error::ValueOutOfRange {
                value: bad as usize,
                domain: domain_size,
            });
        }
        Ok(Operation {
            domain_size,
            arity,
            table,
        })
    }

    /// Builds an operation by evaluating `f` on every input tuple.
    pub fn from_fn(
        domain_size: usize,
        arity: usize,
        mut f: impl FnMut(&[Element]) -> Element,
    ) -> Result<Self> {
        let len = checked_table_len(domain_size, arity)?;
        if arity == 0 {
            return Err(Error::invalid("arity", "nullary operations are not represented"));
        }
        let mut table = Vec::with_capacity(len);
        let mut buf = vec![0 as Element; arity];
        for idx in 0..len {
            decode_tuple(domain_size, idx, &mut buf);
            table.push(f(&buf));
        }
        Operation::new(domain_size, arity, table)
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn table(&self) -> &[Element] {
        &self.table
    }

    /// Table lookup without argument validation. Callers must guarantee the
    /// invariants; used on hot paths.
    #[inline]
    pub(crate) fn eval(&self, args: &[Element]) -> Element {
        debug_assert_eq!(args.len(), self.arity);
        self.table[encode_tuple(self.domain_size, args)]
    }

    /// Applies the operation to an argument tuple.
    pub fn apply(&self, args: &[Element]) -> Result<Element> {
        if args.len() != self.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                found: args.len(),
            });
        }
        if let Some(&bad) = args.iter().find(|&&v| v as usize >= self.domain_size) {
            return Err(Error::ValueOutOfRange {
                value: bad as usize,
                domain: self.domain_size,
            });
        }
        Ok(self.eval(args))
    }

    /// True iff `f(x,...,x) = x` for every element `x`.
    pub fn is_idempotent(&self) -> bool {
        (0..self.domain_size).all(|x| {
            let args = vec![x as Element; self.arity];
            self.eval(&args) == x as Element
        })
    }

    /// The minor of this operation under a variable map: the result `g`
    /// satisfies `g(x_0,...,x_{r-1}) = f(x_{map(0)},...,x_{map(n-1)})`.
    pub fn minor(&self, map: &VarMap) -> Result<Operation> {
        if map.source_arity() != self.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                found: map.source_arity(),
            });
        }
        let k = self.domain_size;
        let r = map.target_arity();
        let len = checked_table_len(k, r)?;
        let mut table = Vec::with_capacity(len);
        let mut target = vec![0 as Element; r];
        let mut args = vec![0 as Element; self.arity];
        for idx in 0..len {
            decode_tuple(k, idx, &mut target);
            for (slot, &src) in args.iter_mut().zip(map.entries()) {
                *slot = target[src];
            }
            table.push(self.eval(&args));
        }
        Operation::new(k, r, table)
    }

    /// Composition `h(x) = f(g_1(x),...,g_n(x))` where all `g_i` share an
    /// arity and the domain of `f`.
    pub fn compose(&self, args: &[Operation]) -> Result<Operation> {
        if args.len() != self.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                found: args.len(),
            });
        }
        let m = args[0].arity;
        for g in args {
            if g.domain_size != self.domain_size {
                return Err(Error::DomainMismatch {
                    expected: self.domain_size,
                    found: g.domain_size,
                });
            }
            if g.arity != m {
                return Err(Error::ArityMismatch {
                    expected: m,
                    found: g.arity,
                });
            }
        }
        let len = args[0].table.len();
        let mut table = Vec::with_capacity(len);
        let mut vals = vec![0 as Element; self.arity];
        for idx in 0..len {
            for (slot, g) in vals.iter_mut().zip(args) {
                *slot = g.table[idx];
            }
            table.push(self.eval(&vals));
        }
        Operation::new(self.domain_size, m, table)
    }

    /// The minor obtained by a cyclic left shift of the variables:
    /// `g(x_1,...,x_n) = f(x_2,...,x_n,x_1)`.
    pub fn cyclic_shift(&self) -> Operation {
        let n = self.arity;
        let map = VarMap::new(n, (0..n).map(|j| (j + 1) % n).collect()).expect("rotation map");
        self.minor(&map).expect("arity preserved")
    }
}

/// Returns the projection `pr^n_i` (1-based coordinate `i`).
pub fn make_projection(domain_size: usize, arity: usize, coordinate: usize) -> Result<Operation> {
    if coordinate == 0 || coordinate > arity {
        return Err(Error::CoordinateOutOfRange {
            index: coordinate,
            arity,
        });
    }
    Operation::from_fn(domain_size, arity, |t| t[coordinate - 1])
}

#[derive(Serialize, Deserialize)]
struct RawVarMap {
    from: usize,
    to: usize,
    map: Vec<usize>,
}

/// A total map `E_n -> E_r` used to form minors. Entries are 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawVarMap", into = "RawVarMap")]
pub struct VarMap {
    target_arity: usize,
    map: Vec<usize>,
}

impl TryFrom<RawVarMap> for VarMap {
    type Error = Error;
    fn try_from(raw: RawVarMap) -> Result<Self> {
        if raw.map.len() != raw.from {
            return Err(Error::invalid(
                "variable map",
                format!("length {} does not match source arity {}", raw.map.len(), raw.from),
            ));
        }
        VarMap::new(raw.to, raw.map)
    }
}

impl From<VarMap> for RawVarMap {
    fn from(vm: VarMap) -> Self {
        RawVarMap {
            from: vm.map.len(),
            to: vm.target_arity,
            map: vm.map,
        }
    }
}

impl VarMap {
    pub fn new(target_arity: usize, map: Vec<usize>) -> Result<Self> {
        if target_arity == 0 {
            return Err(Error::invalid("variable map", "target arity must be at least 1"));
        }
        if let Some(&bad) = map.iter().find(|&&v| v >= target_arity) {
            return Err(Error::invalid(
                "variable map",
                format!("entry {bad} out of range for target arity {target_arity}"),
            ));
        }
        Ok(VarMap { target_arity, map })
    }

    pub fn identity(arity: usize) -> Self {
        VarMap {
            target_arity: arity,
            map: (0..arity).collect(),
        }
    }

    pub fn source_arity(&self) -> usize {
        self.map.len()
    }

    pub fn target_arity(&self) -> usize {
        self.target_arity
    }

    pub fn entries(&self) -> &[usize] {
        &self.map
    }

    /// Composition `then o self`: first apply this map, then `then`.
    pub fn then(&self, then: &VarMap) -> Result<VarMap> {
        if then.source_arity() != self.target_arity {
            return Err(Error::ArityMismatch {
                expected: self.target_arity,
                found: then.source_arity(),
            });
        }
        VarMap::new(
            then.target_arity,
            self.map.iter().map(|&i| then.map[i]).collect(),
        )
    }
}

/// Symmetry classes for candidate enumeration. A candidate assigns one value
/// per orbit of the corresponding group action on input tuples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    /// Every table, no symmetry restriction.
    None,
    /// Tables invariant under a cyclic shift of the arguments.
    Cyclic,
    /// Tables invariant under every permutation of the arguments.
    FullySymmetric,
}

/// The space of operation tables of a given symmetry class, addressable by a
/// dense assignment index. Shared read-only by parallel scans.
pub struct CandidateSpace {
    k: usize,
    arity: usize,
    orbits: Vec<Vec<u32>>,
}

impl CandidateSpace {
    pub fn new(k: usize, arity: usize, symmetry: Symmetry) -> Result<Self> {
        let len = checked_table_len(k, arity)?;
        if arity == 0 {
            return Err(Error::invalid("arity", "nullary operations are not represented"));
        }
        let mut orbit_of = vec![u32::MAX; len];
        let mut orbits: Vec<Vec<u32>> = Vec::new();
        let mut tuple = vec![0 as Element; arity];
        for idx in 0..len {
            if orbit_of[idx] != u32::MAX {
                continue;
            }
            decode_tuple(k, idx, &mut tuple);
            let mut members = Vec::new();
            match symmetry {
                Symmetry::None => members.push(idx as u32),
                Symmetry::Cyclic => {
                    let mut t = tuple.clone();
                    loop {
                        let j = encode_tuple(k, &t);
                        if members.contains(&(j as u32)) {
                            break;
                        }
                        members.push(j as u32);
                        t.rotate_left(1);
                    }
                }
                Symmetry::FullySymmetric => {
                    // Orbit = all tuples with the same value multiset.
                    let mut sorted = tuple.clone();
                    sorted.sort_unstable();
                    for (j, member) in orbit_members_with_multiset(k, arity, &sorted) {
                        let _ = member;
                        members.push(j as u32);
                    }
                }
            }
            members.sort_unstable();
            let id = orbits.len() as u32;
            for &j in &members {
                orbit_of[j as usize] = id;
            }
            orbits.push(members);
        }
        Ok(CandidateSpace { k, arity, orbits })
    }

    pub fn orbit_count(&self) -> usize {
        self.orbits.len()
    }

    /// Number of assignments, `k^orbit_count`.
    pub fn assignment_count(&self) -> u128 {
        let mut n = 1u128;
        for _ in 0..self.orbits.len() {
            n = n.saturating_mul(self.k as u128);
        }
        n
    }

    /// The `idx`-th candidate: assignment digits are read most significant
    /// first over the orbits in order of their least table index.
    pub fn operation(&self, idx: u128) -> Operation {
        let len: usize = self.orbits.iter().map(|o| o.len()).sum();
        let mut table = vec![0 as Element; len];
        let mut rest = idx;
        for orbit in self.orbits.iter().rev() {
            let v = (rest % self.k as u128) as Element;
            rest /= self.k as u128;
            for &j in orbit {
                table[j as usize] = v;
            }
        }
        Operation::new(self.k, self.arity, table).expect("candidate table is valid")
    }
}

fn orbit_members_with_multiset(
    k: usize,
    arity: usize,
    sorted: &[Element],
) -> Vec<(usize, Vec<Element>)> {
    let len = k.pow(arity as u32);
    let mut out = Vec::new();
    let mut t = vec![0 as Element; arity];
    for idx in 0..len {
        decode_tuple(k, idx, &mut t);
        let mut s = t.clone();
        s.sort_unstable();
        if s == sorted {
            out.push((idx, t.clone()));
        }
    }
    out
}

/// Enumerates the operations of a symmetry class, failing when the candidate
/// count exceeds `cap`.
pub fn enumerate_operations(
    k: usize,
    arity: usize,
    symmetry: Symmetry,
    cap: u128,
) -> Result<impl Iterator<Item = Operation>> {
    let space = CandidateSpace::new(k, arity, symmetry)?;
    let count = space.assignment_count();
    if count > cap {
        return Err(Error::CapExceeded { needed: count, cap });
    }
    Ok((0..count).map(move |i| space.operation(i)))
}

/// Enumerates and filters in one pass; the order is by assignment index.
pub fn enumerate_operations_where(
    k: usize,
    arity: usize,
    symmetry: Symmetry,
    cap: u128,
    predicate: impl Fn(&Operation) -> bool + Sync,
) -> Result<Vec<Operation>> {
    let space = CandidateSpace::new(k, arity, symmetry)?;
    let count = space.assignment_count();
    if count > cap {
        return Err(Error::CapExceeded { needed: count, cap });
    }
    let count = count as u64;
    Ok((0..count)
        .into_par_iter()
        .filter_map(|i| {
            let op = space.operation(i as u128);
            predicate(&op).then_some(op)
        })
        .collect())
}

/// Result of a bounded clone generation run.
#[derive(Clone, Debug)]
pub struct GeneratedClone {
    /// All generated operations of arity at most the requested bound,
    /// sorted by (arity, table).
    pub operations: Vec<Operation>,
    /// True iff the closure reached a fixed point within budget.
    pub complete: bool,
    /// First operation satisfying the search predicate, if one was given.
    pub witness: Option<Operation>,
    /// Number of distinct tables produced.
    pub produced: usize,
}

/// Breadth-first closure of `generators` together with all projections of
/// arity at most `max_arity` under composition, deduplicated by table.
///
/// Every member of the generated clone of arity `m <= max_arity` is a
/// generator applied to previously generated `m`-ary operations (or a
/// projection), so closing under generator-headed composition per arity
/// reaches the same fixed point as closing under arbitrary composition.
pub fn generate_clone(
    generators: &[Operation],
    max_arity: usize,
    budget: usize,
) -> Result<GeneratedClone> {
    generate_clone_search(generators, max_arity, budget, |_| false)
}

/// Like [`generate_clone`] but stops early when `predicate` accepts a clone
/// member; the witness is the first match in deterministic frontier order.
pub fn generate_clone_search(
    generators: &[Operation],
    max_arity: usize,
    budget: usize,
    predicate: impl Fn(&Operation) -> bool + Sync,
) -> Result<GeneratedClone> {
    if max_arity == 0 {
        return Err(Error::invalid("max arity", "must be at least 1"));
    }
    let k = match generators.first() {
        Some(g) => g.domain_size(),
        None => 0,
    };
    for g in generators {
        if g.domain_size() != k {
            return Err(Error::DomainMismatch {
                expected: k,
                found: g.domain_size(),
            });
        }
    }
    // With no generators the closure is the projection clone; a domain size
    // is still needed, so default to 2 (callers with an empty generator set
    // should use `projection_clone` directly for other domains).
    let k = if k == 0 { 2 } else { k };

    struct ArityState {
        tables: Vec<Vec<Element>>,
        index: HashMap<Vec<Element>, usize>,
        /// start of the current frontier: entries added at the last depth
        frontier_lo: usize,
    }

    impl ArityState {
        fn push(&mut self, t: Vec<Element>) -> bool {
            if self.index.contains_key(&t) {
                return false;
            }
            self.index.insert(t.clone(), self.tables.len());
            self.tables.push(t);
            true
        }
    }

    let mut states: Vec<ArityState> = Vec::with_capacity(max_arity);
    let mut witness = None;
    let mut produced = 0usize;
    let mut complete = true;
    // Work bound: compositions are capped as a multiple of the table budget
    // so that a closure whose frontier keeps churning out duplicates still
    // terminates. The floor covers the fixed-point confirmation rounds of
    // small clones, which cost |S|^(a+1) compositions. Hitting the bound
    // reports an incomplete closure.
    let work_cap = budget.saturating_mul(64).max(1 << 27);
    let mut work = 0usize;

    // depth 0: projections of every arity
    for m in 1..=max_arity {
        let mut state = ArityState {
            tables: Vec::new(),
            index: HashMap::new(),
            frontier_lo: 0,
        };
        for i in 1..=m {
            let pr = make_projection(k, m, i)?;
            if state.push(pr.table().to_vec()) {
                produced += 1;
                if produced > budget {
                    complete = false;
                }
                if witness.is_none() && predicate(&pr) {
                    witness = Some(pr);
                    complete = false;
                }
            }
        }
        states.push(state);
    }

    // The candidate tuples of one (head, frontier-position) stripe are
    // evaluated in fixed-size batches, each batch in parallel, and merged
    // in batch order, so results and witnesses are deterministic.
    const BATCH: usize = 8192;

    // one depth per round, all arities advanced together
    'depth: while complete && witness.is_none() {
        let snapshots: Vec<usize> = states.iter().map(|s| s.tables.len()).collect();
        let mut any_new = false;
        for (mi, state) in states.iter_mut().enumerate() {
            let m = mi + 1;
            let hi = snapshots[mi];
            let lo = state.frontier_lo;
            state.frontier_lo = hi;
            for g in generators {
                let a = g.arity();
                // Argument tuples over [0, hi) with at least one index in
                // the frontier [lo, hi): position p carries the frontier
                // index, earlier positions range below the frontier, later
                // positions over everything seen so far.
                for p in 0..a {
                    let limits: Vec<(usize, usize)> = (0..a)
                        .map(|q| {
                            if q < p {
                                (0, lo)
                            } else if q == p {
                                (lo, hi)
                            } else {
                                (0, hi)
                            }
                        })
                        .collect();
                    if limits.iter().any(|&(l, h)| l >= h) {
                        continue;
                    }
                    let mut idxs: Vec<usize> = limits.iter().map(|&(l, _)| l).collect();
                    let mut exhausted = false;
                    while !exhausted {
                        let mut batch: Vec<Vec<usize>> = Vec::with_capacity(BATCH);
                        while batch.len() < BATCH {
                            work += 1;
                            if work > work_cap {
                                complete = false;
                                break;
                            }
                            batch.push(idxs.clone());
                            let mut q = a;
                            loop {
                                if q == 0 {
                                    exhausted = true;
                                    break;
                                }
                                q -= 1;
                                idxs[q] += 1;
                                if idxs[q] < limits[q].1 {
                                    break;
                                }
                                idxs[q] = limits[q].0;
                            }
                            if exhausted || !complete {
                                break;
                            }
                        }
                        let tables = &state.tables;
                        let len = tables[0].len();
                        let results: Vec<Vec<Element>> = batch
                            .par_iter()
                            .map(|choice| {
                                let mut out = Vec::with_capacity(len);
                                let mut vals = vec![0 as Element; a];
                                for cell in 0..len {
                                    for (v, &i) in vals.iter_mut().zip(choice) {
                                        *v = tables[i][cell];
                                    }
                                    out.push(g.eval(&vals));
                                }
                                out
                            })
                            .collect();
                        for t in results {
                            if state.push(t.clone()) {
                                any_new = true;
                                produced += 1;
                                if produced > budget {
                                    complete = false;
                                    break;
                                }
                                let op = Operation::new(k, m, t)?;
                                if predicate(&op) {
                                    witness = Some(op);
                                    complete = false;
                                    break;
                                }
                            }
                        }
                        if !complete || witness.is_some() {
                            break 'depth;
                        }
                    }
                }
            }
        }
        if !any_new {
            break;
        }
    }

    let mut all: Vec<Operation> = Vec::new();
    for (mi, state) in states.iter().enumerate() {
        for t in &state.tables {
            all.push(Operation::new(k, mi + 1, t.clone())?);
        }
    }
    all.sort();
    all.dedup();
    Ok(GeneratedClone {
        operations: all,
        complete,
        witness,
        produced,
    })
}

/// The projection clone over `E_k` restricted to arities `1..=max_arity`.
pub fn projection_clone(k: usize, max_arity: usize) -> Result<Vec<Operation>> {
    let mut out = Vec::new();
    for n in 1..=max_arity {
        for i in 1..=n {
            out.push(make_projection(k, n, i)?);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor2() -> Operation {
        Operation::from_fn(2, 2, |t| t[0] ^ t[1]).unwrap()
    }

    fn xor3() -> Operation {
        Operation::from_fn(2, 3, |t| t[0] ^ t[1] ^ t[2]).unwrap()
    }

    fn and2() -> Operation {
        Operation::from_fn(2, 2, |t| t[0] & t[1]).unwrap()
    }

    fn bool_majority() -> Operation {
        Operation::from_fn(2, 3, |t| {
            if t[0] == t[1] || t[0] == t[2] {
                t[0]
            } else {
                t[1]
            }
        })
        .unwrap()
    }

    #[test]
    fn projection_identity_case() {
        let p = make_projection(2, 1, 1).unwrap();
        assert_eq!(p.table(), &[0, 1]);
    }

    #[test]
    fn projection_second_of_two() {
        let p = make_projection(2, 2, 2).unwrap();
        assert_eq!(p.table(), &[0, 1, 0, 1]);
    }

    #[test]
    fn projection_first_of_three_over_e3() {
        let p = make_projection(3, 3, 1).unwrap();
        for t in tuples(3, 3) {
            assert_eq!(p.apply(&t).unwrap(), t[0]);
        }
    }

    #[test]
    fn projection_coordinate_out_of_range() {
        assert!(matches!(
            make_projection(2, 2, 3),
            Err(Error::CoordinateOutOfRange { .. })
        ));
        assert!(matches!(
            make_projection(2, 2, 0),
            Err(Error::CoordinateOutOfRange { .. })
        ));
    }

    #[test]
    fn apply_projection_and_xor() {
        let p = make_projection(2, 2, 1).unwrap();
        assert_eq!(p.apply(&[1, 0]).unwrap(), 1);
        assert_eq!(xor2().apply(&[1, 1]).unwrap(), 0);
    }

    #[test]
    fn apply_rejects_bad_args() {
        let p = make_projection(2, 2, 1).unwrap();
        assert!(matches!(p.apply(&[0]), Err(Error::ArityMismatch { .. })));
        assert!(matches!(
            p.apply(&[0, 2]),
            Err(Error::ValueOutOfRange { .. })
        ));
    }

    #[test]
    fn minor_of_projection_is_projection() {
        // minor(pr^n_i, sigma) = pr^r_{sigma(i-1)+1}
        for n in 1..=3usize {
            for i in 1..=n {
                for r in 1..=3usize {
                    for map in tuples(r, n) {
                        let map: Vec<usize> = map.iter().map(|&x| x as usize).collect();
                        let vm = VarMap::new(r, map.clone()).unwrap();
                        let got = make_projection(2, n, i).unwrap().minor(&vm).unwrap();
                        let want = make_projection(2, r, map[i - 1] + 1).unwrap();
                        assert_eq!(got, want);
                    }
                }
            }
        }
    }

    #[test]
    fn minor_xor_identification_is_constant_zero() {
        let vm = VarMap::new(1, vec![0, 0]).unwrap();
        let g = xor2().minor(&vm).unwrap();
        assert_eq!(g.table(), &[0, 0]);
    }

    #[test]
    fn minor_majority_identifying_first_two() {
        // brute force over all 4 inputs of the identified operation
        let vm = VarMap::new(2, vec![0, 0, 1]).unwrap();
        let got = bool_majority().minor(&vm).unwrap();
        let maj = bool_majority();
        for t in tuples(2, 2) {
            let direct = maj.apply(&[t[0], t[0], t[1]]).unwrap();
            assert_eq!(got.apply(&t).unwrap(), direct);
        }
        assert_eq!(got, make_projection(2, 2, 1).unwrap());
    }

    #[test]
    fn compose_with_projections_is_identity() {
        let f = bool_majority();
        let prs: Vec<Operation> = (1..=3).map(|i| make_projection(2, 3, i).unwrap()).collect();
        assert_eq!(f.compose(&prs).unwrap(), f);
    }

    #[test]
    fn compose_projection_absorbs() {
        let pr1 = make_projection(2, 2, 1).unwrap();
        let g1 = xor2();
        let g2 = and2();
        assert_eq!(pr1.compose(&[g1.clone(), g2]).unwrap(), g1);
    }

    #[test]
    fn compose_and_with_xor_and_projection() {
        let h = and2().compose(&[xor2(), make_projection(2, 2, 1).unwrap()]).unwrap();
        assert_eq!(h.apply(&[1, 1]).unwrap(), 0);
    }

    #[test]
    fn compose_arity_mismatch() {
        let f = and2();
        assert!(matches!(
            f.compose(&[xor2()]),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn idempotency_checks() {
        assert!(and2().is_idempotent());
        assert!(!xor2().is_idempotent());
        let const0 = Operation::from_fn(3, 2, |_| 0).unwrap();
        assert!(!const0.is_idempotent());
    }

    #[test]
    fn clone_of_empty_generators_is_projections() {
        let out = generate_clone(&[], 2, 1000).unwrap();
        assert!(out.complete);
        assert_eq!(out.operations, projection_clone(2, 2).unwrap());
        assert_eq!(out.operations.len(), 3);
    }

    #[test]
    fn clone_of_xor3_matches_odd_subset_oracle() {
        // oracle: the clone members of arity <= 3 are exactly the XORs of an
        // odd-size subset of the variables.
        let out = generate_clone(&[xor3()], 3, 10_000).unwrap();
        assert!(out.complete);
        let mut oracle = Vec::new();
        for n in 1..=3usize {
            for mask in 1u32..(1 << n) {
                if mask.count_ones() % 2 == 1 {
                    let op = Operation::from_fn(2, n, |t| {
                        let mut acc = 0;
                        for (j, &x) in t.iter().enumerate() {
                            if mask & (1 << j) != 0 {
                                acc ^= x;
                            }
                        }
                        acc
                    })
                    .unwrap();
                    oracle.push(op);
                }
            }
        }
        oracle.sort();
        assert_eq!(out.operations, oracle);
        let ternary = out.operations.iter().filter(|o| o.arity() == 3).count();
        assert_eq!(ternary, 4);
    }

    #[test]
    fn clone_of_majority_at_arity_two_is_projections() {
        let out = generate_clone(&[bool_majority()], 2, 10_000).unwrap();
        assert!(out.complete);
        assert_eq!(out.operations, projection_clone(2, 2).unwrap());
    }

    #[test]
    fn clone_generation_is_monotone_and_idempotent() {
        let small = generate_clone(&[xor3()], 3, 100_000).unwrap();
        let big = generate_clone(&[xor3(), bool_majority()], 3, 100_000).unwrap();
        assert!(small.complete && big.complete);
        for op in &small.operations {
            assert!(big.operations.binary_search(op).is_ok());
        }
        let again = generate_clone(&small.operations, 3, 100_000).unwrap();
        assert!(again.complete);
        assert_eq!(again.operations, small.operations);
    }

    #[test]
    fn clone_generation_budget_flag() {
        let out = generate_clone(&[xor3(), bool_majority()], 3, 4).unwrap();
        assert!(!out.complete);
    }

    #[test]
    fn enumerate_cyclic_idempotent_binary_booleans() {
        let ops = enumerate_operations_where(2, 2, Symmetry::Cyclic, 1 << 20, |op| {
            op.is_idempotent()
        })
        .unwrap();
        assert_eq!(ops.len(), 2);
        let and = and2();
        let or = Operation::from_fn(2, 2, |t| t[0] | t[1]).unwrap();
        assert!(ops.contains(&and) && ops.contains(&or));
    }

    #[test]
    fn enumerate_unary_booleans() {
        let all: Vec<_> = enumerate_operations(2, 1, Symmetry::None, 1 << 20)
            .unwrap()
            .collect();
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn cyclic_orbit_count_over_e3() {
        let space = CandidateSpace::new(3, 2, Symmetry::Cyclic).unwrap();
        // 3 constant pairs are fixed, the remaining 6 split into 3 orbits
        assert_eq!(space.orbit_count(), 6);
        assert_eq!(space.assignment_count(), 729);
        let space3 = CandidateSpace::new(3, 3, Symmetry::Cyclic).unwrap();
        assert_eq!(space3.orbit_count(), 11);
        assert_eq!(space3.assignment_count(), 177_147);
    }

    #[test]
    fn minor_composition_law_small() {
        let f = bool_majority();
        for s in tuples(2, 3) {
            let sigma = VarMap::new(2, s.iter().map(|&x| x as usize).collect()).unwrap();
            for t in tuples(3, 2) {
                let tau = VarMap::new(3, t.iter().map(|&x| x as usize).collect()).unwrap();
                let lhs = f.minor(&sigma).unwrap().minor(&tau).unwrap();
                let rhs = f.minor(&sigma.then(&tau).unwrap()).unwrap();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn minor_identity_map_is_identity() {
        let f = bool_majority();
        assert_eq!(f.minor(&VarMap::identity(3)).unwrap(), f);
    }

    #[test]
    fn operation_json_schema() {
        let p = make_projection(2, 2, 2).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"domain":2,"arity":2,"table":[0,1,0,1]}"#);
        let back: Operation = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Operation>(r#"{"domain":2,"arity":1,"table":[0,2]}"#).is_err());
    }

    #[test]
    fn varmap_json_schema() {
        let vm = VarMap::new(2, vec![0, 0, 1]).unwrap();
        let s = serde_json::to_string(&vm).unwrap();
        assert_eq!(s, r#"{"from":3,"to":2,"map":[0,0,1]}"#);
        let back: VarMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vm);
    }
}
