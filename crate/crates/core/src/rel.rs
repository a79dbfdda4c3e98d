//! Relations, structures, the Pol/Inv machinery, essential and critical
//! relations, blocks, and decomposability tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ops::{
    checked_table_len, decode_tuple, CandidateSpace, Element, Operation, Symmetry,
};

/// A finite relation: a set of `arity`-tuples over `E_k`. Tuples are kept in
/// lexicographic order, which is also the canonical serialization order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawRelation", into = "RawRelation")]
pub struct Relation {
    domain_size: usize,
    arity: usize,
    tuples: BTreeSet<Vec<Element>>,
}

#[derive(Serialize, Deserialize)]
struct RawRelation {
    domain: usize,
    arity: usize,
    tuples: Vec<Vec<Element>>,
}

impl TryFrom<RawRelation> for Relation {
    type Error = Error;
    fn try_from(raw: RawRelation) -> Result<Self> {
        Relation::new(raw.domain, raw.arity, raw.tuples)
    }
}

impl From<Relation> for RawRelation {
    fn from(r: Relation) -> Self {
        RawRelation {
            domain: r.domain_size,
            arity: r.arity,
            tuples: r.tuples.into_iter().collect(),
        }
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Relation(k={}, m={}, {:?})",
            self.domain_size,
            self.arity,
            self.tuples.iter().collect::<Vec<_>>()
        )
    }
}

impl Relation {
    pub fn new(
        domain_size: usize,
        arity: usize,
        tuples: impl IntoIterator<Item = Vec<Element>>,
    ) -> Result<Self> {
        if arity == 0 {
            return Err(Error::invalid("relation", "arity must be at least 1"));
        }
        if domain_size == 0 {
            return Err(Error::invalid("relation", "domain size must be at least 1"));
        }
        let mut set = BTreeSet::new();
        for t in tuples {
            if t.len() != arity {
                return Err(Error::ArityMismatch {
                    expected: arity,
                    found: t.len(),
                });
            }
            if let Some(&bad) = t.iter().find(|&&v| v as usize >= domain_size) {
                return Err(Error::ValueOutOfRange {
                    value: bad as usize,
                    domain: domain_size,
                });
            }
            set.insert(t);
        }
        Ok(Relation {
            domain_size,
            arity,
            tuples: set,
        })
    }

    /// The full relation `E_k^m`.
    pub fn full(domain_size: usize, arity: usize) -> Result<Self> {
        let len = checked_table_len(domain_size, arity)?;
        let mut set = BTreeSet::new();
        let mut t = vec![0 as Element; arity];
        for idx in 0..len {
            decode_tuple(domain_size, idx, &mut t);
            set.insert(t.clone());
        }
        Ok(Relation {
            domain_size,
            arity,
            tuples: set,
        })
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, tuple: &[Element]) -> bool {
        self.tuples.contains(tuple)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<Element>> {
        self.tuples.iter()
    }

    pub fn tuples(&self) -> &BTreeSet<Vec<Element>> {
        &self.tuples
    }

    /// Projection of the relation onto the given coordinates (0-based).
    pub fn project(&self, coords: &[usize]) -> Result<Relation> {
        if coords.is_empty() {
            return Err(Error::invalid("projection", "needs at least one coordinate"));
        }
        if let Some(&bad) = coords.iter().find(|&&c| c >= self.arity) {
            return Err(Error::invalid(
                "projection",
                format!("coordinate {bad} out of range for arity {}", self.arity),
            ));
        }
        Relation::new(
            self.domain_size,
            coords.len(),
            self.tuples
                .iter()
                .map(|t| coords.iter().map(|&c| t[c]).collect::<Vec<_>>()),
        )
    }
}

/// True iff `f` preserves `R`: the coordinatewise image of every choice of
/// `arity(f)` tuples from `R` is again in `R`.
pub fn preserves(f: &Operation, r: &Relation) -> Result<bool> {
    if f.domain_size() != r.domain_size() {
        return Err(Error::DomainMismatch {
            expected: r.domain_size(),
            found: f.domain_size(),
        });
    }
    let rows: Vec<&Vec<Element>> = r.iter().collect();
    let n = f.arity();
    let m = r.arity();
    if rows.is_empty() {
        return Ok(true);
    }
    let mut choice = vec![0usize; n];
    let mut out = vec![0 as Element; m];
    let mut col = vec![0 as Element; n];
    loop {
        for j in 0..m {
            for (c, &i) in col.iter_mut().zip(&choice) {
                *c = rows[i][j];
            }
            out[j] = f.eval(&col);
        }
        if !r.contains(&out) {
            return Ok(false);
        }
        let mut q = n;
        loop {
            if q == 0 {
                return Ok(true);
            }
            q -= 1;
            choice[q] += 1;
            if choice[q] < rows.len() {
                break;
            }
            choice[q] = 0;
        }
    }
}

fn check_same_domain(relations: &[Relation], k: usize) -> Result<()> {
    for r in relations {
        if r.domain_size() != k {
            return Err(Error::DomainMismatch {
                expected: k,
                found: r.domain_size(),
            });
        }
    }
    Ok(())
}

/// The `arity`-ary polymorphisms of a relation set, by exhaustive scan of a
/// symmetry-restricted candidate space. Candidates are scanned in assignment
/// order, in parallel, and the result order is deterministic.
pub fn pol_symmetric(
    domain_size: usize,
    relations: &[Relation],
    arity: usize,
    symmetry: Symmetry,
    cap: u128,
) -> Result<Vec<Operation>> {
    check_same_domain(relations, domain_size)?;
    let space = CandidateSpace::new(domain_size, arity, symmetry)?;
    let count = space.assignment_count();
    if count > cap {
        return Err(Error::CapExceeded { needed: count, cap });
    }
    let count = count as u64;
    Ok((0..count)
        .into_par_iter()
        .filter_map(|i| {
            let op = space.operation(i as u128);
            let keep = relations
                .iter()
                .all(|r| preserves(&op, r).expect("domains checked"));
            keep.then_some(op)
        })
        .collect())
}

/// The `arity`-ary polymorphisms of a relation set (unrestricted scan).
pub fn pol(
    domain_size: usize,
    relations: &[Relation],
    arity: usize,
    cap: u128,
) -> Result<Vec<Operation>> {
    pol_symmetric(domain_size, relations, arity, Symmetry::None, cap)
}

/// The smallest relation containing `seed` that is closed under the
/// coordinatewise application of every generator: the least invariant
/// relation of the generated clone containing the seed.
pub fn inv_closure(generators: &[Operation], seed: &Relation) -> Result<Relation> {
    let k = seed.domain_size();
    for g in generators {
        if g.domain_size() != k {
            return Err(Error::DomainMismatch {
                expected: k,
                found: g.domain_size(),
            });
        }
    }
    let m = seed.arity();
    let mut rows: Vec<Vec<Element>> = seed.iter().cloned().collect();
    let mut seen: BTreeSet<Vec<Element>> = rows.iter().cloned().collect();
    if rows.is_empty() {
        return Ok(seed.clone());
    }
    let mut frontier_start = 0usize;
    loop {
        let round_start = rows.len();
        let mut new_rows = Vec::new();
        for g in generators {
            let a = g.arity();
            for p in 0..a {
                let limits: Vec<(usize, usize)> = (0..a)
                    .map(|q| {
                        if q < p {
                            (0, frontier_start)
                        } else if q == p {
                            (frontier_start, round_start)
                        } else {
                            (0, round_start)
                        }
                    })
                    .collect();
                if limits.iter().any(|&(lo, hi)| lo >= hi) {
                    continue;
                }
                let mut idxs: Vec<usize> = limits.iter().map(|&(lo, _)| lo).collect();
                let mut col = vec![0 as Element; a];
                'tuples: loop {
                    let mut out = vec![0 as Element; m];
                    for j in 0..m {
                        for (c, &i) in col.iter_mut().zip(&idxs) {
                            *c = rows[i][j];
                        }
                        out[j] = g.eval(&col);
                    }
                    if !seen.contains(&out) {
                        new_rows.push(out);
                    }
                    let mut q = a;
                    loop {
                        if q == 0 {
                            break 'tuples;
                        }
                        q -= 1;
                        idxs[q] += 1;
                        if idxs[q] < limits[q].1 {
                            break;
                        }
                        idxs[q] = limits[q].0;
                    }
                }
            }
        }
        frontier_start = round_start;
        let mut grew = false;
        for t in new_rows {
            if seen.insert(t.clone()) {
                rows.push(t);
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    Relation::new(k, m, seen)
}

/// All tuples outside `R` that can be moved into `R` by changing any single
/// coordinate.
pub fn essential_tuples(r: &Relation) -> Vec<Vec<Element>> {
    let k = r.domain_size();
    let m = r.arity();
    let len = k.pow(m as u32);
    let mut out = Vec::new();
    let mut t = vec![0 as Element; m];
    'outer: for idx in 0..len {
        decode_tuple(k, idx, &mut t);
        if r.contains(&t) {
            continue;
        }
        let mut probe = t.clone();
        for i in 0..m {
            let mut fixable = false;
            for b in 0..k {
                probe[i] = b as Element;
                if r.contains(&probe) {
                    fixable = true;
                    break;
                }
            }
            probe[i] = t[i];
            if !fixable {
                continue 'outer;
            }
        }
        out.push(t.clone());
    }
    out
}

/// True iff the relation has an essential tuple.
pub fn is_essential(r: &Relation) -> bool {
    !essential_tuples(r).is_empty()
}

/// A connected component of the one-coordinate-difference graph on
/// `R ∪ Ess(R)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub member_tuples: BTreeSet<Vec<Element>>,
    /// True iff the component contains only tuples of `R`.
    pub is_trivial: bool,
    /// When the component equals the full product of its per-coordinate
    /// value sets, those factors.
    pub product_factors: Option<Vec<BTreeSet<Element>>>,
}

/// Partitions `R ∪ Ess(R)` into blocks, ordered by least member tuple.
pub fn blocks(r: &Relation) -> Vec<Block> {
    let m = r.arity();
    let k = r.domain_size();
    let mut member_list: Vec<Vec<Element>> = r.iter().cloned().collect();
    member_list.extend(essential_tuples(r));
    member_list.sort();
    member_list.dedup();
    let index: BTreeMap<&Vec<Element>, usize> = member_list
        .iter()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();

    // union-find over tuples differing in exactly one coordinate
    let mut parent: Vec<usize> = (0..member_list.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, t) in member_list.iter().enumerate() {
        let mut probe = t.clone();
        for c in 0..m {
            for b in 0..k {
                let b = b as Element;
                if b == t[c] {
                    continue;
                }
                probe[c] = b;
                if let Some(&j) = index.get(&probe) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
            }
            probe[c] = t[c];
        }
    }

    let mut groups: BTreeMap<usize, BTreeSet<Vec<Element>>> = BTreeMap::new();
    for (i, t) in member_list.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(t.clone());
    }
    let mut out: Vec<Block> = groups
        .into_values()
        .map(|members| {
            let is_trivial = members.iter().all(|t| r.contains(t));
            let factors: Vec<BTreeSet<Element>> = (0..m)
                .map(|c| members.iter().map(|t| t[c]).collect())
                .collect();
            let product_size: u128 = factors.iter().map(|f| f.len() as u128).product();
            let product_factors = (product_size == members.len() as u128).then_some(factors);
            Block {
                member_tuples: members,
                is_trivial,
                product_factors,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.member_tuples
            .iter()
            .next()
            .cmp(&b.member_tuples.iter().next())
    });
    out
}

/// A finite abelian group given by its Cayley table, with 0 as the
/// designated neutral element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianGroup {
    pub name: String,
    pub order: usize,
    pub add: Vec<Vec<u8>>,
}

impl AbelianGroup {
    pub fn cyclic(n: usize) -> Self {
        AbelianGroup {
            name: format!("Z{n}"),
            order: n,
            add: (0..n)
                .map(|a| (0..n).map(|b| ((a + b) % n) as u8).collect())
                .collect(),
        }
    }

    /// The Klein four-group, encoded by bitwise xor on `{0,1,2,3}`.
    pub fn klein_four() -> Self {
        AbelianGroup {
            name: "Z2xZ2".to_string(),
            order: 4,
            add: (0..4).map(|a| (0..4).map(|b| (a ^ b) as u8).collect()).collect(),
        }
    }

    pub fn add(&self, a: u8, b: u8) -> u8 {
        self.add[a as usize][b as usize]
    }
}

/// Witness that `R ∩ B` is carved out of a product block by a group
/// equation: tuples whose mapped coordinates sum to zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockGroupStructure {
    pub group: AbelianGroup,
    /// Per coordinate, the surjection from the block factor onto the group.
    pub maps: Vec<BTreeMap<Element, u8>>,
}

fn surjections(from: &[Element], order: usize) -> Vec<BTreeMap<Element, u8>> {
    // lexicographic in the value tuple, so identity-like maps come first
    let mut out = Vec::new();
    let total = order.pow(from.len() as u32);
    let mut values = vec![0 as Element; from.len()];
    for idx in 0..total {
        decode_tuple(order, idx, &mut values);
        let mut hit = vec![false; order];
        let mut map = BTreeMap::new();
        for (&e, &v) in from.iter().zip(&values) {
            hit[v as usize] = true;
            map.insert(e, v as u8);
        }
        if hit.iter().all(|&h| h) {
            out.push(map);
        }
    }
    out
}

/// Brute-force search for a group structure on a product block: an abelian
/// group of prime-power order 2, 3 or 4 and surjections from the factors
/// with `R ∩ B = { x : sum_i phi_i(x_i) = 0 }`. Returns the first witness in
/// deterministic order, or `None` when no equation carves the block.
pub fn block_group_structure(
    r: &Relation,
    block: &Block,
) -> Result<Option<BlockGroupStructure>> {
    let factors = block.product_factors.as_ref().ok_or_else(|| Error::Precondition {
        construction: "block_group_structure",
        requirement: "block must be a product of per-coordinate value sets".to_string(),
    })?;
    if let Some(big) = factors.iter().find(|f| f.len() > 4) {
        return Err(Error::Precondition {
            construction: "block_group_structure",
            requirement: format!("factor of size {} exceeds the search bound 4", big.len()),
        });
    }
    let min_factor = factors.iter().map(|f| f.len()).min().unwrap_or(0);
    let groups = [
        AbelianGroup::cyclic(2),
        AbelianGroup::cyclic(3),
        AbelianGroup::cyclic(4),
        AbelianGroup::klein_four(),
    ];
    let factor_lists: Vec<Vec<Element>> = factors
        .iter()
        .map(|f| f.iter().copied().collect())
        .collect();
    for group in groups.iter().filter(|g| g.order <= min_factor) {
        let per_coord: Vec<Vec<BTreeMap<Element, u8>>> = factor_lists
            .iter()
            .map(|f| surjections(f, group.order))
            .collect();
        if per_coord.iter().any(|c| c.is_empty()) {
            continue;
        }
        let mut pick = vec![0usize; per_coord.len()];
        'assignments: loop {
            let maps: Vec<&BTreeMap<Element, u8>> = pick
                .iter()
                .zip(&per_coord)
                .map(|(&i, c)| &c[i])
                .collect();
            let mut ok = true;
            for t in &block.member_tuples {
                let mut acc = 0u8;
                for (x, phi) in t.iter().zip(&maps) {
                    acc = group.add(acc, phi[x]);
                }
                if (acc == 0) != r.contains(t) {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(Some(BlockGroupStructure {
                    group: group.clone(),
                    maps: maps.into_iter().cloned().collect(),
                }));
            }
            let mut q = pick.len();
            loop {
                if q == 0 {
                    break 'assignments;
                }
                q -= 1;
                pick[q] += 1;
                if pick[q] < per_coord[q].len() {
                    break;
                }
                pick[q] = 0;
            }
        }
    }
    Ok(None)
}

/// True iff `R` equals the intersection over all `n`-element coordinate
/// subsets `J` of the cylinder extensions of its projections onto `J`.
pub fn is_n_decomposable(r: &Relation, n: usize) -> Result<bool> {
    let m = r.arity();
    if n == 0 || n >= m {
        return Err(Error::invalid(
            "decomposability arity",
            format!("n must satisfy 1 <= n < {m}"),
        ));
    }
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    fn rec(start: usize, m: usize, n: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == n {
            out.push(current.clone());
            return;
        }
        for c in start..m {
            current.push(c);
            rec(c + 1, m, n, current, out);
            current.pop();
        }
    }
    rec(0, m, n, &mut current, &mut subsets);
    let projections: Vec<(Vec<usize>, Relation)> = subsets
        .into_iter()
        .map(|j| {
            let p = r.project(&j).expect("coords in range");
            (j, p)
        })
        .collect();
    let k = r.domain_size();
    let len = k.pow(m as u32);
    let mut t = vec![0 as Element; m];
    for idx in 0..len {
        decode_tuple(k, idx, &mut t);
        let in_all = projections.iter().all(|(j, p)| {
            let proj: Vec<Element> = j.iter().map(|&c| t[c]).collect();
            p.contains(&proj)
        });
        if in_all != r.contains(&t) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Verdict of the bounded criticality test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criticality {
    Critical,
    NotCritical,
    Unknown,
}

/// Meet-irreducibility test: `R` is critical iff it is essential and the
/// intersection of the least invariant relations above `R` (one closure per
/// missing tuple, under the supplied generators) strictly contains `R`.
///
/// The verdict degrades to `Unknown` when the caller does not declare the
/// generators complete for `Pol(R)` or when the closure work exceeds the
/// budget (counted in closure tuples).
pub fn is_critical(
    r: &Relation,
    generators: &[Operation],
    generators_complete: bool,
    budget: usize,
) -> Result<Criticality> {
    if !is_essential(r) {
        return Ok(Criticality::NotCritical);
    }
    if !generators_complete {
        return Ok(Criticality::Unknown);
    }
    let k = r.domain_size();
    let m = r.arity();
    let len = checked_table_len(k, m)?;
    let mut work = 0usize;
    let mut intersection: Option<BTreeSet<Vec<Element>>> = None;
    let mut t = vec![0 as Element; m];
    for idx in 0..len {
        decode_tuple(k, idx, &mut t);
        if r.contains(&t) {
            continue;
        }
        let mut seed: Vec<Vec<Element>> = r.iter().cloned().collect();
        seed.push(t.clone());
        let closed = inv_closure(generators, &Relation::new(k, m, seed)?)?;
        work += closed.len();
        if work > budget {
            return Ok(Criticality::Unknown);
        }
        intersection = Some(match intersection {
            None => closed.tuples().clone(),
            Some(acc) => acc.intersection(closed.tuples()).cloned().collect(),
        });
    }
    match intersection {
        // full relation: no missing tuples, but then it is not essential
        None => Ok(Criticality::NotCritical),
        Some(acc) => {
            let strictly_larger = acc.len() > r.len();
            Ok(if strictly_larger {
                Criticality::Critical
            } else {
                Criticality::NotCritical
            })
        }
    }
}

/// A named bundle of relations over a shared domain. Relation order is
/// preserved and significant for serialization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Structure {
    domain_size: usize,
    relations: Vec<(String, Relation)>,
}

impl Structure {
    pub fn new(
        domain_size: usize,
        relations: impl IntoIterator<Item = (String, Relation)>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let relations: Vec<(String, Relation)> = relations.into_iter().collect();
        for (name, rel) in &relations {
            if !seen.insert(name.clone()) {
                return Err(Error::DuplicateRelationName(name.clone()));
            }
            if rel.domain_size() != domain_size {
                return Err(Error::DomainMismatch {
                    expected: domain_size,
                    found: rel.domain_size(),
                });
            }
        }
        Ok(Structure {
            domain_size,
            relations,
        })
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn relations(&self) -> &[(String, Relation)] {
        &self.relations
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| r)
    }

    /// Relation names with arities, in order.
    pub fn signature(&self) -> Vec<(String, usize)> {
        self.relations
            .iter()
            .map(|(n, r)| (n.clone(), r.arity()))
            .collect()
    }

    pub fn same_signature(&self, other: &Structure) -> bool {
        self.signature() == other.signature()
    }

    /// The list of relations without names, for Pol computations.
    pub fn relation_list(&self) -> Vec<Relation> {
        self.relations.iter().map(|(_, r)| r.clone()).collect()
    }

    /// Induced substructure on `subset` (ascending, deduplicated), with
    /// elements renumbered by their position in the sorted subset.
    pub fn induced(&self, subset: &[Element]) -> Result<Structure> {
        let mut sub: Vec<Element> = subset.to_vec();
        sub.sort_unstable();
        sub.dedup();
        if sub.is_empty() {
            return Err(Error::invalid("substructure", "subset must be nonempty"));
        }
        if let Some(&bad) = sub.iter().find(|&&v| v as usize >= self.domain_size) {
            return Err(Error::ValueOutOfRange {
                value: bad as usize,
                domain: self.domain_size,
            });
        }
        let renumber: BTreeMap<Element, Element> = sub
            .iter()
            .enumerate()
            .map(|(i, &e)| (e, i as Element))
            .collect();
        let relations = self
            .relations
            .iter()
            .map(|(name, rel)| {
                let tuples: Vec<Vec<Element>> = rel
                    .iter()
                    .filter(|t| t.iter().all(|e| renumber.contains_key(e)))
                    .map(|t| t.iter().map(|e| renumber[e]).collect())
                    .collect();
                Ok((name.clone(), Relation::new(sub.len(), rel.arity(), tuples)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Structure::new(sub.len(), relations)
    }
}

impl Serialize for Structure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("Structure", 2)?;
        st.serialize_field("domain", &self.domain_size)?;
        st.serialize_field("relations", &RelationsInOrder(&self.relations))?;
        st.end()
    }
}

struct RelationsInOrder<'a>(&'a [(String, Relation)]);

impl Serialize for RelationsInOrder<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (name, rel) in self.0 {
            map.serialize_entry(name, rel)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Structure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct StructureVisitor;

        impl<'de> Visitor<'de> for StructureVisitor {
            type Value = Structure;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a structure object with `domain` and `relations`")
            }

            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<Structure, A::Error> {
                let mut domain: Option<usize> = None;
                let mut relations: Option<Vec<(String, Relation)>> = None;
                while let Some(key) = access.next_key::<String>()? {
                    match key.as_str() {
                        "domain" => domain = Some(access.next_value()?),
                        "relations" => {
                            relations = Some(access.next_value::<OrderedRelations>()?.0)
                        }
                        other => {
                            return Err(serde::de::Error::unknown_field(
                                other,
                                &["domain", "relations"],
                            ))
                        }
                    }
                }
                let domain =
                    domain.ok_or_else(|| serde::de::Error::missing_field("domain"))?;
                let relations =
                    relations.ok_or_else(|| serde::de::Error::missing_field("relations"))?;
                Structure::new(domain, relations).map_err(serde::de::Error::custom)
            }
        }

        struct OrderedRelations(Vec<(String, Relation)>);

        impl<'de> Deserialize<'de> for OrderedRelations {
            fn deserialize<D: Deserializer<'de>>(
                deserializer: D,
            ) -> std::result::Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = OrderedRelations;
                    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                        f.write_str("a map of relation name to relation")
                    }
                    fn visit_map<A: MapAccess<'de>>(
                        self,
                        mut access: A,
                    ) -> std::result::Result<OrderedRelations, A::Error> {
                        let mut out = Vec::new();
                        while let Some((name, rel)) = access.next_entry::<String, Relation>()? {
                            out.push((name, rel));
                        }
                        Ok(OrderedRelations(out))
                    }
                }
                deserializer.deserialize_map(V)
            }
        }

        deserializer.deserialize_map(StructureVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{make_projection, tuples};

    fn diseq2() -> Relation {
        Relation::new(2, 2, vec![vec![0, 1], vec![1, 0]]).unwrap()
    }

    fn parity3() -> Relation {
        Relation::new(
            2,
            3,
            tuples(2, 3).filter(|t| t[0] ^ t[1] ^ t[2] == 0),
        )
        .unwrap()
    }

    fn xor3() -> Operation {
        Operation::from_fn(2, 3, |t| t[0] ^ t[1] ^ t[2]).unwrap()
    }

    #[test]
    fn projections_preserve_everything() {
        let p = make_projection(2, 2, 1).unwrap();
        assert!(preserves(&p, &diseq2()).unwrap());
        assert!(preserves(&p, &parity3()).unwrap());
    }

    #[test]
    fn xor3_preserves_disequality() {
        assert!(preserves(&xor3(), &diseq2()).unwrap());
    }

    #[test]
    fn constant_does_not_preserve_disequality() {
        let c0 = Operation::from_fn(2, 1, |_| 0).unwrap();
        assert!(!preserves(&c0, &diseq2()).unwrap());
    }

    #[test]
    fn pol_of_two_cycle_edge_is_identity_and_negation() {
        let found = pol(2, &[diseq2()], 1, 1 << 20).unwrap();
        let id = Operation::new(2, 1, vec![0, 1]).unwrap();
        let neg = Operation::new(2, 1, vec![1, 0]).unwrap();
        assert_eq!(found.len(), 2);
        assert!(found.contains(&id) && found.contains(&neg));
    }

    #[test]
    fn pol_of_empty_constraints_is_everything() {
        let found = pol(2, &[], 1, 1 << 20).unwrap();
        assert_eq!(found.len(), 4);
    }

    #[test]
    fn pol_of_singletons_is_idempotent_part() {
        let zero = Relation::new(2, 1, vec![vec![0]]).unwrap();
        let one = Relation::new(2, 1, vec![vec![1]]).unwrap();
        let found = pol(2, &[zero, one], 2, 1 << 20).unwrap();
        assert_eq!(found.len(), 4);
        assert!(found.iter().all(|f| f.is_idempotent()));
    }

    #[test]
    fn inv_closure_without_generators_is_seed() {
        let s = diseq2();
        assert_eq!(inv_closure(&[], &s).unwrap(), s);
    }

    #[test]
    fn inv_closure_of_xor3_fills_square() {
        let seed = Relation::new(2, 2, vec![vec![0, 0], vec![0, 1], vec![1, 0]]).unwrap();
        let closed = inv_closure(&[xor3()], &seed).unwrap();
        assert_eq!(closed, Relation::full(2, 2).unwrap());
    }

    #[test]
    fn inv_closure_of_negation_orbit() {
        let neg = Operation::new(2, 1, vec![1, 0]).unwrap();
        let seed = Relation::new(2, 2, vec![vec![0, 0]]).unwrap();
        let closed = inv_closure(&[neg], &seed).unwrap();
        assert_eq!(
            closed,
            Relation::new(2, 2, vec![vec![0, 0], vec![1, 1]]).unwrap()
        );
    }

    #[test]
    fn essential_tuples_of_disequality() {
        assert_eq!(
            essential_tuples(&diseq2()),
            vec![vec![0, 0], vec![1, 1]]
        );
        assert!(is_essential(&diseq2()));
    }

    #[test]
    fn full_relation_has_no_essential_tuples() {
        let full = Relation::full(2, 2).unwrap();
        assert!(essential_tuples(&full).is_empty());
        assert!(!is_essential(&full));
    }

    #[test]
    fn parity_essential_tuples_are_odd_tuples() {
        let ess = essential_tuples(&parity3());
        assert_eq!(ess.len(), 4);
        for t in &ess {
            assert_eq!(t[0] ^ t[1] ^ t[2], 1);
        }
        assert!(is_essential(&parity3()));
    }

    #[test]
    fn blocks_of_disequality_form_full_square() {
        let bs = blocks(&diseq2());
        assert_eq!(bs.len(), 1);
        let b = &bs[0];
        assert!(!b.is_trivial);
        assert_eq!(b.member_tuples.len(), 4);
        let factors = b.product_factors.as_ref().unwrap();
        assert_eq!(factors.len(), 2);
        assert!(factors.iter().all(|f| f.len() == 2));
    }

    #[test]
    fn blocks_of_singleton_relation() {
        let r = Relation::new(2, 2, vec![vec![0, 0]]).unwrap();
        let bs = blocks(&r);
        assert_eq!(bs.len(), 1);
        assert!(bs[0].is_trivial);
        assert_eq!(bs[0].member_tuples.len(), 1);
    }

    #[test]
    fn blocks_of_parity_are_one_full_cube() {
        let bs = blocks(&parity3());
        assert_eq!(bs.len(), 1);
        assert!(!bs[0].is_trivial);
        assert_eq!(bs[0].member_tuples.len(), 8);
        assert!(bs[0].product_factors.is_some());
    }

    #[test]
    fn parity_block_group_is_z2_identity() {
        let bs = blocks(&parity3());
        let witness = block_group_structure(&parity3(), &bs[0]).unwrap().unwrap();
        assert_eq!(witness.group.order, 2);
        for phi in &witness.maps {
            assert_eq!(phi[&0], 0);
            assert_eq!(phi[&1], 1);
        }
    }

    #[test]
    fn full_block_has_no_group_structure() {
        let full = Relation::full(2, 2).unwrap();
        let block = Block {
            member_tuples: full.tuples().clone(),
            is_trivial: true,
            product_factors: Some(vec![
                [0, 1].into_iter().collect(),
                [0, 1].into_iter().collect(),
            ]),
        };
        assert_eq!(block_group_structure(&full, &block).unwrap(), None);
    }

    #[test]
    fn mod3_sum_block_group_is_z3_identity() {
        let r = Relation::new(
            3,
            3,
            tuples(3, 3).filter(|t| (t[0] + t[1] + t[2]) % 3 == 0),
        )
        .unwrap();
        let bs = blocks(&r);
        assert_eq!(bs.len(), 1);
        let witness = block_group_structure(&r, &bs[0]).unwrap().unwrap();
        assert_eq!(witness.group.order, 3);
        for phi in &witness.maps {
            for v in 0..3u16 {
                assert_eq!(phi[&v], v as u8);
            }
        }
    }

    #[test]
    fn parity_is_not_two_decomposable() {
        assert!(!is_n_decomposable(&parity3(), 2).unwrap());
    }

    #[test]
    fn full_relation_is_one_decomposable() {
        let full = Relation::full(2, 3).unwrap();
        assert!(is_n_decomposable(&full, 1).unwrap());
    }

    #[test]
    fn diagonal_is_two_decomposable() {
        let r = Relation::new(2, 3, vec![vec![0, 0, 0], vec![1, 1, 1]]).unwrap();
        assert!(is_n_decomposable(&r, 2).unwrap());
    }

    #[test]
    fn parity_is_critical_under_xor3() {
        let verdict = is_critical(&parity3(), &[xor3()], true, 1 << 20).unwrap();
        assert_eq!(verdict, Criticality::Critical);
    }

    #[test]
    fn full_relation_is_not_critical() {
        let full = Relation::full(2, 2).unwrap();
        let verdict = is_critical(&full, &[], true, 1 << 20).unwrap();
        assert_eq!(verdict, Criticality::NotCritical);
    }

    #[test]
    fn or_relation_criticality_regression() {
        // R = {(0,1),(1,0),(1,1)} with generators pol(R, <= 2): the closure
        // of R plus its one missing tuple is the full square, which strictly
        // contains R, so the relation is critical. Frozen as a regression
        // verdict.
        let r = Relation::new(2, 2, vec![vec![0, 1], vec![1, 0], vec![1, 1]]).unwrap();
        let mut gens = pol(2, std::slice::from_ref(&r), 1, 1 << 20).unwrap();
        gens.extend(pol(2, std::slice::from_ref(&r), 2, 1 << 20).unwrap());
        let verdict = is_critical(&r, &gens, true, 1 << 20).unwrap();
        assert_eq!(verdict, Criticality::Critical);
    }

    #[test]
    fn incomplete_generators_yield_unknown() {
        let verdict = is_critical(&parity3(), &[xor3()], false, 1 << 20).unwrap();
        assert_eq!(verdict, Criticality::Unknown);
    }

    #[test]
    fn relation_json_is_sorted_and_round_trips() {
        let r = Relation::new(2, 2, vec![vec![1, 0], vec![0, 1]]).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"{"domain":2,"arity":2,"tuples":[[0,1],[1,0]]}"#);
        let back: Relation = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn structure_json_preserves_insertion_order() {
        let s = Structure::new(
            2,
            vec![
                ("one".to_string(), Relation::new(2, 1, vec![vec![1]]).unwrap()),
                ("edge".to_string(), diseq2()),
            ],
        )
        .unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(
            text,
            r#"{"domain":2,"relations":{"one":{"domain":2,"arity":1,"tuples":[[1]]},"edge":{"domain":2,"arity":2,"tuples":[[0,1],[1,0]]}}}"#
        );
        let back: Structure = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn duplicate_relation_names_rejected() {
        let r = diseq2();
        let err = Structure::new(2, vec![("e".into(), r.clone()), ("e".into(), r)]);
        assert!(matches!(err, Err(Error::DuplicateRelationName(_))));
    }

    #[test]
    fn galois_antitonicity_spot_check() {
        // Larger constraint sets have fewer polymorphisms: for every pair of
        // binary Boolean relations R, S and arity <= 2,
        // pol({R,S}) ⊆ pol({R}). Exhaustive over all 16 binary relations.
        let mut rels = Vec::new();
        for mask in 0..16usize {
            let tuples: Vec<Vec<Element>> = crate::ops::tuples(2, 2)
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, t)| t)
                .collect();
            rels.push(Relation::new(2, 2, tuples).unwrap());
        }
        for r in &rels {
            for s in &rels {
                for n in 1..=2usize {
                    let small = pol(2, std::slice::from_ref(r), n, 1 << 20).unwrap();
                    let big = pol(2, &[r.clone(), s.clone()], n, 1 << 20).unwrap();
                    for op in &big {
                        assert!(small.contains(op));
                    }
                }
            }
        }
    }
}
