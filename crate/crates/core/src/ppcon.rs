//! Homomorphisms, cores, pp-powers, and the free-structure gadgets backing
//! the splitting constructions.
//!
//! Homomorphism search is backtracking over per-element candidate sets with
//! generalized arc-consistency pruning; variables are ordered by constraint
//! degree and values ascending, so the first solution is deterministic.
//! Every homomorphism returned anywhere re-verifies the preservation
//! condition on construction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::conditions::{operation_satisfies, MinorCondition};
use crate::error::{Error, Result};
use crate::ops::{decode_tuple, encode_tuple, make_projection, Element, Operation, VarMap};
use crate::rel::{preserves, Relation, Structure};

/// A verified homomorphism, stored as the image list indexed by source
/// element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Homomorphism {
    map: Vec<Element>,
}

/// First violated (relation, tuple) pair of a candidate map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HomViolation {
    pub relation: String,
    pub tuple: Vec<Element>,
    pub image: Vec<Element>,
}

impl Homomorphism {
    /// Checks the preservation condition for every relation pair and wraps
    /// the map on success.
    pub fn verified(source: &Structure, target: &Structure, map: Vec<Element>) -> Result<Self> {
        if map.len() != source.domain_size() {
            return Err(Error::invalid(
                "homomorphism",
                format!(
                    "map length {} does not match source domain {}",
                    map.len(),
                    source.domain_size()
                ),
            ));
        }
        if let Some(&bad) = map.iter().find(|&&v| v as usize >= target.domain_size()) {
            return Err(Error::ValueOutOfRange {
                value: bad as usize,
                domain: target.domain_size(),
            });
        }
        if let Some(violation) = Self::check(source, target, &map)? {
            return Err(Error::invalid(
                "homomorphism",
                format!(
                    "tuple {:?} of `{}` maps outside the target relation (image {:?})",
                    violation.tuple, violation.relation, violation.image
                ),
            ));
        }
        Ok(Homomorphism { map })
    }

    /// Returns the first violation of the preservation condition, if any.
    pub fn check(
        source: &Structure,
        target: &Structure,
        map: &[Element],
    ) -> Result<Option<HomViolation>> {
        if !source.same_signature(target) {
            return Err(Error::SignatureMismatch {
                why: "relation names or arities differ".to_string(),
            });
        }
        for ((name, ra), (_, rb)) in source.relations().iter().zip(target.relations()) {
            for t in ra.iter() {
                let image: Vec<Element> = t.iter().map(|&e| map[e as usize]).collect();
                if !rb.contains(&image) {
                    return Ok(Some(HomViolation {
                        relation: name.clone(),
                        tuple: t.clone(),
                        image,
                    }));
                }
            }
        }
        Ok(None)
    }

    pub fn map(&self) -> &[Element] {
        &self.map
    }

    pub fn apply(&self, e: Element) -> Element {
        self.map[e as usize]
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = vec![false; self.map.len().max(
            self.map.iter().map(|&v| v as usize + 1).max().unwrap_or(0),
        )];
        self.map.iter().all(|&v| {
            if seen[v as usize] {
                false
            } else {
                seen[v as usize] = true;
                true
            }
        })
    }
}

struct Constraint {
    rel: usize,
    scope: Vec<Element>,
}

struct HomSearch<'a> {
    target_rels: Vec<&'a Relation>,
    constraints: Vec<Constraint>,
    /// constraint indices touching each source element
    watching: Vec<Vec<usize>>,
    var_order: Vec<usize>,
    nb: usize,
}

type Domains = Vec<Vec<bool>>;

impl<'a> HomSearch<'a> {
    fn new(a: &'a Structure, b: &'a Structure) -> Result<Self> {
        if !a.same_signature(b) {
            return Err(Error::SignatureMismatch {
                why: "relation names or arities differ".to_string(),
            });
        }
        let na = a.domain_size();
        let mut constraints = Vec::new();
        let mut watching = vec![Vec::new(); na];
        let target_rels: Vec<&Relation> = b.relations().iter().map(|(_, r)| r).collect();
        for (ri, (_, ra)) in a.relations().iter().enumerate() {
            for t in ra.iter() {
                let ci = constraints.len();
                for &e in t {
                    if !watching[e as usize].contains(&ci) {
                        watching[e as usize].push(ci);
                    }
                }
                constraints.push(Constraint {
                    rel: ri,
                    scope: t.clone(),
                });
            }
        }
        let mut degree = vec![0usize; na];
        for c in &constraints {
            for &e in &c.scope {
                degree[e as usize] += 1;
            }
        }
        let mut var_order: Vec<usize> = (0..na).collect();
        var_order.sort_by_key(|&v| (usize::MAX - degree[v], v));
        Ok(HomSearch {
            target_rels,
            constraints,
            watching,
            var_order,
            nb: b.domain_size(),
        })
    }

    fn full_domains(&self) -> Domains {
        vec![vec![true; self.nb]; self.watching.len()]
    }

    /// Generalized arc consistency: prunes values without support until a
    /// fixed point; false when a domain empties.
    fn propagate(&self, domains: &mut Domains, mut queue: Vec<usize>) -> bool {
        let mut queued = vec![false; self.constraints.len()];
        for &c in &queue {
            queued[c] = true;
        }
        while let Some(ci) = queue.pop() {
            queued[ci] = false;
            let constraint = &self.constraints[ci];
            let scope = &constraint.scope;
            let tuples = self.target_rels[constraint.rel];
            let mut changed_vars: Vec<Element> = Vec::new();
            for (pos, &var) in scope.iter().enumerate() {
                let var = var as usize;
                for v in 0..self.nb {
                    if !domains[var][v] {
                        continue;
                    }
                    let mut supported = false;
                    'support: for bt in tuples.iter() {
                        if bt[pos] as usize != v {
                            continue;
                        }
                        for (j, &sv) in scope.iter().enumerate() {
                            if !domains[sv as usize][bt[j] as usize] {
                                continue 'support;
                            }
                            for (j2, &sv2) in scope.iter().enumerate().skip(j + 1) {
                                if sv == sv2 && bt[j] != bt[j2] {
                                    continue 'support;
                                }
                            }
                        }
                        supported = true;
                        break;
                    }
                    if !supported {
                        domains[var][v] = false;
                        if domains[var].iter().all(|&x| !x) {
                            return false;
                        }
                        changed_vars.push(var as Element);
                    }
                }
            }
            for &var in &changed_vars {
                for &c in &self.watching[var as usize] {
                    if !queued[c] {
                        queued[c] = true;
                        queue.push(c);
                    }
                }
            }
        }
        true
    }

    fn search(&self, domains: &Domains) -> Option<Vec<Element>> {
        let var = self
            .var_order
            .iter()
            .copied()
            .find(|&v| domains[v].iter().filter(|&&x| x).count() > 1);
        let var = match var {
            None => {
                // all domains singleton: extract the assignment
                let mut out = Vec::with_capacity(domains.len());
                for d in domains.iter() {
                    out.push(d.iter().position(|&x| x)? as Element);
                }
                return Some(out);
            }
            Some(v) => v,
        };
        for v in 0..self.nb {
            if !domains[var][v] {
                continue;
            }
            let mut next = domains.clone();
            for (i, slot) in next[var].iter_mut().enumerate() {
                *slot = i == v;
            }
            if self.propagate(&mut next, self.watching[var].clone()) {
                if let Some(sol) = self.search(&next) {
                    return Some(sol);
                }
            }
        }
        None
    }
}

/// Searches for a homomorphism from `a` to `b`; `None` is definitive.
pub fn find_homomorphism(a: &Structure, b: &Structure) -> Result<Option<Homomorphism>> {
    let search = HomSearch::new(a, b)?;
    let mut domains = search.full_domains();
    let all: Vec<usize> = (0..search.constraints.len()).collect();
    if !search.propagate(&mut domains, all) {
        return Ok(None);
    }
    match search.search(&domains) {
        None => Ok(None),
        Some(map) => Ok(Some(Homomorphism::verified(a, b, map)?)),
    }
}

/// Homomorphic equivalence, with both witnesses when it holds.
pub fn hom_equivalent(a: &Structure, b: &Structure) -> Result<Option<(Homomorphism, Homomorphism)>> {
    let fwd = match find_homomorphism(a, b)? {
        None => return Ok(None),
        Some(h) => h,
    };
    match find_homomorphism(b, a)? {
        None => Ok(None),
        Some(back) => Ok(Some((fwd, back))),
    }
}

/// Searches for an endomorphism identifying two elements: for each pair and
/// common image in lexicographic order, restricts the domains and searches.
fn find_noninjective_endo(a: &Structure) -> Result<Option<Homomorphism>> {
    let n = a.domain_size();
    let search = HomSearch::new(a, a)?;
    for u in 0..n {
        for v in u + 1..n {
            for w in 0..n {
                let mut domains = search.full_domains();
                for (i, slot) in domains[u].iter_mut().enumerate() {
                    *slot = i == w;
                }
                for (i, slot) in domains[v].iter_mut().enumerate() {
                    *slot = i == w;
                }
                let seed: Vec<usize> = search.watching[u]
                    .iter()
                    .chain(search.watching[v].iter())
                    .copied()
                    .collect();
                if !search.propagate(&mut domains, seed) {
                    continue;
                }
                if let Some(map) = search.search(&domains) {
                    return Ok(Some(Homomorphism::verified(a, a, map)?));
                }
            }
        }
    }
    Ok(None)
}

/// True iff every endomorphism is an automorphism.
pub fn is_core(a: &Structure) -> Result<bool> {
    Ok(find_noninjective_endo(a)?.is_none())
}

/// A core of a structure with the retraction onto it and the witnessing
/// subset of the original domain.
#[derive(Clone, Debug)]
pub struct CoreResult {
    pub core: Structure,
    pub retraction: Homomorphism,
    pub subset: Vec<Element>,
}

fn binomial(n: usize, k: usize) -> u128 {
    let mut acc = 1u128;
    for i in 0..k.min(n - k) {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

const LEX_SCAN_CAP: u128 = 200_000;

/// Computes a core by iterating non-injective endomorphisms down to a
/// minimal image, then normalizing to the lexicographically least subset of
/// the original domain that induces a core (skipped when the subset count
/// exceeds a scan cap; the deterministic iterated retract is returned then).
pub fn core_of(a: &Structure) -> Result<CoreResult> {
    let n = a.domain_size();
    let mut subset: Vec<Element> = (0..n as Element).collect();
    let mut current = a.clone();
    loop {
        match find_noninjective_endo(&current)? {
            None => break,
            Some(e) => {
                let mut image: Vec<Element> = e.map().to_vec();
                image.sort_unstable();
                image.dedup();
                subset = image.iter().map(|&i| subset[i as usize]).collect();
                current = a.induced(&subset)?;
            }
        }
    }
    let s = subset.len();
    if s < n && binomial(n, s) <= LEX_SCAN_CAP {
        let mut pick: Vec<usize> = (0..s).collect();
        loop {
            let candidate_subset: Vec<Element> = pick.iter().map(|&i| i as Element).collect();
            let cand = a.induced(&candidate_subset)?;
            if find_noninjective_endo(&cand)?.is_none() {
                if let Some(h) = find_homomorphism(a, &cand)? {
                    return Ok(CoreResult {
                        core: cand,
                        retraction: h,
                        subset: candidate_subset,
                    });
                }
            }
            // next s-combination of 0..n in lexicographic order
            let mut i = s;
            loop {
                if i == 0 {
                    return Err(Error::invalid(
                        "core",
                        "no induced core found at the computed size",
                    ));
                }
                i -= 1;
                if pick[i] + (s - i) < n {
                    pick[i] += 1;
                    for j in i + 1..s {
                        pick[j] = pick[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
    let retraction = find_homomorphism(a, &current)?.ok_or_else(|| {
        Error::invalid("core", "retract found but no homomorphism onto it")
    })?;
    Ok(CoreResult {
        core: current,
        retraction,
        subset,
    })
}

/// Adds a singleton unary relation for every domain element, under fresh
/// names (`sing<element>`, suffixed on collision).
pub fn expand_by_singletons(c: &Structure) -> Result<Structure> {
    Ok(expand_with_names(c)?.0)
}

pub(crate) fn expand_with_names(c: &Structure) -> Result<(Structure, Vec<String>)> {
    let taken: Vec<String> = c.relations().iter().map(|(n, _)| n.clone()).collect();
    let mut relations: Vec<(String, Relation)> = c.relations().to_vec();
    let mut names = Vec::new();
    for a in 0..c.domain_size() {
        let mut name = format!("sing{a}");
        let mut j = 0;
        while taken.contains(&name) || names.contains(&name) {
            j += 1;
            name = format!("sing{a}_{j}");
        }
        relations.push((
            name.clone(),
            Relation::new(c.domain_size(), 1, vec![vec![a as Element]])?,
        ));
        names.push(name);
    }
    Ok((Structure::new(c.domain_size(), relations)?, names))
}

/// A primitive positive formula: conjunction of relation atoms and variable
/// equalities under existential quantification. Variables `0..free` are
/// free, `free..free+exists` existential.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PPFormula {
    pub free: usize,
    pub exists: usize,
    pub atoms: Vec<(String, Vec<usize>)>,
    pub eq: Vec<(usize, usize)>,
}

impl PPFormula {
    fn validate(&self, a: &Structure) -> Result<()> {
        let total = self.free + self.exists;
        for (name, vars) in &self.atoms {
            let rel = a
                .relation(name)
                .ok_or_else(|| Error::UnknownRelation(name.clone()))?;
            if vars.len() != rel.arity() {
                return Err(Error::ArityMismatch {
                    expected: rel.arity(),
                    found: vars.len(),
                });
            }
            if let Some(&bad) = vars.iter().find(|&&v| v >= total) {
                return Err(Error::invalid(
                    "pp formula",
                    format!("variable {bad} out of range {total}"),
                ));
            }
        }
        if let Some(&(x, y)) = self
            .eq
            .iter()
            .find(|&&(x, y)| x >= total || y >= total)
        {
            return Err(Error::invalid(
                "pp formula",
                format!("equality ({x},{y}) out of range {total}"),
            ));
        }
        Ok(())
    }

    /// Evaluates the formula over `a`: the set of satisfying free-variable
    /// assignments, each of length `free`.
    pub fn evaluate(&self, a: &Structure, cap: u128) -> Result<Vec<Vec<Element>>> {
        self.validate(a)?;
        let k = a.domain_size();
        let total_space = (k as u128).pow((self.free + self.exists) as u32);
        if total_space > cap {
            return Err(Error::CapExceeded {
                needed: total_space,
                cap,
            });
        }
        let free_space = k.pow(self.free as u32);
        let exists_space = k.pow(self.exists as u32);
        let mut out = Vec::new();
        let mut assignment = vec![0 as Element; self.free + self.exists];
        let mut free_part = vec![0 as Element; self.free];
        for fi in 0..free_space {
            decode_tuple(k, fi, &mut free_part);
            assignment[..self.free].copy_from_slice(&free_part);
            let mut witness = false;
            let mut exist_part = vec![0 as Element; self.exists];
            for ei in 0..exists_space {
                decode_tuple(k, ei, &mut exist_part);
                assignment[self.free..].copy_from_slice(&exist_part);
                let holds = self.eq.iter().all(|&(x, y)| assignment[x] == assignment[y])
                    && self.atoms.iter().all(|(name, vars)| {
                        let rel = a.relation(name).expect("validated");
                        let tuple: Vec<Element> = vars.iter().map(|&v| assignment[v]).collect();
                        rel.contains(&tuple)
                    });
                if holds {
                    witness = true;
                    break;
                }
            }
            if witness {
                out.push(free_part.clone());
            }
        }
        Ok(out)
    }
}

/// Builds the `n`-th pp-power of `a`: the structure on `A^n` whose relations
/// are defined by the given formulas, each with `arity * n` free variables
/// read component-major (the first `n` free variables are the coordinates of
/// the first power element).
pub fn pp_power(
    a: &Structure,
    n: usize,
    defs: &[(String, PPFormula)],
    cap: u128,
) -> Result<Structure> {
    if n == 0 {
        return Err(Error::invalid("pp power", "exponent must be at least 1"));
    }
    let k = a.domain_size();
    let domain = (k as u128).pow(n as u32);
    if domain > Element::MAX as u128 + 1 {
        return Err(Error::CapExceeded {
            needed: domain,
            cap: Element::MAX as u128 + 1,
        });
    }
    let domain = domain as usize;
    let mut relations = Vec::new();
    for (name, formula) in defs {
        if formula.free % n != 0 || formula.free == 0 {
            return Err(Error::invalid(
                "pp power",
                format!(
                    "relation `{name}` has {} free variables, not a positive multiple of {n}",
                    formula.free
                ),
            ));
        }
        let arity = formula.free / n;
        let rows = formula.evaluate(a, cap)?;
        let tuples: Vec<Vec<Element>> = rows
            .into_iter()
            .map(|row| {
                (0..arity)
                    .map(|j| encode_tuple(k, &row[j * n..(j + 1) * n]) as Element)
                    .collect()
            })
            .collect();
        relations.push((name.clone(), Relation::new(domain, arity, tuples)?));
    }
    Structure::new(domain, relations)
}

/// A constructed free-structure gadget: the structure itself, the two
/// witnessing homomorphisms when the target condition fails, or the
/// polymorphism witnessing the condition when it holds.
#[derive(Clone, Debug, Serialize)]
pub struct FreeStructureReport {
    pub structure: Structure,
    /// Homomorphism from the target structure into the gadget.
    pub h: Option<Homomorphism>,
    /// Homomorphism from the gadget onto the target structure.
    pub h_prime: Option<Homomorphism>,
    /// A polymorphism satisfying the condition, when one exists.
    pub condition_witness: Option<Operation>,
    /// Shift classes of the cycle gadget, encoded as element lists.
    pub classes: Option<Vec<Vec<Element>>>,
    /// Caller's claim that the supplied polymorphism set is exhaustive.
    pub polymorphism_enumeration_complete: bool,
}

fn encode_operation(op: &Operation) -> Element {
    encode_tuple(op.domain_size(), op.table()) as Element
}

fn validate_polymorphisms(
    construction: &'static str,
    a: &Structure,
    ops: &[Operation],
    arity: usize,
) -> Result<()> {
    for op in ops {
        if op.domain_size() != a.domain_size() {
            return Err(Error::DomainMismatch {
                expected: a.domain_size(),
                found: op.domain_size(),
            });
        }
        if op.arity() != arity {
            return Err(Error::ArityMismatch {
                expected: arity,
                found: op.arity(),
            });
        }
        for (name, rel) in a.relations() {
            if !preserves(op, rel)? {
                return Err(Error::Precondition {
                    construction,
                    requirement: format!(
                        "supplied operation does not preserve relation `{name}`"
                    ),
                });
            }
        }
    }
    Ok(())
}

/// Builds the gadget whose elements are binary operations on `A` and whose
/// edge relation links the two one-variable identifications of each ternary
/// polymorphism. When no supplied polymorphism collapses both
/// identifications to the second projection, the gadget is homomorphically
/// equivalent to the two-element structure with singletons and the
/// implication edge, and both witnessing homomorphisms are returned
/// verified.
pub fn free_structure_malcev(
    a: &Structure,
    pol3: &[Operation],
    enumeration_complete: bool,
) -> Result<FreeStructureReport> {
    const NAME: &str = "free_structure_malcev";
    let k = a.domain_size();
    validate_polymorphisms(NAME, a, pol3, 3)?;
    let table_len = k * k;
    let domain = (k as u128).pow(table_len as u32);
    if domain > Element::MAX as u128 + 1 {
        return Err(Error::CapExceeded {
            needed: domain,
            cap: Element::MAX as u128 + 1,
        });
    }
    let domain = domain as usize;

    let first_identified = VarMap::new(2, vec![0, 0, 1])?; // w(x,x,y)
    let last_identified = VarMap::new(2, vec![1, 0, 0])?; // w(y,x,x)
    let mut edge_tuples = Vec::new();
    let mut condition_witness = None;
    for w in pol3 {
        let f = w.minor(&first_identified)?;
        let g = w.minor(&last_identified)?;
        edge_tuples.push(vec![encode_operation(&f), encode_operation(&g)]);
        if condition_witness.is_none()
            && operation_satisfies(w, &MinorCondition::quasi_malcev())?
        {
            condition_witness = Some(w.clone());
        }
    }
    let pr22 = encode_operation(&make_projection(k, 2, 2)?);
    let pr21 = encode_operation(&make_projection(k, 2, 1)?);
    let structure = Structure::new(
        domain,
        vec![
            (
                "sing0".to_string(),
                Relation::new(domain, 1, vec![vec![pr22]])?,
            ),
            (
                "sing1".to_string(),
                Relation::new(domain, 1, vec![vec![pr21]])?,
            ),
            ("edge".to_string(), Relation::new(domain, 2, edge_tuples)?),
        ],
    )?;

    let (h, h_prime) = if condition_witness.is_none() {
        let b2 = catalog::b2();
        let h = Homomorphism::verified(&b2, &structure, vec![pr22, pr21])?;
        let back: Vec<Element> = (0..domain)
            .map(|e| if e as Element == pr22 { 0 } else { 1 })
            .collect();
        let h_prime = Homomorphism::verified(&structure, &b2, back)?;
        (Some(h), Some(h_prime))
    } else {
        (None, None)
    };

    Ok(FreeStructureReport {
        structure,
        h,
        h_prime,
        condition_witness,
        classes: None,
        polymorphism_enumeration_complete: enumeration_complete,
    })
}

fn is_prime(p: usize) -> bool {
    p >= 2 && (2..p).all(|d| d * d > p || !p.is_multiple_of(d))
}

/// Builds the gadget whose elements are `p`-ary operations on `A` and whose
/// edge relation links each supplied polymorphism to its cyclic shift. When
/// no supplied polymorphism is shift-invariant, the polymorphisms split into
/// disjoint shift classes and the gadget is homomorphically equivalent to
/// the directed `p`-cycle.
pub fn free_structure_cycle(
    a: &Structure,
    p: usize,
    polp: &[Operation],
    enumeration_complete: bool,
) -> Result<FreeStructureReport> {
    const NAME: &str = "free_structure_cycle";
    if !is_prime(p) {
        return Err(Error::invalid("cycle gadget", format!("{p} is not prime")));
    }
    let k = a.domain_size();
    validate_polymorphisms(NAME, a, polp, p)?;
    let table_len = k.pow(p as u32);
    let domain = (k as u128).pow(table_len as u32);
    if domain > Element::MAX as u128 + 1 {
        return Err(Error::CapExceeded {
            needed: domain,
            cap: Element::MAX as u128 + 1,
        });
    }
    let domain = domain as usize;

    let mut edge_tuples = Vec::new();
    let mut condition_witness = None;
    for f in polp {
        let g = f.cyclic_shift();
        edge_tuples.push(vec![encode_operation(f), encode_operation(&g)]);
        if condition_witness.is_none() && g == *f {
            condition_witness = Some(f.clone());
        }
    }
    let structure = Structure::new(
        domain,
        vec![("edge".to_string(), Relation::new(domain, 2, edge_tuples)?)],
    )?;

    let (h, h_prime, classes) = if condition_witness.is_none() {
        // orbit representatives: lexicographically least table per shift class
        let mut sorted: Vec<&Operation> = polp.iter().collect();
        sorted.sort();
        sorted.dedup();
        let mut class_of: BTreeMap<Element, usize> = BTreeMap::new();
        let mut classes: Vec<Vec<Element>> = vec![Vec::new(); p];
        let mut f0: Option<Operation> = None;
        for op in &sorted {
            let enc = encode_operation(op);
            if class_of.contains_key(&enc) {
                continue;
            }
            // this operation is the least of its orbit
            if f0.is_none() {
                f0 = Some((*op).clone());
            }
            let mut shifted = (*op).clone();
            for (i, class) in classes.iter_mut().enumerate() {
                let enc_i = encode_operation(&shifted);
                if class_of.insert(enc_i, i).is_some() {
                    return Err(Error::Precondition {
                        construction: NAME,
                        requirement: "shift classes are not disjoint".to_string(),
                    });
                }
                class.push(enc_i);
                shifted = shifted.cyclic_shift();
            }
        }
        for class in classes.iter_mut() {
            class.sort_unstable();
        }
        let cp = catalog::cycle(p);
        let map: Vec<Element> = (0..domain)
            .map(|e| {
                class_of
                    .get(&(e as Element))
                    .map(|&i| i as Element)
                    .unwrap_or(0)
            })
            .collect();
        let h_prime = Homomorphism::verified(&structure, &cp, map)?;
        let f0 = f0.ok_or_else(|| Error::Precondition {
            construction: NAME,
            requirement: "at least one polymorphism is required".to_string(),
        })?;
        let mut fwd = Vec::with_capacity(p);
        let mut cur = f0;
        for _ in 0..p {
            fwd.push(encode_operation(&cur));
            cur = cur.cyclic_shift();
        }
        let h = Homomorphism::verified(&cp, &structure, fwd)?;
        (Some(h), Some(h_prime), Some(classes))
    } else {
        (None, None, None)
    };

    Ok(FreeStructureReport {
        structure,
        h,
        h_prime,
        condition_witness,
        classes,
        polymorphism_enumeration_complete: enumeration_complete,
    })
}

/// Result of the one-element-versus-idempotence dichotomy checker.
#[derive(Clone, Debug)]
pub enum Dichotomy {
    /// The core is a single looped element: the one-element power set by
    /// full relations is homomorphically equivalent to the input.
    C1ConstructsA {
        power: Structure,
        a_to_power: Homomorphism,
        power_to_a: Homomorphism,
    },
    /// The pp-power with the two singleton relations over the core is
    /// homomorphically equivalent to the two-element singleton structure.
    AConstructsI2 {
        core: Structure,
        power: Structure,
        to_i2: Homomorphism,
        from_i2: Homomorphism,
    },
}

/// Decides which side of the dichotomy a structure falls on and returns the
/// branch with verified witnesses.
pub fn verify_dichotomy_c1_i2(a: &Structure) -> Result<Dichotomy> {
    let core = core_of(a)?;
    if core.core.domain_size() == 1 {
        let v = core.subset[0];
        let relations: Vec<(String, Relation)> = a
            .relations()
            .iter()
            .map(|(name, rel)| {
                Ok((
                    name.clone(),
                    Relation::new(1, rel.arity(), vec![vec![0; rel.arity()]])?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let power = Structure::new(1, relations)?;
        let a_to_power =
            Homomorphism::verified(a, &power, vec![0; a.domain_size()])?;
        let power_to_a = Homomorphism::verified(&power, a, vec![v]).map_err(|_| {
            Error::Precondition {
                construction: "verify_dichotomy_c1_i2",
                requirement:
                    "core is a single element but some relation is empty on it".to_string(),
            }
        })?;
        return Ok(Dichotomy::C1ConstructsA {
            power,
            a_to_power,
            power_to_a,
        });
    }
    let (expanded, names) = expand_with_names(&core.core)?;
    let formula = |element: usize| PPFormula {
        free: 1,
        exists: 0,
        atoms: vec![(names[element].clone(), vec![0])],
        eq: vec![],
    };
    let power = pp_power(
        &expanded,
        1,
        &[
            ("sing0".to_string(), formula(0)),
            ("sing1".to_string(), formula(1)),
        ],
        1 << 24,
    )?;
    let i2 = catalog::idempotence_witness(2);
    let to_map: Vec<Element> = (0..power.domain_size())
        .map(|e| if e == 0 { 0 } else { 1 })
        .collect();
    let to_i2 = Homomorphism::verified(&power, &i2, to_map)?;
    let from_i2 = Homomorphism::verified(&i2, &power, vec![0, 1])?;
    Ok(Dichotomy::AConstructsI2 {
        core: core.core,
        power,
        to_i2,
        from_i2,
    })
}

/// Builds the `n`-exponent power of the two-element singleton structure
/// whose relations pick out the unit vectors, together with the two
/// homomorphisms witnessing equivalence with the `n`-element singleton
/// structure.
pub fn collapse_idempotent_power(
    n: usize,
) -> Result<(Structure, Homomorphism, Homomorphism)> {
    if n < 2 {
        return Err(Error::invalid("collapse power", "n must be at least 2"));
    }
    let i2 = catalog::idempotence_witness(2);
    let defs: Vec<(String, PPFormula)> = (0..n)
        .map(|i| {
            let atoms = (0..n)
                .map(|j| {
                    (
                        if j == i { "sing1" } else { "sing0" }.to_string(),
                        vec![j],
                    )
                })
                .collect();
            (
                format!("sing{i}"),
                PPFormula {
                    free: n,
                    exists: 0,
                    atoms,
                    eq: vec![],
                },
            )
        })
        .collect();
    let power = pp_power(&i2, n, &defs, 1 << 24)?;
    let i_n = catalog::idempotence_witness(n);
    // unit vector with 1 in coordinate i, first coordinate most significant
    let unit = |i: usize| (1usize << (n - 1 - i)) as Element;
    let fwd: Vec<Element> = (0..n).map(unit).collect();
    let g = Homomorphism::verified(&i_n, &power, fwd)?;
    let mut back = vec![0 as Element; power.domain_size()];
    for (i, item) in back.iter_mut().enumerate() {
        *item = (0..n)
            .find(|&j| i == unit(j) as usize)
            .map(|j| j as Element)
            .unwrap_or(0);
    }
    let h = Homomorphism::verified(&power, &i_n, back)?;
    Ok((power, g, h))
}
