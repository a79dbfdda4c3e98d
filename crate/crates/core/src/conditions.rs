//! Minor identities and minor conditions: representation, exhaustive
//! satisfaction checking, and witness search over explicit operation sets or
//! symmetry-restricted polymorphism enumerations.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ops::{decode_tuple, CandidateSpace, Element, Operation, Symmetry, VarMap};
use crate::rel::{preserves, Structure};

/// One side of a minor identity: a function symbol applied to shared
/// variables through a variable map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolApplication {
    pub symbol: String,
    pub map: VarMap,
}

/// A minor identity `f_sigma ≈ g_pi`: both sides target the same shared
/// variable count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinorIdentity {
    lhs: SymbolApplication,
    rhs: SymbolApplication,
}

impl MinorIdentity {
    pub fn new(lhs: SymbolApplication, rhs: SymbolApplication) -> Result<Self> {
        if lhs.map.target_arity() != rhs.map.target_arity() {
            return Err(Error::invalid(
                "minor identity",
                "both sides must share the same variable count",
            ));
        }
        Ok(MinorIdentity { lhs, rhs })
    }

    fn of_maps(sym_l: &str, map_l: Vec<usize>, sym_r: &str, map_r: Vec<usize>) -> Self {
        let r = map_l
            .iter()
            .chain(map_r.iter())
            .copied()
            .max()
            .map_or(1, |m| m + 1);
        MinorIdentity {
            lhs: SymbolApplication {
                symbol: sym_l.to_string(),
                map: VarMap::new(r, map_l).expect("entries in range"),
            },
            rhs: SymbolApplication {
                symbol: sym_r.to_string(),
                map: VarMap::new(r, map_r).expect("entries in range"),
            },
        }
    }

    pub fn lhs(&self) -> &SymbolApplication {
        &self.lhs
    }

    pub fn rhs(&self) -> &SymbolApplication {
        &self.rhs
    }

    pub fn variable_count(&self) -> usize {
        self.lhs.map.target_arity()
    }
}

impl fmt::Display for MinorIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |s: &SymbolApplication| {
            let vars: Vec<String> = s.map.entries().iter().map(|v| format!("x{v}")).collect();
            format!("{}({})", s.symbol, vars.join(","))
        };
        write!(f, "{} ≈ {}", side(&self.lhs), side(&self.rhs))
    }
}

/// A finite set of minor identities over declared function symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinorCondition {
    name: String,
    symbols: BTreeMap<String, usize>,
    identities: Vec<MinorIdentity>,
}

impl MinorCondition {
    pub fn new(
        name: impl Into<String>,
        symbols: BTreeMap<String, usize>,
        identities: Vec<MinorIdentity>,
    ) -> Result<Self> {
        for id in &identities {
            for side in [&id.lhs, &id.rhs] {
                match symbols.get(&side.symbol) {
                    None => {
                        return Err(Error::invalid(
                            "minor condition",
                            format!("identity references undeclared symbol `{}`", side.symbol),
                        ))
                    }
                    Some(&arity) if arity != side.map.source_arity() => {
                        return Err(Error::ArityMismatch {
                            expected: arity,
                            found: side.map.source_arity(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(MinorCondition {
            name: name.into(),
            symbols,
            identities,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbols(&self) -> &BTreeMap<String, usize> {
        &self.symbols
    }

    pub fn identities(&self) -> &[MinorIdentity] {
        &self.identities
    }

    fn single_symbol(name: &str, arity: usize, identities: Vec<MinorIdentity>) -> Self {
        let mut symbols = BTreeMap::new();
        let sym = identities
            .first()
            .map(|i| i.lhs.symbol.clone())
            .unwrap_or_else(|| "f".to_string());
        symbols.insert(sym, arity);
        MinorCondition::new(name, symbols, identities).expect("builtin is well formed")
    }

    /// The cyclic identity of arity `p`: `c(x1,...,xp) ≈ c(x2,...,xp,x1)`.
    pub fn cyclic(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::invalid("cyclic condition", "p must be at least 2"));
        }
        let rot: Vec<usize> = (0..p).map(|i| (i + 1) % p).collect();
        Ok(Self::single_symbol(
            format!("sigma_{p}").as_str(),
            p,
            vec![MinorIdentity::of_maps("c", (0..p).collect(), "c", rot)],
        ))
    }

    /// `m(x,y,y) ≈ m(y,x,y) ≈ m(y,y,x) ≈ m(x,x,x)`.
    pub fn quasi_minority() -> Self {
        Self::single_symbol(
            "quasi_minority",
            3,
            chain("m", vec![
                vec![0, 1, 1],
                vec![1, 0, 1],
                vec![1, 1, 0],
                vec![0, 0, 0],
            ]),
        )
    }

    /// `m(x,y,y) ≈ m(y,y,x) ≈ m(x,x,x)`.
    pub fn quasi_malcev() -> Self {
        Self::single_symbol(
            "quasi_malcev",
            3,
            chain("m", vec![vec![0, 1, 1], vec![1, 1, 0], vec![0, 0, 0]]),
        )
    }

    /// `m(x,y,y) ≈ m(y,x,y) ≈ m(y,y,x) ≈ m(y,y,y)`.
    pub fn quasi_majority() -> Self {
        Self::single_symbol(
            "quasi_majority",
            3,
            chain("m", vec![
                vec![0, 1, 1],
                vec![1, 0, 1],
                vec![1, 1, 0],
                vec![1, 1, 1],
            ]),
        )
    }

    /// The symmetric condition of arity `n`, generated by adjacent
    /// transpositions. Satisfaction is equivalent to requiring invariance
    /// under every permutation, since adjacent transpositions generate the
    /// whole permutation group; the test suite checks this equivalence
    /// against the fully expanded condition.
    pub fn fully_symmetric(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("symmetric condition", "n must be at least 2"));
        }
        Ok(Self::single_symbol(
            format!("fs_{n}").as_str(),
            n,
            transposition_identities("f", n),
        ))
    }

    /// The totally symmetric condition of arity `n`: the value depends only
    /// on the set of arguments. Generated by adjacent transpositions plus a
    /// single multiset trade `f(x0,x0,x2,...) ≈ f(x0,x2,x2,...)`; repeated
    /// trades connect all same-support argument multisets, so satisfaction
    /// matches the full condition (checked by the test oracle).
    pub fn totally_symmetric(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(
                "totally symmetric condition",
                "n must be at least 2",
            ));
        }
        let mut identities = transposition_identities("f", n);
        if n >= 3 {
            // f(x0,x0,x2,x3,...) ≈ f(x0,x2,x2,x3,...)
            let mut lhs: Vec<usize> = (0..n).collect();
            lhs[1] = 0;
            let mut rhs: Vec<usize> = (0..n).collect();
            rhs[1] = 2;
            identities.push(MinorIdentity::of_maps("f", lhs, "f", rhs));
        }
        Ok(Self::single_symbol(
            format!("ts_{n}").as_str(),
            n,
            identities,
        ))
    }

    /// The generalized minority condition of odd arity `n`: the symmetric
    /// condition plus `f(x,x,x3,...,xn) ≈ f(y,y,x3,...,xn)`.
    pub fn generalized_minority(n: usize) -> Result<Self> {
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::invalid(
                "generalized minority condition",
                "n must be odd and at least 3",
            ));
        }
        let mut identities = transposition_identities("f", n);
        let lhs: Vec<usize> = std::iter::once(0)
            .chain(std::iter::once(0))
            .chain(2..n)
            .collect();
        let rhs: Vec<usize> = std::iter::once(1)
            .chain(std::iter::once(1))
            .chain(2..n)
            .collect();
        identities.push(MinorIdentity::of_maps("f", lhs, "f", rhs));
        Ok(Self::single_symbol(
            format!("gm_{n}").as_str(),
            n,
            identities,
        ))
    }

    /// The weak near-unanimity condition of arity `n`.
    pub fn weak_near_unanimity(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid("wnu condition", "n must be at least 3"));
        }
        let term = |pos: usize| -> Vec<usize> {
            (0..n).map(|j| if j == pos { 1 } else { 0 }).collect()
        };
        let identities = (0..n - 1)
            .map(|i| MinorIdentity::of_maps("w", term(n - 1 - i), "w", term(n - 2 - i)))
            .collect();
        Ok(Self::single_symbol(
            format!("wnu_{n}").as_str(),
            n,
            identities,
        ))
    }

    /// The quasi near-unanimity condition of arity `n`: the weak
    /// near-unanimity chain extended by `≈ w(x,...,x)`.
    pub fn quasi_near_unanimity(n: usize) -> Result<Self> {
        let mut base = Self::weak_near_unanimity(n)?;
        let all_x: Vec<usize> = vec![0; n];
        let first: Vec<usize> = (0..n).map(|j| if j == 0 { 1 } else { 0 }).collect();
        base.identities
            .push(MinorIdentity::of_maps("w", first, "w", all_x));
        base.name = format!("qnu_{n}");
        Ok(base)
    }

    /// Resolves a builtin condition by CLI shorthand name.
    pub fn builtin(name: &str, param: Option<usize>) -> Result<Self> {
        let need = |what: &'static str| -> Result<usize> {
            param.ok_or_else(|| Error::invalid("builtin condition", format!("{what} required")))
        };
        match name {
            "sigma_p" => Self::cyclic(need("--p")?),
            "quasi_minority" => Ok(Self::quasi_minority()),
            "quasi_malcev" => Ok(Self::quasi_malcev()),
            "quasi_majority" => Ok(Self::quasi_majority()),
            "fs" => Self::fully_symmetric(need("--n")?),
            "ts" => Self::totally_symmetric(need("--n")?),
            "gm" => Self::generalized_minority(need("--n")?),
            "wnu" => Self::weak_near_unanimity(need("--n")?),
            "qnu" => Self::quasi_near_unanimity(need("--n")?),
            other => Err(Error::invalid(
                "builtin condition",
                format!("unknown name `{other}`"),
            )),
        }
    }
}

fn chain(symbol: &str, terms: Vec<Vec<usize>>) -> Vec<MinorIdentity> {
    terms
        .windows(2)
        .map(|w| MinorIdentity::of_maps(symbol, w[0].clone(), symbol, w[1].clone()))
        .collect()
}

fn transposition_identities(symbol: &str, n: usize) -> Vec<MinorIdentity> {
    (0..n - 1)
        .map(|i| {
            let mut swapped: Vec<usize> = (0..n).collect();
            swapped.swap(i, i + 1);
            MinorIdentity::of_maps(symbol, (0..n).collect(), symbol, swapped)
        })
        .collect()
}

/// Detail of a failed identity check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityFailure {
    pub identity_index: usize,
    pub identity: String,
    pub valuation: Vec<Element>,
    pub lhs_value: Element,
    pub rhs_value: Element,
}

fn assignment_domain(assignment: &BTreeMap<String, Operation>) -> Result<usize> {
    let mut k = None;
    for op in assignment.values() {
        match k {
            None => k = Some(op.domain_size()),
            Some(k0) if k0 != op.domain_size() => {
                return Err(Error::DomainMismatch {
                    expected: k0,
                    found: op.domain_size(),
                })
            }
            _ => {}
        }
    }
    k.ok_or_else(|| Error::invalid("assignment", "no operations given"))
}

/// Finds the first identity and valuation violated by the assignment, or
/// `None` when the condition is satisfied. Checks are exhaustive over all
/// `k^r` valuations of each identity's shared variables.
pub fn first_failure(
    assignment: &BTreeMap<String, Operation>,
    condition: &MinorCondition,
) -> Result<Option<IdentityFailure>> {
    let k = assignment_domain(assignment)?;
    for (sym, &arity) in condition.symbols() {
        let op = assignment.get(sym).ok_or_else(|| {
            Error::invalid("assignment", format!("symbol `{sym}` not assigned"))
        })?;
        if op.arity() != arity {
            return Err(Error::ArityMismatch {
                expected: arity,
                found: op.arity(),
            });
        }
    }
    for (idx, identity) in condition.identities().iter().enumerate() {
        let r = identity.variable_count();
        let lhs_op = &assignment[&identity.lhs.symbol];
        let rhs_op = &assignment[&identity.rhs.symbol];
        let len = k.pow(r as u32);
        let mut valuation = vec![0 as Element; r];
        let mut lhs_args = vec![0 as Element; lhs_op.arity()];
        let mut rhs_args = vec![0 as Element; rhs_op.arity()];
        for v in 0..len {
            decode_tuple(k, v, &mut valuation);
            for (slot, &i) in lhs_args.iter_mut().zip(identity.lhs.map.entries()) {
                *slot = valuation[i];
            }
            for (slot, &i) in rhs_args.iter_mut().zip(identity.rhs.map.entries()) {
                *slot = valuation[i];
            }
            let l = lhs_op.eval(&lhs_args);
            let rv = rhs_op.eval(&rhs_args);
            if l != rv {
                return Ok(Some(IdentityFailure {
                    identity_index: idx,
                    identity: identity.to_string(),
                    valuation,
                    lhs_value: l,
                    rhs_value: rv,
                }));
            }
        }
    }
    Ok(None)
}

/// True iff every identity of the condition holds under every valuation.
pub fn satisfies(
    assignment: &BTreeMap<String, Operation>,
    condition: &MinorCondition,
) -> Result<bool> {
    Ok(first_failure(assignment, condition)?.is_none())
}

/// Convenience for single-symbol conditions.
pub fn operation_satisfies(op: &Operation, condition: &MinorCondition) -> Result<bool> {
    let mut assignment = BTreeMap::new();
    let sym = condition
        .symbols()
        .keys()
        .next()
        .ok_or_else(|| Error::invalid("condition", "no symbols declared"))?;
    if condition.symbols().len() != 1 {
        return Err(Error::invalid(
            "condition",
            "operation_satisfies needs a single-symbol condition",
        ));
    }
    assignment.insert(sym.clone(), op.clone());
    satisfies(&assignment, condition)
}

/// Candidate source for witness search.
pub enum WitnessSource<'a> {
    /// An explicit operation pool; symbols draw candidates by arity.
    Operations(&'a [Operation]),
    /// Per-symbol enumeration of the structure's polymorphisms, restricted
    /// to the given symmetry class.
    Polymorphisms {
        structure: &'a Structure,
        symmetry: Symmetry,
    },
}

/// Outcome of a witness search. `definitive` reports whether the whole
/// candidate space was covered, so a `None` assignment with `definitive`
/// set is a proof of unsatisfiability over the source.
#[derive(Clone, Debug)]
pub struct WitnessOutcome {
    pub assignment: Option<BTreeMap<String, Operation>>,
    pub definitive: bool,
    pub candidates_tried: u64,
}

/// Searches the source for an assignment satisfying the condition. The
/// budget bounds the number of candidate operations scanned; exceeding it
/// yields a non-definitive `None`.
pub fn find_witness(
    source: WitnessSource,
    condition: &MinorCondition,
    budget: u64,
) -> Result<WitnessOutcome> {
    let mut tried = 0u64;
    let mut covered = true;

    // Per-symbol candidate pools.
    let mut pools: Vec<(String, Vec<Operation>)> = Vec::new();
    for (sym, &arity) in condition.symbols() {
        let pool: Vec<Operation> = match &source {
            WitnessSource::Operations(ops) => ops
                .iter()
                .filter(|o| o.arity() == arity)
                .cloned()
                .collect(),
            WitnessSource::Polymorphisms {
                structure,
                symmetry,
            } => {
                let k = structure.domain_size();
                let space = CandidateSpace::new(k, arity, *symmetry)?;
                let count = space.assignment_count();
                let scan = count.min((budget.saturating_sub(tried)) as u128);
                if scan < count {
                    covered = false;
                }
                let rels = structure.relation_list();
                let found: Vec<Operation> = (0..scan as u64)
                    .into_par_iter()
                    .filter_map(|i| {
                        let op = space.operation(i as u128);
                        rels.iter()
                            .all(|r| preserves(&op, r).expect("same domain"))
                            .then_some(op)
                    })
                    .collect();
                tried += scan as u64;
                found
            }
        };
        pools.push((sym.clone(), pool));
    }

    if pools.iter().any(|(_, p)| p.is_empty()) {
        return Ok(WitnessOutcome {
            assignment: None,
            definitive: covered,
            candidates_tried: tried,
        });
    }

    // Single-symbol fast path: parallel scan, first match by pool order.
    if pools.len() == 1 {
        let (sym, pool) = &pools[0];
        let limit = pool.len().min(budget.saturating_sub(tried) as usize);
        if limit < pool.len() {
            covered = false;
        }
        let hit = pool[..limit].par_iter().find_first(|op| {
            let mut a = BTreeMap::new();
            a.insert(sym.clone(), (*op).clone());
            satisfies(&a, condition).expect("arities match")
        });
        tried += limit as u64;
        return Ok(WitnessOutcome {
            assignment: hit.map(|op| {
                let mut a = BTreeMap::new();
                a.insert(sym.clone(), op.clone());
                a
            }),
            definitive: covered,
            candidates_tried: tried,
        });
    }

    // General case: odometer over the per-symbol pools.
    let mut pick = vec![0usize; pools.len()];
    loop {
        if tried >= budget {
            return Ok(WitnessOutcome {
                assignment: None,
                definitive: false,
                candidates_tried: tried,
            });
        }
        tried += 1;
        let assignment: BTreeMap<String, Operation> = pools
            .iter()
            .zip(&pick)
            .map(|((sym, pool), &i)| (sym.clone(), pool[i].clone()))
            .collect();
        if satisfies(&assignment, condition)? {
            return Ok(WitnessOutcome {
                assignment: Some(assignment),
                definitive: covered,
                candidates_tried: tried,
            });
        }
        let mut q = pick.len();
        loop {
            if q == 0 {
                return Ok(WitnessOutcome {
                    assignment: None,
                    definitive: covered,
                    candidates_tried: tried,
                });
            }
            q -= 1;
            pick[q] += 1;
            if pick[q] < pools[q].1.len() {
                break;
            }
            pick[q] = 0;
        }
    }
}

// ---------------------------------------------------------------------------
// JSON schema: {"symbols":{"f":3},"identities":[{"lhs":["f",[0,0,1]],...}]}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RawIdentity {
    lhs: (String, Vec<usize>),
    rhs: (String, Vec<usize>),
}

#[derive(Serialize, Deserialize)]
struct RawCondition {
    #[serde(default)]
    name: Option<String>,
    symbols: BTreeMap<String, usize>,
    identities: Vec<RawIdentity>,
}

impl Serialize for MinorCondition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = RawCondition {
            name: Some(self.name.clone()),
            symbols: self.symbols.clone(),
            identities: self
                .identities
                .iter()
                .map(|id| RawIdentity {
                    lhs: (id.lhs.symbol.clone(), id.lhs.map.entries().to_vec()),
                    rhs: (id.rhs.symbol.clone(), id.rhs.map.entries().to_vec()),
                })
                .collect(),
        };
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MinorCondition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawCondition::deserialize(deserializer)?;
        let identities = raw
            .identities
            .into_iter()
            .map(|id| MinorIdentity::of_maps(&id.lhs.0, id.lhs.1, &id.rhs.0, id.rhs.1))
            .collect();
        MinorCondition::new(
            raw.name.unwrap_or_else(|| "condition".to_string()),
            raw.symbols,
            identities,
        )
        .map_err(D::Error::custom)
    }
}
