//! Explicit operation-building pipelines: symmetrization of majorities and
//! minorities, the rainbow switch, generalized minority and totally
//! symmetric chains, XOR-of-monomials normal forms, and the minor-preserving
//! map from idempotent Boolean operations into a clone carrying such chains.
//!
//! Every construction returns its output together with a term tree over the
//! named input operations. Replaying the tree through `compose`/projection
//! evaluation reproduces the output table, so outputs demonstrably lie in
//! the clone generated by the inputs.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::conditions::{first_failure, MinorCondition};
use crate::error::{Error, Result};
use crate::ops::{decode_tuple, make_projection, Element, Operation};

/// A term over named input operations and variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Term {
    Var { index: usize },
    Compose { head: String, args: Vec<Rc<Term>> },
}

impl Term {
    pub fn var(index: usize) -> Rc<Term> {
        Rc::new(Term::Var { index })
    }

    pub fn app(head: impl Into<String>, args: Vec<Rc<Term>>) -> Rc<Term> {
        Rc::new(Term::Compose {
            head: head.into(),
            args,
        })
    }
}

/// Substitutes argument terms for the variables of `term`. Shared subterms
/// are substituted once.
pub fn substitute(term: &Rc<Term>, args: &[Rc<Term>]) -> Rc<Term> {
    fn go(
        term: &Rc<Term>,
        args: &[Rc<Term>],
        memo: &mut HashMap<*const Term, Rc<Term>>,
    ) -> Rc<Term> {
        let key = Rc::as_ptr(term);
        if let Some(done) = memo.get(&key) {
            return done.clone();
        }
        let out = match &**term {
            Term::Var { index } => args[*index].clone(),
            Term::Compose { head, args: inner } => Term::app(
                head.clone(),
                inner.iter().map(|t| go(t, args, memo)).collect(),
            ),
        };
        memo.insert(key, out.clone());
        out
    }
    go(term, args, &mut HashMap::new())
}

/// Evaluates a term to an operation of the given arity over the inputs,
/// memoizing shared subterms.
pub fn evaluate_term(
    term: &Rc<Term>,
    inputs: &BTreeMap<String, Operation>,
    domain_size: usize,
    arity: usize,
) -> Result<Operation> {
    fn go(
        term: &Rc<Term>,
        inputs: &BTreeMap<String, Operation>,
        domain_size: usize,
        arity: usize,
        memo: &mut HashMap<*const Term, Operation>,
    ) -> Result<Operation> {
        let key = Rc::as_ptr(term);
        if let Some(done) = memo.get(&key) {
            return Ok(done.clone());
        }
        let out = match &**term {
            Term::Var { index } => {
                if *index >= arity {
                    return Err(Error::invalid(
                        "term",
                        format!("variable x{index} out of range for arity {arity}"),
                    ));
                }
                make_projection(domain_size, arity, index + 1)?
            }
            Term::Compose { head, args } => {
                let head_op = inputs.get(head).ok_or_else(|| {
                    Error::invalid("term", format!("unknown input operation `{head}`"))
                })?;
                let arg_ops = args
                    .iter()
                    .map(|t| go(t, inputs, domain_size, arity, memo))
                    .collect::<Result<Vec<_>>>()?;
                head_op.compose(&arg_ops)?
            }
        };
        memo.insert(key, out.clone());
        Ok(out)
    }
    go(term, inputs, domain_size, arity, &mut HashMap::new())
}

/// A constructed operation with its audit trail: the term over the named
/// inputs that produced it.
#[derive(Clone, Debug)]
pub struct Construction {
    pub output: Operation,
    pub term: Rc<Term>,
    pub inputs: BTreeMap<String, Operation>,
}

impl Construction {
    /// Re-evaluates the term tree; equals `output` for a valid construction.
    pub fn replay(&self) -> Result<Operation> {
        evaluate_term(
            &self.term,
            &self.inputs,
            self.output.domain_size(),
            self.output.arity(),
        )
    }

    pub fn verify_replay(&self) -> Result<()> {
        let replayed = self.replay()?;
        if replayed != self.output {
            return Err(Error::invalid(
                "construction",
                "term replay does not reproduce the output table",
            ));
        }
        Ok(())
    }
}

fn require_condition(
    construction: &'static str,
    role: &'static str,
    op: &Operation,
    condition: &MinorCondition,
) -> Result<()> {
    let sym = condition
        .symbols()
        .keys()
        .next()
        .expect("builtin conditions declare a symbol")
        .clone();
    let mut assignment = BTreeMap::new();
    assignment.insert(sym, op.clone());
    if let Some(fail) = first_failure(&assignment, condition)? {
        return Err(Error::ConditionViolated {
            construction,
            role,
            condition: condition.name().to_string(),
            identity: fail.identity,
            valuation: fail.valuation,
        });
    }
    Ok(())
}

fn require_idempotent(construction: &'static str, role: &'static str, op: &Operation) -> Result<()> {
    if !op.is_idempotent() {
        return Err(Error::ConditionViolated {
            construction,
            role,
            condition: "idempotency".to_string(),
            identity: "f(x,...,x) ≈ x".to_string(),
            valuation: vec![],
        });
    }
    Ok(())
}

fn require_same_domain(construction: &'static str, ops: &[&Operation]) -> Result<usize> {
    let k = ops[0].domain_size();
    for op in ops {
        if op.domain_size() != k {
            return Err(Error::Precondition {
                construction,
                requirement: format!(
                    "all inputs must share a domain; found sizes {} and {}",
                    k,
                    op.domain_size()
                ),
            });
        }
    }
    Ok(k)
}

fn require_arity(
    construction: &'static str,
    role: &'static str,
    op: &Operation,
    arity: usize,
) -> Result<()> {
    if op.arity() != arity {
        return Err(Error::Precondition {
            construction,
            requirement: format!("`{role}` must have arity {arity}, found {}", op.arity()),
        });
    }
    Ok(())
}

/// The two-layer symmetrization: a binary commutative idempotent operation
/// applied to the two orientation classes of the argument triple, each
/// collapsed by a ternary cyclic idempotent operation.
fn symmetrize_term() -> Rc<Term> {
    let v = [Term::var(0), Term::var(1), Term::var(2)];
    let rot = Term::app(
        "c3",
        vec![
            Term::app("m_prime", vec![v[0].clone(), v[1].clone(), v[2].clone()]),
            Term::app("m_prime", vec![v[1].clone(), v[2].clone(), v[0].clone()]),
            Term::app("m_prime", vec![v[2].clone(), v[0].clone(), v[1].clone()]),
        ],
    );
    let swapped = Term::app(
        "c3",
        vec![
            Term::app("m_prime", vec![v[0].clone(), v[2].clone(), v[1].clone()]),
            Term::app("m_prime", vec![v[2].clone(), v[1].clone(), v[0].clone()]),
            Term::app("m_prime", vec![v[1].clone(), v[0].clone(), v[2].clone()]),
        ],
    );
    Term::app("c2", vec![rot, swapped])
}

fn symmetrize(
    construction: &'static str,
    quasi: &MinorCondition,
    g: &Operation,
    c2: &Operation,
    c3: &Operation,
) -> Result<Construction> {
    let k = require_same_domain(construction, &[g, c2, c3])?;
    require_arity(construction, "g", g, 3)?;
    require_arity(construction, "c2", c2, 2)?;
    require_arity(construction, "c3", c3, 3)?;
    require_condition(construction, "g", g, quasi)?;
    require_idempotent(construction, "g", g)?;
    require_condition(construction, "c2", c2, &MinorCondition::cyclic(2)?)?;
    require_idempotent(construction, "c2", c2)?;
    require_condition(construction, "c3", c3, &MinorCondition::cyclic(3)?)?;
    require_idempotent(construction, "c3", c3)?;

    let term = symmetrize_term();
    let inputs: BTreeMap<String, Operation> = [
        ("m_prime".to_string(), g.clone()),
        ("c2".to_string(), c2.clone()),
        ("c3".to_string(), c3.clone()),
    ]
    .into();
    let output = evaluate_term(&term, &inputs, k, 3)?;

    require_condition(construction, "output", &output, &MinorCondition::fully_symmetric(3)?)?;
    require_condition(construction, "output", &output, quasi)?;
    require_idempotent(construction, "output", &output)?;
    Ok(Construction {
        output,
        term,
        inputs,
    })
}

/// Builds a fully symmetric majority from a majority `m_prime` and cyclic
/// idempotent operations `c2` (binary) and `c3` (ternary).
pub fn symmetrize_majority(
    m_prime: &Operation,
    c2: &Operation,
    c3: &Operation,
) -> Result<Construction> {
    symmetrize(
        "symmetrize_majority",
        &MinorCondition::quasi_majority(),
        m_prime,
        c2,
        c3,
    )
}

/// Builds a fully symmetric minority from a minority `m_prime` and cyclic
/// idempotent operations `c2` and `c3`.
pub fn symmetrize_minority(
    m_prime: &Operation,
    c2: &Operation,
    c3: &Operation,
) -> Result<Construction> {
    symmetrize(
        "symmetrize_minority",
        &MinorCondition::quasi_minority(),
        m_prime,
        c2,
        c3,
    )
}

/// Builds a minority by applying a majority to the cyclic rotations of a
/// Mal'cev operation: whenever two arguments coincide, at least two of the
/// rotated Mal'cev values equal the remaining argument, so the majority
/// returns it.
pub fn minority_from_malcev_majority(d: &Operation, majority: &Operation) -> Result<Construction> {
    const NAME: &str = "minority_from_malcev_majority";
    let k = require_same_domain(NAME, &[d, majority])?;
    require_arity(NAME, "d", d, 3)?;
    require_arity(NAME, "majority", majority, 3)?;
    require_condition(NAME, "d", d, &MinorCondition::quasi_malcev())?;
    require_idempotent(NAME, "d", d)?;
    require_condition(NAME, "majority", majority, &MinorCondition::quasi_majority())?;
    require_idempotent(NAME, "majority", majority)?;

    let v = [Term::var(0), Term::var(1), Term::var(2)];
    let term = Term::app(
        "majority",
        vec![
            Term::app("d", vec![v[0].clone(), v[1].clone(), v[2].clone()]),
            Term::app("d", vec![v[1].clone(), v[2].clone(), v[0].clone()]),
            Term::app("d", vec![v[2].clone(), v[0].clone(), v[1].clone()]),
        ],
    );
    let inputs: BTreeMap<String, Operation> = [
        ("d".to_string(), d.clone()),
        ("majority".to_string(), majority.clone()),
    ]
    .into();
    let output = evaluate_term(&term, &inputs, k, 3)?;
    require_condition(NAME, "output", &output, &MinorCondition::quasi_minority())?;
    require_idempotent(NAME, "output", &output)?;
    Ok(Construction {
        output,
        term,
        inputs,
    })
}

fn require_symmetric_ternary(
    construction: &'static str,
    role: &'static str,
    op: &Operation,
    quasi: &MinorCondition,
) -> Result<()> {
    if op.domain_size() != 3 {
        return Err(Error::Precondition {
            construction,
            requirement: format!(
                "`{role}` must live over a three-element domain, found {}",
                op.domain_size()
            ),
        });
    }
    require_arity(construction, role, op, 3)?;
    require_condition(construction, role, op, &MinorCondition::fully_symmetric(3)?)?;
    require_condition(construction, role, op, quasi)?;
    require_idempotent(construction, role, op)
}

/// The common value of a ternary operation over `E_3` on the six pairwise
/// distinct argument triples; errors when the six entries disagree.
pub fn rainbow_constant(op: &Operation) -> Result<Element> {
    if op.domain_size() != 3 || op.arity() != 3 {
        return Err(Error::Precondition {
            construction: "rainbow_constant",
            requirement: "a ternary operation over E_3 is required".to_string(),
        });
    }
    let rainbows: [[Element; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let values: Vec<Element> = rainbows.iter().map(|t| op.eval(t)).collect();
    if values.iter().any(|&v| v != values[0]) {
        return Err(Error::NonConstantRainbow { values });
    }
    Ok(values[0])
}

/// The common value of a fully symmetric ternary minority over `E_3` on
/// pairwise distinct inputs.
pub fn constant_of_symmetric(m3: &Operation) -> Result<Element> {
    require_symmetric_ternary(
        "constant_of_symmetric",
        "m3",
        m3,
        &MinorCondition::quasi_minority(),
    )?;
    rainbow_constant(m3)
}

fn switch_closed_form(c: Element) -> Operation {
    let plus = |a: Element, b: Element| ((a + b) % 3) as Element;
    Operation::from_fn(3, 3, |t| {
        let (x, y, z) = (t[0], t[1], t[2]);
        if x == plus(c, 2) && ((y, z) == (c, plus(c, 1)) || (y, z) == (plus(c, 1), c)) {
            plus(c, 1)
        } else if x == plus(c, 1) && ((y, z) == (c, plus(c, 2)) || (y, z) == (plus(c, 2), c)) {
            plus(c, 2)
        } else {
            x
        }
    })
    .expect("switch table is valid")
}

/// The switching operation `D(x,y,z) = m(m(x,y,z),y,z)` of a symmetric
/// minority with rainbow constant `c`: the first projection except on the
/// four rainbow patterns avoiding `c` in the first slot. The composed table
/// is checked against this closed form entry by entry.
pub fn d_switch(m3c: &Operation) -> Result<Construction> {
    require_symmetric_ternary("d_switch", "m3c", m3c, &MinorCondition::quasi_minority())?;
    let c = rainbow_constant(m3c)?;
    let v = [Term::var(0), Term::var(1), Term::var(2)];
    let term = Term::app(
        "m3c",
        vec![
            Term::app("m3c", vec![v[0].clone(), v[1].clone(), v[2].clone()]),
            v[1].clone(),
            v[2].clone(),
        ],
    );
    let inputs: BTreeMap<String, Operation> = [("m3c".to_string(), m3c.clone())].into();
    let output = evaluate_term(&term, &inputs, 3, 3)?;
    let expect = switch_closed_form(c);
    if output != expect {
        let mut t = vec![0 as Element; 3];
        for idx in 0..27 {
            decode_tuple(3, idx, &mut t);
            if output.table()[idx] != expect.table()[idx] {
                return Err(Error::ClosedFormMismatch {
                    input: t,
                    got: output.table()[idx],
                    expected: expect.table()[idx],
                });
            }
        }
    }
    Ok(Construction {
        output,
        term,
        inputs,
    })
}

/// Checks the chain semantics of a generalized minority over `E_3`: the
/// value is the unique element of odd multiplicity when one exists, and a
/// fixed constant on tuples where all three elements occur an odd number of
/// times. Returns that constant (for arity 3 this is the rainbow constant).
pub fn generalized_minority_constant(op: &Operation) -> Result<Element> {
    if op.domain_size() != 3 || op.arity().is_multiple_of(2) {
        return Err(Error::Precondition {
            construction: "generalized_minority_constant",
            requirement: "an odd-arity operation over E_3 is required".to_string(),
        });
    }
    let n = op.arity();
    let len = 3usize.pow(n as u32);
    let mut t = vec![0 as Element; n];
    let mut constant: Option<Element> = None;
    for idx in 0..len {
        decode_tuple(3, idx, &mut t);
        let mut counts = [0usize; 3];
        for &x in &t {
            counts[x as usize] += 1;
        }
        let odd: Vec<usize> = (0..3).filter(|&e| counts[e] % 2 == 1).collect();
        let got = op.table()[idx];
        match odd.len() {
            1 => {
                if got as usize != odd[0] {
                    return Err(Error::Precondition {
                        construction: "generalized_minority_constant",
                        requirement: format!(
                            "value at {t:?} should be the odd-multiplicity element {}, found {got}",
                            odd[0]
                        ),
                    });
                }
            }
            3 => match constant {
                None => constant = Some(got),
                Some(c) if c != got => {
                    return Err(Error::Precondition {
                        construction: "generalized_minority_constant",
                        requirement: format!(
                            "all-odd tuples disagree: {c} vs {got} at {t:?}"
                        ),
                    })
                }
                _ => {}
            },
            _ => unreachable!("odd arity forces an odd number of odd counts"),
        }
    }
    constant.ok_or_else(|| Error::Precondition {
        construction: "generalized_minority_constant",
        requirement: "arity too small to contain an all-odd tuple".to_string(),
    })
}

struct GmChainBuilder {
    m3c: Operation,
    d: Operation,
    d_term: Rc<Term>,
}

impl GmChainBuilder {
    fn new(m3c: &Operation) -> Result<Self> {
        let d = d_switch(m3c)?;
        Ok(GmChainBuilder {
            m3c: m3c.clone(),
            d: d.output,
            d_term: d.term,
        })
    }

    fn switch_term(&self, x: Rc<Term>, y: Rc<Term>, z: Rc<Term>) -> Rc<Term> {
        substitute(&self.d_term, &[x, y, z])
    }

    /// One inner layer of the recursion: collapses the first three arguments
    /// onto the value of the previous chain member on `(first, tail...)`.
    fn t_value(&self, prev: &Operation, a: Element, b: Element, c: Element, tail: &[Element]) -> Element {
        let mut args = Vec::with_capacity(prev.arity());
        args.push(a);
        args.extend_from_slice(tail);
        let base = prev.eval(&args);
        let d1 = self.d.eval(&[base, a, a]);
        let d2 = self.d.eval(&[base, a, b]);
        let d3 = self.d.eval(&[base, a, c]);
        self.m3c.eval(&[d1, d2, d3])
    }

    fn next_table(&self, prev: &Operation) -> Operation {
        let n = prev.arity() + 2;
        Operation::from_fn(3, n, |t| {
            let (x1, x2, x3) = (t[0], t[1], t[2]);
            let tail = &t[3..];
            let t1 = self.t_value(prev, x1, x2, x3, tail);
            let t2 = self.t_value(prev, x2, x1, x3, tail);
            let t3 = self.t_value(prev, x3, x1, x2, tail);
            self.m3c.eval(&[t1, t2, t3])
        })
        .expect("table over E_3")
    }

    fn t_term(&self, prev_term: &Rc<Term>, a: usize, b: usize, c: usize, n: usize) -> Rc<Term> {
        let mut base_args = vec![Term::var(a)];
        base_args.extend((3..n).map(Term::var));
        let base = substitute(prev_term, &base_args);
        let d1 = self.switch_term(base.clone(), Term::var(a), Term::var(a));
        let d2 = self.switch_term(base.clone(), Term::var(a), Term::var(b));
        let d3 = self.switch_term(base, Term::var(a), Term::var(c));
        Term::app("m3c", vec![d1, d2, d3])
    }

    fn next_term(&self, prev_term: &Rc<Term>, n: usize) -> Rc<Term> {
        let t1 = self.t_term(prev_term, 0, 1, 2, n);
        let t2 = self.t_term(prev_term, 1, 0, 2, n);
        let t3 = self.t_term(prev_term, 2, 0, 1, n);
        Term::app("m3c", vec![t1, t2, t3])
    }
}

fn gm_chain(
    m3c: &Operation,
    max_arity: usize,
    verify: bool,
) -> Result<Vec<Construction>> {
    const NAME: &str = "generalized_minority";
    require_symmetric_ternary(NAME, "m3c", m3c, &MinorCondition::quasi_minority())?;
    if max_arity < 3 || max_arity.is_multiple_of(2) {
        return Err(Error::invalid(
            "generalized minority arity",
            "must be odd and at least 3",
        ));
    }
    let builder = GmChainBuilder::new(m3c)?;
    let inputs: BTreeMap<String, Operation> = [("m3c".to_string(), m3c.clone())].into();
    let base_term = Term::app(
        "m3c",
        vec![Term::var(0), Term::var(1), Term::var(2)],
    );
    let mut out = vec![Construction {
        output: m3c.clone(),
        term: base_term,
        inputs: inputs.clone(),
    }];
    let c = rainbow_constant(m3c)?;
    let mut n = 3;
    while n + 2 <= max_arity {
        n += 2;
        let prev = &out.last().unwrap().output;
        let prev_term = &out.last().unwrap().term;
        let next = builder.next_table(prev);
        let next_term = builder.next_term(prev_term, n);
        if verify {
            require_condition(NAME, "output", &next, &MinorCondition::generalized_minority(n)?)?;
            let observed = generalized_minority_constant(&next)?;
            if observed != c {
                return Err(Error::Precondition {
                    construction: NAME,
                    requirement: format!(
                        "chain constant drifted: arity {n} returns {observed}, arity 3 returns {c}"
                    ),
                });
            }
            if n == 5 {
                verify_star_identities(&next, m3c)?;
            }
        }
        out.push(Construction {
            output: next,
            term: next_term,
            inputs: inputs.clone(),
        });
    }
    Ok(out)
}

/// The two pinched identities of the arity-5 generalized minority: collapsing
/// a repeated pair in the head positions reduces to the ternary minority, and
/// the doubled pattern `(x1,x2,x3,x1,x2)` returns `x3`.
fn verify_star_identities(m5: &Operation, m3c: &Operation) -> Result<()> {
    let mut v = vec![0 as Element; 4];
    for idx in 0..81 {
        decode_tuple(3, idx, &mut v);
        let (x1, x, x4, x5) = (v[0], v[1], v[2], v[3]);
        let lhs = m5.eval(&[x1, x, x, x4, x5]);
        let rhs = m3c.eval(&[x1, x4, x5]);
        if lhs != rhs {
            return Err(Error::ConditionViolated {
                construction: "generalized_minority",
                role: "output",
                condition: "pair-collapse identity".to_string(),
                identity: "m5(x1,x,x,x4,x5) ≈ m3(x1,x4,x5)".to_string(),
                valuation: vec![x1, x, x4, x5],
            });
        }
    }
    let mut v = vec![0 as Element; 3];
    for idx in 0..27 {
        decode_tuple(3, idx, &mut v);
        let (x1, x2, x3) = (v[0], v[1], v[2]);
        if m5.eval(&[x1, x2, x3, x1, x2]) != x3 {
            return Err(Error::ConditionViolated {
                construction: "generalized_minority",
                role: "output",
                condition: "doubled-pattern identity".to_string(),
                identity: "m5(x1,x2,x3,x1,x2) ≈ x3".to_string(),
                valuation: vec![x1, x2, x3],
            });
        }
    }
    Ok(())
}

/// Builds the generalized minority of odd arity `n` from a symmetric ternary
/// minority over `E_3`, verifying the generalized minority condition (and
/// for arity 5 the two pinched identities) exhaustively.
pub fn generalized_minority(m3c: &Operation, n: usize) -> Result<Construction> {
    let mut chain = gm_chain(m3c, n, true)?;
    Ok(chain.pop().expect("chain is nonempty"))
}

/// The whole chain of generalized minorities of odd arities `3..=max_arity`.
pub fn generalized_minority_chain(m3c: &Operation, max_arity: usize) -> Result<Vec<Construction>> {
    gm_chain(m3c, max_arity, true)
}

/// As [`generalized_minority_chain`] but skipping the per-element contract
/// verification. Unsafe in the contract sense: callers are responsible for
/// validating the chain, e.g. through [`SymmetricChainPair::new`].
pub fn generalized_minority_chain_unchecked(
    m3c: &Operation,
    max_arity: usize,
) -> Result<Vec<Construction>> {
    gm_chain(m3c, max_arity, false)
}

fn ts_chain(
    minority: &Operation,
    majority: &Operation,
    s2: &Operation,
    max_arity: usize,
    verify: bool,
) -> Result<Vec<Construction>> {
    const NAME: &str = "totally_symmetric_chain";
    require_symmetric_ternary(NAME, "minority", minority, &MinorCondition::quasi_minority())?;
    require_symmetric_ternary(NAME, "majority", majority, &MinorCondition::quasi_majority())?;
    require_arity(NAME, "s2", s2, 2)?;
    if s2.domain_size() != 3 {
        return Err(Error::Precondition {
            construction: NAME,
            requirement: "`s2` must live over a three-element domain".to_string(),
        });
    }
    require_condition(NAME, "s2", s2, &MinorCondition::cyclic(2)?)?;
    require_idempotent(NAME, "s2", s2)?;
    if max_arity < 2 {
        return Err(Error::invalid("chain bound", "must be at least 2"));
    }

    let c = rainbow_constant(majority)?;
    let inputs: BTreeMap<String, Operation> = [
        ("m".to_string(), minority.clone()),
        ("mc".to_string(), majority.clone()),
        ("s2".to_string(), s2.clone()),
    ]
    .into();
    let mut out = vec![Construction {
        output: s2.clone(),
        term: Term::app("s2", vec![Term::var(0), Term::var(1)]),
        inputs: inputs.clone(),
    }];
    // value on tuples covering the whole domain
    let full_value = minority.eval(&[
        s2.eval(&[0, c]),
        s2.eval(&[1, c]),
        s2.eval(&[2, c]),
    ]);

    for n in 3..=max_arity {
        let prev = out.last().unwrap().output.clone();
        let table = Operation::from_fn(3, n, |t| {
            let mc = majority.eval(&t[0..3]);
            let mut args = Vec::with_capacity(n - 1);
            let mut branch = |head: Element| {
                args.clear();
                args.push(head);
                args.push(mc);
                args.extend_from_slice(&t[3..]);
                prev.eval(&args)
            };
            let b1 = branch(t[0]);
            let b2 = branch(t[1]);
            let b3 = branch(t[2]);
            minority.eval(&[b1, b2, b3])
        })?;
        let prev_term = &out.last().unwrap().term;
        let mc_term = Term::app("mc", vec![Term::var(0), Term::var(1), Term::var(2)]);
        let branch_term = |head: usize| {
            let mut args = vec![Term::var(head), mc_term.clone()];
            args.extend((3..n).map(Term::var));
            substitute(prev_term, &args)
        };
        let term = Term::app("m", vec![branch_term(0), branch_term(1), branch_term(2)]);
        if verify {
            require_condition(NAME, "output", &table, &MinorCondition::totally_symmetric(n)?)?;
            verify_ts_properties(&table, s2, full_value)?;
        }
        out.push(Construction {
            output: table,
            term,
            inputs: inputs.clone(),
        });
    }
    Ok(out)
}

/// The two value laws of chain members: tuples with at most two distinct
/// values collapse to `s2` on those values, and tuples covering the whole
/// domain take a single fixed value.
fn verify_ts_properties(op: &Operation, s2: &Operation, full_value: Element) -> Result<()> {
    let n = op.arity();
    let len = 3usize.pow(n as u32);
    let mut t = vec![0 as Element; n];
    for idx in 0..len {
        decode_tuple(3, idx, &mut t);
        let mut values: Vec<Element> = t.clone();
        values.sort_unstable();
        values.dedup();
        let got = op.table()[idx];
        let want = match values.len() {
            1 => s2.eval(&[values[0], values[0]]),
            2 => s2.eval(&[values[0], values[1]]),
            _ => full_value,
        };
        if got != want {
            return Err(Error::ConditionViolated {
                construction: "totally_symmetric_chain",
                role: "output",
                condition: "value-set law".to_string(),
                identity: format!("expected {want} on value set {values:?}"),
                valuation: t,
            });
        }
    }
    Ok(())
}

/// Builds totally symmetric operations of arities `2..=max_arity` over `E_3`
/// from a symmetric minority, a symmetric majority and a binary cyclic
/// idempotent seed, verifying the totally symmetric condition and the two
/// value laws exhaustively for every member.
pub fn totally_symmetric_chain(
    minority: &Operation,
    majority: &Operation,
    s2: &Operation,
    max_arity: usize,
) -> Result<Vec<Construction>> {
    ts_chain(minority, majority, s2, max_arity, true)
}

/// As [`totally_symmetric_chain`] but skipping per-element verification;
/// contract-unsafe, see [`generalized_minority_chain_unchecked`].
pub fn totally_symmetric_chain_unchecked(
    minority: &Operation,
    majority: &Operation,
    s2: &Operation,
    max_arity: usize,
) -> Result<Vec<Construction>> {
    ts_chain(minority, majority, s2, max_arity, false)
}

/// The XOR-of-monomials form of an idempotent Boolean operation: an odd
/// number of distinct nonempty variable sets whose conjunctions sum to the
/// operation mod 2. Monomials are sorted sets of 1-based variable indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyRep {
    pub variables: usize,
    pub monomials: Vec<Vec<usize>>,
}

impl PolyRep {
    /// Evaluates the XOR-of-ANDs form back into an operation table.
    pub fn reconstruct(&self) -> Result<Operation> {
        let n = self.variables;
        Operation::from_fn(2, n, |t| {
            let mut acc = 0;
            for mono in &self.monomials {
                let mut prod = 1;
                for &v in mono {
                    prod &= t[v - 1];
                }
                acc ^= prod;
            }
            acc
        })
    }
}

/// Computes the unique XOR-of-distinct-nonempty-monomials representation of
/// an idempotent Boolean operation via the subset-parity transform over the
/// monomial lattice.
pub fn poly_rep(f: &Operation) -> Result<PolyRep> {
    if f.domain_size() != 2 {
        return Err(Error::Precondition {
            construction: "poly_rep",
            requirement: "a Boolean operation is required".to_string(),
        });
    }
    require_idempotent("poly_rep", "f", f)?;
    let n = f.arity();
    // reindex the table by variable mask (bit i = value of variable i+1)
    let mut coef = vec![0u8; 1 << n];
    for (mask, c) in coef.iter_mut().enumerate() {
        let tuple: Vec<Element> = (0..n)
            .map(|i| ((mask >> i) & 1) as Element)
            .collect();
        *c = f.eval(&tuple) as u8;
    }
    for i in 0..n {
        for mask in 0..1usize << n {
            if mask & (1 << i) != 0 {
                coef[mask] ^= coef[mask ^ (1 << i)];
            }
        }
    }
    let mut monomials: Vec<Vec<usize>> = Vec::new();
    if coef[0] != 0 {
        return Err(Error::Precondition {
            construction: "poly_rep",
            requirement: "idempotent operations have no constant monomial".to_string(),
        });
    }
    for (mask, &c) in coef.iter().enumerate().skip(1) {
        if c == 1 {
            monomials.push((0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).collect());
        }
    }
    monomials.sort();
    if monomials.len().is_multiple_of(2) {
        return Err(Error::Precondition {
            construction: "poly_rep",
            requirement: "idempotent operations have an odd number of monomials".to_string(),
        });
    }
    let rep = PolyRep {
        variables: n,
        monomials,
    };
    if rep.reconstruct()? != *f {
        return Err(Error::Precondition {
            construction: "poly_rep",
            requirement: "reconstruction mismatch".to_string(),
        });
    }
    Ok(rep)
}

/// Location of the first failing identification when two chains are not
/// compatible.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainIncompatibility {
    pub chain: &'static str,
    pub arity: usize,
    pub input: Vec<Element>,
    pub got: Element,
    pub expected: Element,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainCompatibility {
    pub compatible: bool,
    pub failure: Option<ChainIncompatibility>,
}

/// Exhaustively checks the identification laws of a chain pair: identifying
/// two variables of the totally symmetric member of arity `n` yields the
/// member of arity `n-1`, and identifying three variables of the generalized
/// minority of arity `2k+1` yields the member of arity `2k-1`.
pub fn verify_chain_compatibility(
    ts: &[Operation],
    gm: &[Operation],
) -> Result<ChainCompatibility> {
    for (i, pair) in ts.windows(2).enumerate() {
        let (small, big) = (&pair[0], &pair[1]);
        let n = big.arity();
        if small.arity() + 1 != n {
            return Err(Error::ChainInvalid {
                why: format!(
                    "totally symmetric chain arities must be consecutive, found {} then {}",
                    small.arity(),
                    n
                ),
            });
        }
        let _ = i;
        let k = big.domain_size();
        let len = k.pow((n - 1) as u32);
        let mut t = vec![0 as Element; n - 1];
        let mut args = vec![0 as Element; n];
        for idx in 0..len {
            decode_tuple(k, idx, &mut t);
            args[0] = t[0];
            args[1] = t[0];
            args[2..].copy_from_slice(&t[1..]);
            let got = big.eval(&args);
            let expected = small.eval(&t);
            if got != expected {
                return Ok(ChainCompatibility {
                    compatible: false,
                    failure: Some(ChainIncompatibility {
                        chain: "ts",
                        arity: n,
                        input: t,
                        got,
                        expected,
                    }),
                });
            }
        }
    }
    for pair in gm.windows(2) {
        let (small, big) = (&pair[0], &pair[1]);
        let n = big.arity();
        if small.arity() + 2 != n {
            return Err(Error::ChainInvalid {
                why: format!(
                    "generalized minority chain arities must step by two, found {} then {}",
                    small.arity(),
                    n
                ),
            });
        }
        let k = big.domain_size();
        let len = k.pow((n - 2) as u32);
        let mut t = vec![0 as Element; n - 2];
        let mut args = vec![0 as Element; n];
        for idx in 0..len {
            decode_tuple(k, idx, &mut t);
            args[0] = t[0];
            args[1] = t[0];
            args[2] = t[0];
            args[3..].copy_from_slice(&t[1..]);
            let got = big.eval(&args);
            let expected = small.eval(&t);
            if got != expected {
                return Ok(ChainCompatibility {
                    compatible: false,
                    failure: Some(ChainIncompatibility {
                        chain: "gm",
                        arity: n,
                        input: t,
                        got,
                        expected,
                    }),
                });
            }
        }
    }
    Ok(ChainCompatibility {
        compatible: true,
        failure: None,
    })
}

/// The canonical construction inputs and outputs over `E_3`, assembled from
/// the affine Mal'cev operation, the dual discriminator, binary minimum and
/// the symmetric majority with rainbow value 0.
#[derive(Clone, Debug)]
pub struct StandardPipeline {
    pub malcev: Operation,
    pub majority_seed: Operation,
    pub c2: Operation,
    pub c3: Operation,
    pub symmetric_majority: Operation,
    pub raw_minority: Operation,
    pub symmetric_minority: Operation,
}

pub fn standard_pipeline_e3() -> Result<StandardPipeline> {
    let malcev = crate::catalog::affine_malcev3();
    let majority_seed = crate::catalog::dual_discriminator3();
    let c2 = crate::catalog::min2_e3();
    let c3 = crate::catalog::symmetric_majority0();
    let symmetric_majority = symmetrize_majority(&majority_seed, &c2, &c3)?.output;
    let raw_minority = minority_from_malcev_majority(&malcev, &majority_seed)?.output;
    let symmetric_minority = symmetrize_minority(&raw_minority, &c2, &c3)?.output;
    Ok(StandardPipeline {
        malcev,
        majority_seed,
        c2,
        c3,
        symmetric_majority,
        raw_minority,
        symmetric_minority,
    })
}

/// A compatible pair of chains: totally symmetric operations of arities
/// `2..=N` and generalized minorities of odd arities `3..=M`, over a shared
/// domain, with the identification laws verified.
#[derive(Clone, Debug)]
pub struct SymmetricChainPair {
    domain_size: usize,
    ts: Vec<Operation>,
    gm: Vec<Operation>,
}

impl SymmetricChainPair {
    /// Validates and wraps explicit chains. `ts` must list arities `2,3,...`
    /// and `gm` odd arities `3,5,...`; every member is checked for its
    /// condition, idempotency, and the identification laws.
    pub fn new(ts: Vec<Operation>, gm: Vec<Operation>) -> Result<Self> {
        if ts.is_empty() || gm.is_empty() {
            return Err(Error::ChainInvalid {
                why: "both chains must be nonempty".to_string(),
            });
        }
        let k = ts[0].domain_size();
        for op in ts.iter().chain(gm.iter()) {
            if op.domain_size() != k {
                return Err(Error::ChainInvalid {
                    why: "chain members must share a domain".to_string(),
                });
            }
        }
        for (i, s) in ts.iter().enumerate() {
            let n = i + 2;
            if s.arity() != n {
                return Err(Error::ChainInvalid {
                    why: format!("ts chain member {i} must have arity {n}"),
                });
            }
            require_condition(
                "symmetric_chain_pair",
                "ts member",
                s,
                &MinorCondition::totally_symmetric(n)?,
            )?;
            require_idempotent("symmetric_chain_pair", "ts member", s)?;
        }
        for (j, m) in gm.iter().enumerate() {
            let n = 2 * j + 3;
            if m.arity() != n {
                return Err(Error::ChainInvalid {
                    why: format!("gm chain member {j} must have arity {n}"),
                });
            }
            require_condition(
                "symmetric_chain_pair",
                "gm member",
                m,
                &MinorCondition::generalized_minority(n)?,
            )?;
            require_idempotent("symmetric_chain_pair", "gm member", m)?;
        }
        let compat = verify_chain_compatibility(&ts, &gm)?;
        if let Some(fail) = compat.failure {
            return Err(Error::ChainInvalid {
                why: format!(
                    "identification law fails in the {} chain at arity {} on {:?}: got {}, expected {}",
                    fail.chain, fail.arity, fail.input, fail.got, fail.expected
                ),
            });
        }
        Ok(SymmetricChainPair {
            domain_size: k,
            ts,
            gm,
        })
    }

    /// The canonical chains over `E_3`, built from [`standard_pipeline_e3`].
    pub fn standard_e3(max_ts: usize, max_gm: usize) -> Result<Self> {
        let pipeline = standard_pipeline_e3()?;
        let gm = generalized_minority_chain_unchecked(&pipeline.symmetric_minority, max_gm)?
            .into_iter()
            .map(|c| c.output)
            .collect();
        let ts = totally_symmetric_chain_unchecked(
            &pipeline.symmetric_minority,
            &pipeline.symmetric_majority,
            &pipeline.c2,
            max_ts,
        )?
        .into_iter()
        .map(|c| c.output)
        .collect();
        SymmetricChainPair::new(ts, gm)
    }

    /// The Boolean chains: conjunctions of all variables and odd-arity
    /// parity sums.
    pub fn boolean(max_ts: usize, max_gm: usize) -> Result<Self> {
        let ts = (2..=max_ts)
            .map(|n| Operation::from_fn(2, n, |t| t.iter().fold(1, |a, &b| a & b)))
            .collect::<Result<Vec<_>>>()?;
        let gm = (1..=(max_gm.saturating_sub(1)) / 2)
            .map(|j| Operation::from_fn(2, 2 * j + 1, |t| t.iter().fold(0, |a, &b| a ^ b)))
            .collect::<Result<Vec<_>>>()?;
        SymmetricChainPair::new(ts, gm)
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn ts_member(&self, arity: usize) -> Option<&Operation> {
        arity.checked_sub(2).and_then(|i| self.ts.get(i))
    }

    pub fn gm_member(&self, arity: usize) -> Option<&Operation> {
        if arity < 3 || arity.is_multiple_of(2) {
            return None;
        }
        self.gm.get((arity - 3) / 2)
    }

    pub fn ts_chain(&self) -> &[Operation] {
        &self.ts
    }

    pub fn gm_chain(&self) -> &[Operation] {
        &self.gm
    }

    pub fn max_ts_arity(&self) -> usize {
        self.ts.len() + 1
    }

    pub fn max_gm_arity(&self) -> usize {
        2 * self.gm.len() + 1
    }
}

/// Applies the minor-preserving map to an idempotent Boolean operation: each
/// monomial of the XOR normal form becomes a totally symmetric operation on
/// its variable set, and the odd list of monomial values is combined by the
/// generalized minority of matching arity. Singleton monomials and a single
/// monomial use the identity convention.
pub fn xi(f: &Operation, chains: &SymmetricChainPair) -> Result<Construction> {
    let rep = poly_rep(f)?;
    let n = rep.variables;
    let ell = rep.monomials.len();
    let mut inputs: BTreeMap<String, Operation> = BTreeMap::new();
    let mut monomial_terms = Vec::with_capacity(ell);
    for mono in &rep.monomials {
        let w = mono.len();
        let vars: Vec<Rc<Term>> = mono.iter().map(|&v| Term::var(v - 1)).collect();
        if w == 1 {
            monomial_terms.push(vars.into_iter().next().unwrap());
        } else {
            let s = chains.ts_member(w).ok_or_else(|| Error::ChainInvalid {
                why: format!(
                    "totally symmetric chain too short: need arity {w}, have {}",
                    chains.max_ts_arity()
                ),
            })?;
            let name = format!("s{w}");
            inputs.insert(name.clone(), s.clone());
            monomial_terms.push(Term::app(name, vars));
        }
    }
    let term = if ell == 1 {
        monomial_terms.into_iter().next().unwrap()
    } else {
        let m = chains.gm_member(ell).ok_or_else(|| Error::ChainInvalid {
            why: format!(
                "generalized minority chain too short: need arity {ell}, have {}",
                chains.max_gm_arity()
            ),
        })?;
        let name = format!("m{ell}");
        inputs.insert(name.clone(), m.clone());
        Term::app(name, monomial_terms)
    };
    let output = evaluate_term(&term, &inputs, chains.domain_size(), n)?;
    Ok(Construction {
        output,
        term,
        inputs,
    })
}
