//! Named verifiers. Each runs an exhaustive (or budget-bounded) check and
//! returns a machine-readable verdict: `fail` always carries a
//! counterexample, `unknown` always carries the exhausted budget, and every
//! verdict is deterministic and independent of the seed (the seed only
//! reorders randomized instance sampling).

use std::time::Instant;

use anyhow::{bail, Result};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::{json, Value};

use clonelab_core::catalog;
use clonelab_core::conditions::{operation_satisfies, MinorCondition};
use clonelab_core::constructions::{
    generalized_minority, rainbow_constant, standard_pipeline_e3, totally_symmetric_chain,
    verify_chain_compatibility, xi, SymmetricChainPair,
};
use clonelab_core::error::Error as CoreError;
use clonelab_core::ops::{
    generate_clone_search, tuples, Element, Operation, Symmetry, VarMap,
};
use clonelab_core::ppcon::{
    collapse_idempotent_power, free_structure_cycle, free_structure_malcev, hom_equivalent,
    verify_dichotomy_c1_i2, Dichotomy,
};
use clonelab_core::rel::{
    block_group_structure, blocks, essential_tuples, inv_closure, is_critical, is_essential,
    is_n_decomposable, pol, pol_symmetric, Criticality, Relation,
};

use crate::io::Loader;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Unknown,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifierResult {
    pub name: String,
    pub verdict: Verdict,
    pub details: Value,
    pub elapsed_ms: u64,
}

impl VerifierResult {
    pub fn exit_code(&self) -> u8 {
        match self.verdict {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Unknown => 2,
        }
    }
}

#[derive(Clone, Default)]
pub struct VerifyParams {
    pub p: Option<usize>,
    pub n: Option<usize>,
    pub fixture: Option<String>,
    pub budget: Option<u64>,
    pub seed: u64,
    pub generators: Option<Vec<Operation>>,
}

pub const VERIFIER_NAMES: &[&str] = &[
    "remark-cycles",
    "star-identities",
    "ts-properties",
    "xi-homomorphism",
    "splitting-malcev",
    "splitting-cycles",
    "collapse-idemp",
    "dichotomy",
    "baker-pixley-sample",
    "block-structure",
    "majority-search",
];

pub const DEFAULT_SCAN_CAP: u64 = 10_000_000;
pub const DEFAULT_TABLE_BUDGET: u64 = 1_000_000;

/// Runs a named verifier. Contract violations surface as `fail` verdicts
/// with structured counterexamples; resource exhaustion surfaces as
/// `unknown` with the budget; unknown names or malformed parameters are
/// errors.
pub fn run_verifier(name: &str, params: &VerifyParams, loader: &Loader) -> Result<VerifierResult> {
    let start = Instant::now();
    let out = match name {
        "remark-cycles" => remark_cycles(params),
        "star-identities" => star_identities(),
        "ts-properties" => ts_properties(params),
        "xi-homomorphism" => xi_homomorphism(),
        "splitting-malcev" => splitting_malcev(params, loader),
        "splitting-cycles" => splitting_cycles(params, loader),
        "collapse-idemp" => collapse_idemp(params),
        "dichotomy" => dichotomy(params, loader),
        "baker-pixley-sample" => baker_pixley_sample(params),
        "block-structure" => block_structure(),
        "majority-search" => majority_search(params),
        other => bail!("unknown verifier `{other}`"),
    };
    let (verdict, details) = out?;
    Ok(VerifierResult {
        name: name.to_string(),
        verdict,
        details,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

type Outcome = Result<(Verdict, Value)>;

fn fail_from_core(e: CoreError) -> (Verdict, Value) {
    match e {
        CoreError::CapExceeded { needed, cap } => (
            Verdict::Unknown,
            json!({"budget": {"needed": needed.to_string(), "cap": cap.to_string()}}),
        ),
        other => (
            Verdict::Fail,
            json!({"counterexample": other.to_string()}),
        ),
    }
}

/// No cyclic polymorphism of the directed p-cycle of its own arity: the
/// symmetry-restricted candidate space is scanned exhaustively.
fn remark_cycles(params: &VerifyParams) -> Outcome {
    let p = params.p.unwrap_or(3);
    if !(2..=3).contains(&p) {
        bail!("remark-cycles supports p = 2 or 3 at desk scale");
    }
    let cap = params.budget.unwrap_or(DEFAULT_SCAN_CAP);
    let edge = catalog::cycle(p).relation_list();
    let found = match pol_symmetric(p, &edge, p, Symmetry::Cyclic, cap as u128) {
        Ok(f) => f,
        Err(e) => return Ok(fail_from_core(e)),
    };
    let candidates = (p as u128).pow(count_cyclic_orbits(p, p) as u32);
    if let Some(witness) = found.first() {
        return Ok((
            Verdict::Fail,
            json!({"counterexample": {"cyclic_polymorphism": witness}, "candidates": candidates.to_string()}),
        ));
    }
    Ok((
        Verdict::Pass,
        json!({"p": p, "candidates": candidates.to_string(), "cyclic_polymorphisms": 0}),
    ))
}

fn count_cyclic_orbits(k: usize, n: usize) -> usize {
    clonelab_core::ops::CandidateSpace::new(k, n, Symmetry::Cyclic)
        .expect("small space")
        .orbit_count()
}

/// The two pinched identities of the arity-5 generalized minority from the
/// standard pipeline, plus its generalized minority condition.
fn star_identities() -> Outcome {
    let pipeline = match standard_pipeline_e3() {
        Ok(p) => p,
        Err(e) => return Ok(fail_from_core(e)),
    };
    let m3c = &pipeline.symmetric_minority;
    let m5 = match generalized_minority(m3c, 5) {
        Ok(c) => c.output,
        Err(e) => return Ok(fail_from_core(e)),
    };
    // recheck both identities explicitly
    for t in tuples(3, 4) {
        let (x1, x, x4, x5) = (t[0], t[1], t[2], t[3]);
        let lhs = m5.apply(&[x1, x, x, x4, x5])?;
        let rhs = m3c.apply(&[x1, x4, x5])?;
        if lhs != rhs {
            return Ok((
                Verdict::Fail,
                json!({"counterexample": {"identity": "m5(x1,x,x,x4,x5) = m3(x1,x4,x5)", "valuation": t}}),
            ));
        }
    }
    for t in tuples(3, 3) {
        if m5.apply(&[t[0], t[1], t[2], t[0], t[1]])? != t[2] {
            return Ok((
                Verdict::Fail,
                json!({"counterexample": {"identity": "m5(x1,x2,x3,x1,x2) = x3", "valuation": t}}),
            ));
        }
    }
    let c = rainbow_constant(m3c)?;
    Ok((
        Verdict::Pass,
        json!({"constant": c, "checked": {"pair_collapse": 81, "doubled_pattern": 27, "gm5_valuations": 243}}),
    ))
}

/// Totally symmetric chain members up to the requested arity, with both
/// value laws; the chain construction verifies each member exhaustively.
fn ts_properties(params: &VerifyParams) -> Outcome {
    let max_n = params.n.unwrap_or(7);
    let pipeline = match standard_pipeline_e3() {
        Ok(p) => p,
        Err(e) => return Ok(fail_from_core(e)),
    };
    let chain = match totally_symmetric_chain(
        &pipeline.symmetric_minority,
        &pipeline.symmetric_majority,
        &pipeline.c2,
        max_n,
    ) {
        Ok(c) => c,
        Err(e) => return Ok(fail_from_core(e)),
    };
    for member in &chain {
        if let Err(e) = member.verify_replay() {
            return Ok(fail_from_core(e));
        }
    }
    Ok((
        Verdict::Pass,
        json!({
            "max_arity": max_n,
            "verified_arities": (2..=max_n).collect::<Vec<_>>(),
            "tuples_checked": (2..=max_n).map(|n| 3usize.pow(n as u32)).sum::<usize>(),
        }),
    ))
}

fn idempotent_boolean_operations(max_arity: usize) -> Vec<Operation> {
    let mut out = Vec::new();
    for n in 1..=max_arity {
        for op in clonelab_core::ops::enumerate_operations(2, n, Symmetry::None, 1 << 30)
            .expect("small space")
        {
            if op.is_idempotent() {
                out.push(op);
            }
        }
    }
    out
}

/// The minor-preservation law of the chain-image map over every idempotent
/// Boolean operation of arity at most 3 and every variable map between
/// arities at most 3.
fn xi_homomorphism() -> Outcome {
    let chains = match SymmetricChainPair::standard_e3(3, 7) {
        Ok(c) => c,
        Err(e) => return Ok(fail_from_core(e)),
    };
    let compat = verify_chain_compatibility(chains.ts_chain(), chains.gm_chain())?;
    if !compat.compatible {
        return Ok((
            Verdict::Fail,
            json!({"counterexample": {"chain_compatibility": compat.failure}}),
        ));
    }
    let ops = idempotent_boolean_operations(3);
    let mut ops_checked = 0usize;
    let mut maps_checked = 0usize;
    for f in &ops {
        ops_checked += 1;
        let image = match xi(f, &chains) {
            Ok(c) => c.output,
            Err(e) => return Ok(fail_from_core(e)),
        };
        for r in 1..=3usize {
            for map in tuples(r, f.arity()) {
                maps_checked += 1;
                let vm = VarMap::new(r, map.iter().map(|&x| x as usize).collect())?;
                let lhs = match xi(&f.minor(&vm)?, &chains) {
                    Ok(c) => c.output,
                    Err(e) => return Ok(fail_from_core(e)),
                };
                let rhs = image.minor(&vm)?;
                if lhs != rhs {
                    return Ok((
                        Verdict::Fail,
                        json!({"counterexample": {"operation": f, "map": vm}}),
                    ));
                }
            }
        }
    }
    Ok((
        Verdict::Pass,
        json!({"operations": ops_checked, "maps": maps_checked}),
    ))
}

/// Builds the binary-operation gadget for a fixture and checks coherence:
/// either a quasi-Mal'cev polymorphism exists and the forbidden edge loop is
/// present, or both witnessing homomorphisms verify and an independent
/// search confirms the equivalence.
fn splitting_malcev(params: &VerifyParams, loader: &Loader) -> Outcome {
    let fixture = params.fixture.as_deref().unwrap_or("b2");
    let a = loader.structure(fixture)?;
    let cap = params.budget.unwrap_or(DEFAULT_SCAN_CAP);
    let pol3 = match pol(a.domain_size(), &a.relation_list(), 3, cap as u128) {
        Ok(p) => p,
        Err(e) => return Ok(fail_from_core(e)),
    };
    let report = match free_structure_malcev(&a, &pol3, true) {
        Ok(r) => r,
        Err(e) => return Ok(fail_from_core(e)),
    };
    match &report.condition_witness {
        Some(w) => {
            let pr2 = clonelab_core::ops::make_projection(a.domain_size(), 2, 2)?;
            let enc = clonelab_core::ops::encode_tuple(a.domain_size(), pr2.table()) as Element;
            let loop_present = report
                .structure
                .relation("edge")
                .map(|r| r.contains(&[enc, enc]))
                .unwrap_or(false);
            if !loop_present {
                return Ok((
                    Verdict::Fail,
                    json!({"counterexample": "quasi-Mal'cev witness exists but the edge loop is missing"}),
                ));
            }
            Ok((
                Verdict::Pass,
                json!({
                    "fixture": fixture,
                    "satisfies_malcev_condition": true,
                    "witness": w,
                    "ternary_polymorphisms": pol3.len(),
                }),
            ))
        }
        None => {
            if report.h.is_none() || report.h_prime.is_none() {
                return Ok((
                    Verdict::Fail,
                    json!({"counterexample": "missing homomorphism witnesses"}),
                ));
            }
            let b2 = catalog::b2();
            if hom_equivalent(&b2, &report.structure)?.is_none() {
                return Ok((
                    Verdict::Fail,
                    json!({"counterexample": "independent equivalence search failed"}),
                ));
            }
            Ok((
                Verdict::Pass,
                json!({
                    "fixture": fixture,
                    "satisfies_malcev_condition": false,
                    "free_structure_size": report.structure.domain_size(),
                    "ternary_polymorphisms": pol3.len(),
                    "h": report.h,
                    "h_prime": report.h_prime,
                }),
            ))
        }
    }
}

/// Builds the cycle gadget for a fixture and prime and checks coherence:
/// either a cyclic polymorphism exists, or the shift classes are disjoint
/// and the gadget is equivalent to the directed cycle.
fn splitting_cycles(params: &VerifyParams, loader: &Loader) -> Outcome {
    let fixture = params.fixture.as_deref().unwrap_or("c2");
    let p = params.p.unwrap_or(2);
    let a = loader.structure(fixture)?;
    let cap = params.budget.unwrap_or(DEFAULT_SCAN_CAP);
    let polp = match pol(a.domain_size(), &a.relation_list(), p, cap as u128) {
        Ok(x) => x,
        Err(e) => return Ok(fail_from_core(e)),
    };
    let report = match free_structure_cycle(&a, p, &polp, true) {
        Ok(r) => r,
        Err(e) => return Ok(fail_from_core(e)),
    };
    match &report.condition_witness {
        Some(w) => Ok((
            Verdict::Pass,
            json!({
                "fixture": fixture,
                "p": p,
                "satisfies_cyclic_condition": true,
                "witness": w,
            }),
        )),
        None => {
            let classes = report.classes.as_ref().expect("classes for the split case");
            let mut seen = std::collections::BTreeSet::new();
            for class in classes {
                for &e in class {
                    if !seen.insert(e) {
                        return Ok((
                            Verdict::Fail,
                            json!({"counterexample": {"overlapping_class_element": e}}),
                        ));
                    }
                }
            }
            if classes[0].len() * p != polp.len() {
                return Ok((
                    Verdict::Fail,
                    json!({"counterexample": {
                        "class_size": classes[0].len(),
                        "polymorphisms": polp.len(),
                        "expected": "class size times p equals the polymorphism count",
                    }}),
                ));
            }
            let cp = catalog::cycle(p);
            if hom_equivalent(&cp, &report.structure)?.is_none() {
                return Ok((
                    Verdict::Fail,
                    json!({"counterexample": "independent equivalence search failed"}),
                ));
            }
            Ok((
                Verdict::Pass,
                json!({
                    "fixture": fixture,
                    "p": p,
                    "satisfies_cyclic_condition": false,
                    "free_structure_size": report.structure.domain_size(),
                    "classes": classes.len(),
                    "class_sizes": classes.iter().map(|c| c.len()).collect::<Vec<_>>(),
                }),
            ))
        }
    }
}

/// The unit-vector power of the two-element singleton structure is
/// homomorphically equivalent to the n-element singleton structure.
fn collapse_idemp(params: &VerifyParams) -> Outcome {
    let n = params.n.unwrap_or(3);
    let (power, g, h) = match collapse_idempotent_power(n) {
        Ok(x) => x,
        Err(e) => return Ok(fail_from_core(e)),
    };
    let i_n = catalog::idempotence_witness(n);
    if hom_equivalent(&i_n, &power)?.is_none() {
        return Ok((
            Verdict::Fail,
            json!({"counterexample": "independent equivalence search failed"}),
        ));
    }
    Ok((
        Verdict::Pass,
        json!({
            "n": n,
            "power_size": power.domain_size(),
            "into_power": g,
            "onto_singletons": h,
        }),
    ))
}

/// Runs the dichotomy decision on a fixture and reports the verified branch.
fn dichotomy(params: &VerifyParams, loader: &Loader) -> Outcome {
    let fixture = params
        .fixture
        .as_deref()
        .ok_or_else(|| anyhow::anyhow!("dichotomy requires --fixture"))?;
    let a = loader.structure(fixture)?;
    match verify_dichotomy_c1_i2(&a) {
        Ok(Dichotomy::C1ConstructsA { power, .. }) => Ok((
            Verdict::Pass,
            json!({"fixture": fixture, "branch": "c1_constructs_a", "power_size": power.domain_size()}),
        )),
        Ok(Dichotomy::AConstructsI2 { core, power, to_i2, from_i2 }) => Ok((
            Verdict::Pass,
            json!({
                "fixture": fixture,
                "branch": "a_constructs_i2",
                "core_size": core.domain_size(),
                "power_size": power.domain_size(),
                "to_i2": to_i2,
                "from_i2": from_i2,
            }),
        )),
        Err(e) => Ok(fail_from_core(e)),
    }
}

/// Ternary relations invariant under the dual discriminator are binary
/// decomposable: exhaustive over singleton and pair seeds, plus seeded
/// random seeds (the verdict does not depend on the sample).
fn baker_pixley_sample(params: &VerifyParams) -> Outcome {
    let dd = catalog::dual_discriminator3();
    let gens = [dd];
    let mut seeds: Vec<Vec<Vec<Element>>> = Vec::new();
    let all: Vec<Vec<Element>> = tuples(3, 3).collect();
    for t in &all {
        seeds.push(vec![t.clone()]);
    }
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            seeds.push(vec![all[i].clone(), all[j].clone()]);
        }
    }
    let mut rng = StdRng::seed_from_u64(params.seed);
    for _ in 0..32 {
        let size = rng.gen_range(3..=5);
        let mut seed = Vec::new();
        for _ in 0..size {
            seed.push(all[rng.gen_range(0..all.len())].clone());
        }
        seeds.push(seed);
    }
    let mut checked = 0usize;
    for seed in seeds {
        let seed_rel = Relation::new(3, 3, seed)?;
        let closed = inv_closure(&gens, &seed_rel)?;
        checked += 1;
        if !is_n_decomposable(&closed, 2)? {
            return Ok((
                Verdict::Fail,
                json!({"counterexample": {"relation": closed}}),
            ));
        }
    }
    Ok((Verdict::Pass, json!({"relations_checked": checked})))
}

/// The essential/critical bundle on the Boolean parity relation: essential
/// tuples, the single product block, its group witness, criticality under
/// the ternary sum, and binary non-decomposability.
fn block_structure() -> Outcome {
    let diseq = Relation::new(2, 2, vec![vec![0, 1], vec![1, 0]])?;
    let ess = essential_tuples(&diseq);
    if ess != vec![vec![0, 0], vec![1, 1]] {
        return Ok((
            Verdict::Fail,
            json!({"counterexample": {"essential_tuples": ess}}),
        ));
    }
    let parity = Relation::new(2, 3, tuples(2, 3).filter(|t| t[0] ^ t[1] ^ t[2] == 0))?;
    if !is_essential(&parity) {
        return Ok((
            Verdict::Fail,
            json!({"counterexample": "parity relation reported inessential"}),
        ));
    }
    let bs = blocks(&parity);
    if bs.len() != 1 || bs[0].is_trivial || bs[0].product_factors.is_none() {
        return Ok((
            Verdict::Fail,
            json!({"counterexample": {"blocks": bs.len()}}),
        ));
    }
    let witness = match block_group_structure(&parity, &bs[0])? {
        Some(w) => w,
        None => {
            return Ok((
                Verdict::Fail,
                json!({"counterexample": "no group structure found on the parity block"}),
            ))
        }
    };
    if witness.group.order != 2 || witness.maps.iter().any(|m| m[&0] != 0 || m[&1] != 1) {
        return Ok((
            Verdict::Fail,
            json!({"counterexample": {"group_order": witness.group.order}}),
        ));
    }
    let verdict = is_critical(&parity, &[catalog::xor3()], true, 1 << 24)?;
    if verdict != Criticality::Critical {
        return Ok((
            Verdict::Fail,
            json!({"counterexample": {"criticality": verdict}}),
        ));
    }
    if is_n_decomposable(&parity, 2)? {
        return Ok((
            Verdict::Fail,
            json!({"counterexample": "parity relation reported binary decomposable"}),
        ));
    }
    Ok((
        Verdict::Pass,
        json!({
            "essential_tuples": 2,
            "block_group": witness.group.name,
            "criticality": "critical",
            "binary_decomposable": false,
        }),
    ))
}

/// Bounded search for an idempotent quasi-majority in the clone generated by
/// the given operations (defaults to the standard pipeline generators).
/// Never fails while the closure is incomplete: budget exhaustion yields
/// `unknown`.
fn majority_search(params: &VerifyParams) -> Outcome {
    let generators = params.generators.clone().unwrap_or_else(|| {
        vec![
            catalog::affine_malcev3(),
            catalog::min2_e3(),
            catalog::symmetric_majority0(),
        ]
    });
    let budget = params.budget.unwrap_or(DEFAULT_TABLE_BUDGET) as usize;
    let quasi_majority = MinorCondition::quasi_majority();
    let search = generate_clone_search(&generators, 3, budget, |op| {
        op.arity() == 3
            && op.is_idempotent()
            && operation_satisfies(op, &quasi_majority).unwrap_or(false)
    });
    let search = match search {
        Ok(s) => s,
        Err(e) => return Ok(fail_from_core(e)),
    };
    match (search.witness, search.complete) {
        (Some(w), _) => Ok((
            Verdict::Pass,
            json!({"majority": w, "tables_produced": search.produced}),
        )),
        (None, true) => Ok((
            Verdict::Fail,
            json!({"counterexample": {
                "closure": "complete",
                "tables_produced": search.produced,
                "note": "fixed point reached with no majority operation",
            }}),
        )),
        (None, false) => Ok((
            Verdict::Unknown,
            json!({"budget": {"tables": budget, "produced": search.produced}}),
        )),
    }
}
