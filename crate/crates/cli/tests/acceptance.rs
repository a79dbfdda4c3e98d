//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! and asserting its stated time bound. All checks are exhaustive and
//! exact; the majority search is the single budget-bounded criterion and
//! may report unknown, never fail.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use clonelab_cli::io::Loader;
use clonelab_cli::verify::{run_verifier, Verdict, VerifyParams};
use clonelab_core::catalog;
use clonelab_core::conditions::{
    find_witness, operation_satisfies, MinorCondition, WitnessSource,
};
use clonelab_core::constructions::{
    constant_of_symmetric, d_switch, generalized_minority_chain, minority_from_malcev_majority,
    rainbow_constant, standard_pipeline_e3, symmetrize_majority, symmetrize_minority,
    totally_symmetric_chain, verify_chain_compatibility, xi, SymmetricChainPair,
};
use clonelab_core::ops::{
    encode_tuple, enumerate_operations, generate_clone, make_projection, tuples, Element,
    Operation, Symmetry, VarMap,
};
use clonelab_core::ppcon::{
    collapse_idempotent_power, find_homomorphism, hom_equivalent, verify_dichotomy_c1_i2,
    Dichotomy, Homomorphism,
};
use clonelab_core::rel::{
    block_group_structure, blocks, essential_tuples, inv_closure, is_critical, is_essential,
    is_n_decomposable, pol, preserves, Criticality, Relation, Structure,
};

fn loader() -> Loader {
    Loader::default()
}

struct Criterion {
    number: usize,
    name: &'static str,
    limit: Duration,
    start: Instant,
}

impl Criterion {
    fn new(number: usize, name: &'static str, limit_secs: u64) -> Self {
        Criterion {
            number,
            name,
            limit: Duration::from_secs(limit_secs),
            start: Instant::now(),
        }
    }

    fn pass(self, detail: &str) {
        let elapsed = self.start.elapsed();
        println!(
            "[acceptance] criterion {} ({}): pass — {} ({} ms)",
            self.number,
            self.name,
            detail,
            elapsed.as_millis()
        );
        assert!(
            elapsed < self.limit,
            "criterion {} exceeded its {}s bound: {:?}",
            self.number,
            self.limit.as_secs(),
            elapsed
        );
    }
}

fn run_cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_clonelab"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).to_string(),
    )
}

/// Criterion 1: no cyclic polymorphism of the directed 2- or 3-cycle of its
/// own arity, by exhaustive scan of the cyclic candidate spaces.
#[test]
fn criterion_01_remark_cycles() {
    let c = Criterion::new(1, "remark-cycles", 10);
    for (p, candidates) in [(2u64, 8u64), (3, 177_147)] {
        let (code, stdout) = run_cli(&["verify", "remark-cycles", "--p", &p.to_string(), "--json"]);
        assert_eq!(code, 0, "verifier exited {code}: {stdout}");
        let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
        assert_eq!(v["verdict"], "pass");
        assert_eq!(v["details"]["candidates"], candidates.to_string());
        assert_eq!(v["details"]["cyclic_polymorphisms"], 0);
    }
    c.pass("8 and 177147 candidates scanned, no cyclic polymorphism");
}

/// Criterion 2: the construction pipeline over E_3 from the affine Mal'cev
/// operation, the dual discriminator and the binary/ternary cyclic
/// fixtures, with the switch table matched bit-exactly against its closed
/// form.
#[test]
fn criterion_02_construction_pipeline() {
    let c = Criterion::new(2, "construction pipeline", 1);
    let d = catalog::affine_malcev3();
    let m_prime_seed = catalog::dual_discriminator3();
    let c2 = catalog::min2_e3();
    let c3 = catalog::symmetric_majority0();

    let m_prime = minority_from_malcev_majority(&d, &m_prime_seed).unwrap();
    assert!(operation_satisfies(&m_prime.output, &MinorCondition::quasi_minority()).unwrap());

    let majority = symmetrize_majority(&m_prime_seed, &c2, &c3).unwrap();
    assert!(
        operation_satisfies(&majority.output, &MinorCondition::fully_symmetric(3).unwrap())
            .unwrap()
    );
    assert!(operation_satisfies(&majority.output, &MinorCondition::quasi_majority()).unwrap());
    // frozen regression table
    assert_eq!(
        majority.output.table(),
        &[0, 0, 0, 0, 1, 0, 0, 0, 2, 0, 1, 0, 1, 1, 1, 0, 1, 2, 0, 0, 2, 0, 1, 2, 2, 2, 2]
    );

    let m3c = symmetrize_minority(&m_prime.output, &c2, &c3).unwrap();
    assert!(
        operation_satisfies(&m3c.output, &MinorCondition::fully_symmetric(3).unwrap()).unwrap()
    );
    assert!(operation_satisfies(&m3c.output, &MinorCondition::quasi_minority()).unwrap());
    assert_eq!(
        m3c.output.table(),
        &[0, 1, 2, 1, 0, 0, 2, 0, 0, 1, 0, 0, 0, 1, 2, 0, 2, 1, 2, 0, 0, 0, 2, 1, 0, 1, 2]
    );

    let rainbow = constant_of_symmetric(&m3c.output).unwrap();
    assert_eq!(rainbow, 0);

    let switch = d_switch(&m3c.output).unwrap();
    // independent oracle for the closed form, checked on all 27 entries
    let plus = |a: Element, b: Element| (a + b) % 3;
    for t in tuples(3, 3) {
        let (x, y, z) = (t[0], t[1], t[2]);
        let expected = if x == plus(rainbow, 2)
            && ((y, z) == (rainbow, plus(rainbow, 1)) || (y, z) == (plus(rainbow, 1), rainbow))
        {
            plus(rainbow, 1)
        } else if x == plus(rainbow, 1)
            && ((y, z) == (rainbow, plus(rainbow, 2)) || (y, z) == (plus(rainbow, 2), rainbow))
        {
            plus(rainbow, 2)
        } else {
            x
        };
        assert_eq!(switch.output.apply(&t).unwrap(), expected, "switch at {t:?}");
    }
    c.pass("minority, symmetrized majority/minority and switch all verified");
}

/// Criterion 3: generalized minorities of arities 5, 7 and 9 satisfy their
/// conditions on all valuations, with the two pinched identities at arity 5.
#[test]
fn criterion_03_generalized_minorities() {
    let c = Criterion::new(3, "generalized minorities", 30);
    let m3c = standard_pipeline_e3().unwrap().symmetric_minority;
    let chain = generalized_minority_chain(&m3c, 9).unwrap();
    assert_eq!(chain.len(), 4); // arities 3, 5, 7, 9
    for member in &chain[1..] {
        let n = member.output.arity();
        assert!(operation_satisfies(
            &member.output,
            &MinorCondition::generalized_minority(n).unwrap()
        )
        .unwrap());
    }
    let m5 = &chain[1].output;
    for t in tuples(3, 4) {
        assert_eq!(
            m5.apply(&[t[0], t[1], t[1], t[2], t[3]]).unwrap(),
            m3c.apply(&[t[0], t[2], t[3]]).unwrap()
        );
    }
    for t in tuples(3, 3) {
        assert_eq!(m5.apply(&[t[0], t[1], t[2], t[0], t[1]]).unwrap(), t[2]);
    }
    c.pass("gm(5)/gm(7)/gm(9) with both pinched identities at arity 5");
}

/// Criterion 4: totally symmetric chain members up to arity 7 with both
/// value laws on every tuple.
#[test]
fn criterion_04_totally_symmetric_chain() {
    let c = Criterion::new(4, "totally symmetric chain", 10);
    let pipeline = standard_pipeline_e3().unwrap();
    let chain = totally_symmetric_chain(
        &pipeline.symmetric_minority,
        &pipeline.symmetric_majority,
        &pipeline.c2,
        7,
    )
    .unwrap();
    assert_eq!(chain.len(), 6); // arities 2..=7
    let s2 = &pipeline.c2;
    let rainbow = rainbow_constant(&pipeline.symmetric_majority).unwrap();
    let full_value = pipeline
        .symmetric_minority
        .apply(&[
            s2.apply(&[0, rainbow]).unwrap(),
            s2.apply(&[1, rainbow]).unwrap(),
            s2.apply(&[2, rainbow]).unwrap(),
        ])
        .unwrap();
    for member in &chain {
        let n = member.output.arity();
        assert!(operation_satisfies(
            &member.output,
            &MinorCondition::totally_symmetric(n).unwrap()
        )
        .unwrap());
        for t in tuples(3, n) {
            let mut values = t.clone();
            values.sort_unstable();
            values.dedup();
            let expected = match values.len() {
                1 => values[0],
                2 => s2.apply(&[values[0], values[1]]).unwrap(),
                _ => full_value,
            };
            assert_eq!(member.output.apply(&t).unwrap(), expected);
        }
    }
    c.pass("ts(2)..ts(7) with both value laws on all tuples");
}

/// Criterion 5: the chain-image map is minor-preserving on every idempotent
/// Boolean operation of arity at most 3 and every variable map between
/// arities at most 3, over verified compatible chains.
#[test]
fn criterion_05_xi_minor_homomorphism() {
    let c = Criterion::new(5, "chain-image minor preservation", 60);
    let chains = SymmetricChainPair::standard_e3(3, 7).unwrap();
    let compat = verify_chain_compatibility(chains.ts_chain(), chains.gm_chain()).unwrap();
    assert!(compat.compatible);

    let mut ops = Vec::new();
    for n in 1..=3usize {
        for op in enumerate_operations(2, n, Symmetry::None, 1 << 20).unwrap() {
            if op.is_idempotent() {
                ops.push(op);
            }
        }
    }
    assert_eq!(ops.len(), 69);
    let mut maps_checked = 0usize;
    for f in &ops {
        let image = xi(f, &chains).unwrap().output;
        for r in 1..=3usize {
            for map in tuples(r, f.arity()) {
                let vm = VarMap::new(r, map.iter().map(|&x| x as usize).collect()).unwrap();
                let lhs = xi(&f.minor(&vm).unwrap(), &chains).unwrap().output;
                let rhs = image.minor(&vm).unwrap();
                assert_eq!(lhs, rhs, "map {vm:?} on {f:?}");
                maps_checked += 1;
            }
        }
    }
    assert_eq!(maps_checked, 2366);
    c.pass("69 operations, 2366 variable maps, chains compatible");
}

/// Criterion 6: the binary-operation gadget over the implication fixture.
/// The exhaustive 256-candidate ternary scan finds no quasi-Mal'cev
/// polymorphism, and the 16-element gadget is homomorphically equivalent to
/// the fixture with the stated element images.
#[test]
fn criterion_06_splitting_malcev() {
    let c = Criterion::new(6, "Mal'cev splitting gadget", 10);
    let b2 = catalog::b2();
    // exhaustive candidate scan: 2^(2^3) = 256 ternary tables
    let pol3 = pol(2, &b2.relation_list(), 3, 256).unwrap();
    let no_malcev = find_witness(
        WitnessSource::Operations(&pol3),
        &MinorCondition::quasi_malcev(),
        1 << 20,
    )
    .unwrap();
    assert!(no_malcev.assignment.is_none() && no_malcev.definitive);

    let result = run_verifier(
        "splitting-malcev",
        &VerifyParams {
            fixture: Some("b2".to_string()),
            ..Default::default()
        },
        &loader(),
    )
    .unwrap();
    assert_eq!(result.verdict, Verdict::Pass);
    assert_eq!(result.details["free_structure_size"], 16);
    assert_eq!(result.details["satisfies_malcev_condition"], false);
    // h maps 0 to the second binary projection and 1 to the first
    let pr22 = encode_tuple(2, make_projection(2, 2, 2).unwrap().table());
    let pr21 = encode_tuple(2, make_projection(2, 2, 1).unwrap().table());
    assert_eq!(
        result.details["h"]["map"],
        serde_json::json!([pr22, pr21])
    );
    c.pass("256 candidates scanned, 16-element gadget equivalent to the fixture");
}

/// Criterion 7: the cycle gadget over the directed 2-cycle: disjoint shift
/// classes and a 16-element gadget equivalent to the cycle.
#[test]
fn criterion_07_splitting_cycles() {
    let c = Criterion::new(7, "cycle splitting gadget", 10);
    let result = run_verifier(
        "splitting-cycles",
        &VerifyParams {
            fixture: Some("c2".to_string()),
            p: Some(2),
            ..Default::default()
        },
        &loader(),
    )
    .unwrap();
    assert_eq!(result.verdict, Verdict::Pass);
    assert_eq!(result.details["free_structure_size"], 16);
    assert_eq!(result.details["satisfies_cyclic_condition"], false);
    assert_eq!(result.details["classes"], 2);
    c.pass("disjoint shift classes, 16-element gadget equivalent to the cycle");
}

/// Criterion 8: the dichotomy verifier returns the correct branch on a
/// one-element-retractable structure, the 2-cycle and the implication
/// fixture, and the exponent-3 unit-vector power is equivalent to the
/// three-element singleton structure via the stated maps.
#[test]
fn criterion_08_dichotomy_and_collapse() {
    let c = Criterion::new(8, "dichotomy and collapse", 5);
    // loop with pendant vertices retracts to the loop
    let edge = Relation::new(3, 2, vec![vec![0, 0], vec![1, 0], vec![2, 1]]).unwrap();
    let retractable = Structure::new(3, vec![("edge".to_string(), edge)]).unwrap();
    match verify_dichotomy_c1_i2(&retractable).unwrap() {
        Dichotomy::C1ConstructsA { power, .. } => assert_eq!(power.domain_size(), 1),
        _ => panic!("expected the one-element branch"),
    }
    for fixture in ["c2", "b2"] {
        match verify_dichotomy_c1_i2(&loader().structure(fixture).unwrap()).unwrap() {
            Dichotomy::AConstructsI2 { power, .. } => {
                assert_eq!(power.relation("sing0").unwrap().len(), 1);
            }
            _ => panic!("expected the idempotence branch for {fixture}"),
        }
    }

    let (power, g, h) = collapse_idempotent_power(3).unwrap();
    assert_eq!(power.domain_size(), 8);
    // unit vectors, first coordinate most significant
    assert_eq!(g.map(), &[4, 2, 1]);
    assert_eq!(h.map()[4], 0);
    assert_eq!(h.map()[2], 1);
    assert_eq!(h.map()[1], 2);
    let i3 = catalog::idempotence_witness(3);
    assert!(hom_equivalent(&power, &i3).unwrap().is_some());
    c.pass("three fixtures on the correct branch, 8-element power equivalent to the singletons");
}

/// Criterion 9: the essential/critical machinery on the Boolean parity
/// relation and the binary disequality.
#[test]
fn criterion_09_critical_machinery() {
    let c = Criterion::new(9, "critical-relation machinery", 5);
    let diseq = Relation::new(2, 2, vec![vec![0, 1], vec![1, 0]]).unwrap();
    assert_eq!(essential_tuples(&diseq), vec![vec![0, 0], vec![1, 1]]);

    let parity = Relation::new(2, 3, tuples(2, 3).filter(|t| t[0] ^ t[1] ^ t[2] == 0)).unwrap();
    assert!(is_essential(&parity));
    let bs = blocks(&parity);
    assert_eq!(bs.len(), 1);
    assert!(!bs[0].is_trivial);
    let factors = bs[0].product_factors.as_ref().unwrap();
    assert_eq!(factors.len(), 3);
    assert!(factors.iter().all(|f| f.len() == 2));

    let witness = block_group_structure(&parity, &bs[0]).unwrap().unwrap();
    assert_eq!(witness.group.order, 2);
    for phi in &witness.maps {
        assert_eq!(phi[&0], 0);
        assert_eq!(phi[&1], 1);
    }

    let verdict = is_critical(&parity, &[catalog::xor3()], true, 1 << 24).unwrap();
    assert_eq!(verdict, Criticality::Critical);
    assert!(!is_n_decomposable(&parity, 2).unwrap());
    c.pass("essential tuples, product block, group witness, criticality, non-decomposability");
}

/// Criterion 10: the bounded majority search over the standard generators
/// must find a majority or report unknown; a fail verdict is never
/// acceptable.
#[test]
fn criterion_10_majority_search() {
    let c = Criterion::new(10, "bounded majority search", 60);
    let (code, stdout) = run_cli(&["verify", "majority-search", "--json"]);
    assert_ne!(code, 1, "majority-search must never fail: {stdout}");
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_ne!(v["verdict"], "fail");
    if v["verdict"] == "pass" {
        let table: Vec<Element> = v["details"]["majority"]["table"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_u64().unwrap() as Element)
            .collect();
        let op = Operation::new(3, 3, table).unwrap();
        assert!(op.is_idempotent());
        assert!(operation_satisfies(&op, &MinorCondition::quasi_majority()).unwrap());
    }
    c.pass("witness found (or honest unknown), never a failure");
}

/// Criterion 11: the property suites — minor composition, the easy Galois
/// inclusion, homomorphism re-verification and byte-stable serialization —
/// over randomized-then-exhaustive instance sets at domain size at most 3
/// and arity at most 3.
#[test]
fn criterion_11_property_suites() {
    let c = Criterion::new(11, "property suites", 60);

    // exhaustive minor composition over all Boolean operations of arity <= 2
    // plus deterministic samples at arity 3 and domain size 3
    let mut composition_checked = 0usize;
    let mut check_composition = |f: &Operation| {
        let a = f.arity();
        for r1 in 1..=3usize {
            for s in tuples(r1, a) {
                let sigma = VarMap::new(r1, s.iter().map(|&x| x as usize).collect()).unwrap();
                for r2 in 1..=2usize {
                    for t in tuples(r2, r1) {
                        let tau =
                            VarMap::new(r2, t.iter().map(|&x| x as usize).collect()).unwrap();
                        let lhs = f.minor(&sigma).unwrap().minor(&tau).unwrap();
                        let rhs = f.minor(&sigma.then(&tau).unwrap()).unwrap();
                        assert_eq!(lhs, rhs);
                        composition_checked += 1;
                    }
                }
            }
        }
    };
    for op in enumerate_operations(2, 2, Symmetry::None, 1 << 20).unwrap() {
        check_composition(&op);
    }
    for op in [
        catalog::xor3(),
        catalog::boolean_majority(),
        catalog::dual_discriminator3(),
        catalog::affine_malcev3(),
        catalog::symmetric_minority0(),
        catalog::min2_e3(),
    ] {
        check_composition(&op);
    }
    assert!(composition_checked > 1000);

    // easy Galois inclusion: clone members preserve every closure of their
    // generators; exhaustive Boolean seeds, singleton seeds over E_3
    for generators in [
        vec![catalog::xor3()],
        vec![catalog::boolean_majority()],
        vec![catalog::min2_e3(), catalog::max2_e3()],
        vec![catalog::affine_malcev3()],
    ] {
        let k = generators[0].domain_size();
        let clone = generate_clone(&generators, 3, 200_000).unwrap();
        assert!(clone.complete, "closure incomplete for k={k}");
        let mut seeds: Vec<Relation> = Vec::new();
        if k == 2 {
            for m in 1..=2usize {
                let len = 2usize.pow(m as u32);
                for mask in 1..(1u32 << len) {
                    let ts: Vec<Vec<Element>> = tuples(2, m)
                        .enumerate()
                        .filter(|(i, _)| mask & (1 << i) != 0)
                        .map(|(_, t)| t)
                        .collect();
                    seeds.push(Relation::new(2, m, ts).unwrap());
                }
            }
        } else {
            for t in tuples(k, 2) {
                seeds.push(Relation::new(k, 2, vec![t]).unwrap());
            }
            seeds.push(Relation::new(k, 3, vec![vec![0, 1, 2]]).unwrap());
        }
        for seed in &seeds {
            let closed = inv_closure(&generators, seed).unwrap();
            for op in &clone.operations {
                assert!(preserves(op, &closed).unwrap());
            }
        }
    }

    // homomorphism re-verification on fixture pairs
    for (a, b) in [
        (catalog::cycle(4), catalog::cycle(2)),
        (catalog::cycle(6), catalog::cycle(2)),
        (catalog::cycle(6), catalog::cycle(3)),
        (catalog::b2(), catalog::b2()),
    ] {
        let h = find_homomorphism(&a, &b).unwrap().unwrap();
        assert!(Homomorphism::check(&a, &b, h.map()).unwrap().is_none());
    }

    // byte-identical JSON round-trips across the documented schemas
    fn assert_round_trip<T: serde::Serialize + serde::de::DeserializeOwned>(value: &T) {
        let text = serde_json::to_string(value).unwrap();
        let back: T = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
    for op in enumerate_operations(2, 2, Symmetry::None, 1 << 20).unwrap() {
        assert_round_trip(&op);
    }
    assert_round_trip(&catalog::symmetric_minority0());
    for mask in 0..16u32 {
        let ts: Vec<Vec<Element>> = tuples(2, 2)
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, t)| t)
            .collect();
        assert_round_trip(&Relation::new(2, 2, ts).unwrap());
    }
    for name in catalog::STRUCTURE_NAMES {
        assert_round_trip(&catalog::structure_by_name(name).unwrap());
    }
    for cond in [
        MinorCondition::cyclic(3).unwrap(),
        MinorCondition::quasi_malcev(),
        MinorCondition::totally_symmetric(4).unwrap(),
        MinorCondition::generalized_minority(5).unwrap(),
    ] {
        assert_round_trip(&cond);
    }
    assert_round_trip(&VarMap::new(2, vec![0, 0, 1]).unwrap());

    // assignments survive a CLI-level round trip as well
    let mut assignment = BTreeMap::new();
    assignment.insert("c".to_string(), catalog::and2());
    assert!(clonelab_core::conditions::satisfies(
        &assignment,
        &MinorCondition::cyclic(2).unwrap()
    )
    .unwrap());

    c.pass("composition law, Galois inclusion, re-verification and round-trips all hold");
}
