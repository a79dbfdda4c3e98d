//! Canonical operations and fixture structures used throughout the
//! verifiers and tests.

use crate::error::{Error, Result};
use crate::ops::{Element, Operation};
use crate::rel::{Relation, Structure};

/// Ternary Boolean sum, `x + y + z` mod 2.
pub fn xor3() -> Operation {
    Operation::from_fn(2, 3, |t| t[0] ^ t[1] ^ t[2]).unwrap()
}

/// Binary Boolean sum.
pub fn xor2() -> Operation {
    Operation::from_fn(2, 2, |t| t[0] ^ t[1]).unwrap()
}

pub fn and2() -> Operation {
    Operation::from_fn(2, 2, |t| t[0] & t[1]).unwrap()
}

pub fn or2() -> Operation {
    Operation::from_fn(2, 2, |t| t[0] | t[1]).unwrap()
}

pub fn not1() -> Operation {
    Operation::from_fn(2, 1, |t| 1 - t[0]).unwrap()
}

/// The ternary Boolean majority.
pub fn boolean_majority() -> Operation {
    Operation::from_fn(2, 3, |t| {
        if t[0] == t[1] || t[0] == t[2] {
            t[0]
        } else {
            t[1]
        }
    })
    .unwrap()
}

/// `x - y + z` mod 3, the affine Mal'cev operation on three elements.
pub fn affine_malcev3() -> Operation {
    Operation::from_fn(3, 3, |t| ((t[0] + 3 - t[1] + t[2]) % 3) as Element).unwrap()
}

/// The dual discriminator on three elements: the repeated value when the
/// last two arguments agree, the first argument otherwise. A majority
/// operation that projects on pairwise distinct inputs.
pub fn dual_discriminator3() -> Operation {
    Operation::from_fn(3, 3, |t| if t[1] == t[2] { t[1] } else { t[0] }).unwrap()
}

/// Binary minimum under the order 0 < 1 < 2.
pub fn min2_e3() -> Operation {
    Operation::from_fn(3, 2, |t| t[0].min(t[1])).unwrap()
}

/// Binary maximum under the order 0 < 1 < 2.
pub fn max2_e3() -> Operation {
    Operation::from_fn(3, 2, |t| t[0].max(t[1])).unwrap()
}

/// The fully symmetric majority over three elements with value 0 on
/// pairwise distinct inputs.
pub fn symmetric_majority0() -> Operation {
    Operation::from_fn(3, 3, |t| {
        if t[0] == t[1] || t[0] == t[2] {
            t[0]
        } else if t[1] == t[2] {
            t[1]
        } else {
            0
        }
    })
    .unwrap()
}

/// The fully symmetric minority over three elements with value 0 on
/// pairwise distinct inputs.
pub fn symmetric_minority0() -> Operation {
    Operation::from_fn(3, 3, |t| {
        if t[0] == t[1] && t[1] == t[2] {
            t[0]
        } else if t[0] == t[1] {
            t[2]
        } else if t[0] == t[2] {
            t[1]
        } else if t[1] == t[2] {
            t[0]
        } else {
            0
        }
    })
    .unwrap()
}

/// Looks up a named catalog operation; used by the CLI's `@name` shorthand.
pub fn operation_by_name(name: &str) -> Result<Operation> {
    Ok(match name {
        "xor2" => xor2(),
        "xor3" => xor3(),
        "and" => and2(),
        "or" => or2(),
        "not" => not1(),
        "maj" => boolean_majority(),
        "affine3" => affine_malcev3(),
        "dd" => dual_discriminator3(),
        "min" => min2_e3(),
        "max" => max2_e3(),
        "symmaj0" => symmetric_majority0(),
        "symmin0" => symmetric_minority0(),
        other => {
            return Err(Error::invalid(
                "catalog operation",
                format!("unknown name `{other}`"),
            ))
        }
    })
}

pub const OPERATION_NAMES: &[&str] = &[
    "xor2", "xor3", "and", "or", "not", "maj", "affine3", "dd", "min", "max", "symmaj0",
    "symmin0",
];

fn singleton(k: usize, a: Element) -> Relation {
    Relation::new(k, 1, vec![vec![a]]).unwrap()
}

/// The one-element structure with a single loop.
pub fn c1() -> Structure {
    Structure::new(
        1,
        vec![(
            "edge".to_string(),
            Relation::new(1, 2, vec![vec![0, 0]]).unwrap(),
        )],
    )
    .unwrap()
}

/// The directed cycle on `p` elements.
pub fn cycle(p: usize) -> Structure {
    let edge = Relation::new(
        p,
        2,
        (0..p).map(|i| vec![i as Element, ((i + 1) % p) as Element]),
    )
    .unwrap();
    Structure::new(p, vec![("edge".to_string(), edge)]).unwrap()
}

/// The structure on `n` elements whose relations are all singletons; its
/// polymorphisms are exactly the idempotent operations.
pub fn idempotence_witness(n: usize) -> Structure {
    let relations = (0..n)
        .map(|a| (format!("sing{a}"), singleton(n, a as Element)))
        .collect::<Vec<_>>();
    Structure::new(n, relations).unwrap()
}

/// The two-element structure with both singletons and the edge set
/// `{(0,1),(1,0),(1,1)}`.
pub fn b2() -> Structure {
    Structure::new(
        2,
        vec![
            ("sing0".to_string(), singleton(2, 0)),
            ("sing1".to_string(), singleton(2, 1)),
            (
                "edge".to_string(),
                Relation::new(2, 2, vec![vec![0, 1], vec![1, 0], vec![1, 1]]).unwrap(),
            ),
        ],
    )
    .unwrap()
}

/// The 21-element structure whose two binary relations are the graphs of a
/// pair of permutations; it has cyclic and Mal'cev polymorphisms but no
/// symmetric polymorphism of arity 5. Elements 11..=20 stand for the
/// letters a..=j.
pub fn k21() -> Structure {
    const N: usize = 21;
    // letters: a=11 b=12 c=13 d=14 e=15 f=16 g=17 h=18 i=19 j=20
    let cycles_r: &[&[Element]] = &[
        &[0, 1, 2],
        &[5, 6, 7],
        &[8, 9, 10],
        &[15, 12, 11], // (e b a)
        &[14, 17, 19], // (d g i)
        &[16, 18, 13], // (f h c)
    ];
    let swaps_s: &[[Element; 2]] = &[
        [1, 4],
        [2, 3],
        [5, 6],
        [7, 8],
        [20, 15], // (j e)
        [12, 13], // (b c)
        [11, 14], // (a d)
        [19, 16], // (i f)
    ];
    let mut r_map: Vec<Element> = (0..N as Element).collect();
    for cyc in cycles_r {
        for w in 0..cyc.len() {
            r_map[cyc[w] as usize] = cyc[(w + 1) % cyc.len()];
        }
    }
    let mut s_map: Vec<Element> = (0..N as Element).collect();
    for [a, b] in swaps_s {
        s_map[*a as usize] = *b;
        s_map[*b as usize] = *a;
    }
    let graph = |m: &[Element]| {
        Relation::new(N, 2, m.iter().enumerate().map(|(x, &y)| vec![x as Element, y])).unwrap()
    };
    Structure::new(
        N,
        vec![
            ("r".to_string(), graph(&r_map)),
            ("s".to_string(), graph(&s_map)),
        ],
    )
    .unwrap()
}

/// Looks up a fixture structure by its canonical name.
pub fn structure_by_name(name: &str) -> Result<Structure> {
    Ok(match name {
        "c1" => c1(),
        "c2" => cycle(2),
        "c3" => cycle(3),
        "c4" => cycle(4),
        "i2" => idempotence_witness(2),
        "i3" => idempotence_witness(3),
        "b2" => b2(),
        "k21" => k21(),
        other => {
            return Err(Error::invalid(
                "fixture structure",
                format!("unknown name `{other}`"),
            ))
        }
    })
}

pub const STRUCTURE_NAMES: &[&str] = &["b2", "c1", "c2", "c3", "c4", "i2", "i3", "k21"];
