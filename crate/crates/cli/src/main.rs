use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use clonelab_cli::io::Loader;
use clonelab_cli::verify::{run_verifier, VerifierResult, VerifyParams, DEFAULT_SCAN_CAP};
use clonelab_core::conditions::{
    find_witness, first_failure, satisfies, WitnessSource,
};
use clonelab_core::constructions::{
    constant_of_symmetric, d_switch, generalized_minority, minority_from_malcev_majority,
    poly_rep, standard_pipeline_e3, symmetrize_majority, symmetrize_minority,
    totally_symmetric_chain, xi, Construction, SymmetricChainPair,
};
use clonelab_core::ops::{make_projection, Operation, Symmetry};
use clonelab_core::ppcon::{core_of, find_homomorphism, free_structure_cycle, free_structure_malcev, pp_power};
use clonelab_core::rel::{
    blocks, essential_tuples, inv_closure, is_critical, is_essential, is_n_decomposable,
    pol_symmetric, Criticality,
};

#[derive(Parser)]
#[command(name = "clonelab", version, about = "Workbench for operations, relations and minor conditions over small finite domains")]
struct Cli {
    /// Emit machine-readable JSON instead of text
    #[arg(long, global = true)]
    json: bool,

    /// Seed for randomized search orderings; verdicts never depend on it
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Budget: candidate scans or generated tables, depending on the command
    #[arg(long, global = true)]
    budget: Option<u64>,

    /// Directory with fixture structures (b2, c2, ..., k21); embedded
    /// copies are used when absent
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Operation-level commands
    #[command(subcommand)]
    Op(OpCmd),
    /// Check a minor condition against operations, or search a structure's
    /// polymorphisms for a witness
    Check(CheckArgs),
    /// Enumerate the polymorphisms of a structure at one arity
    Pol(PolArgs),
    /// Close a seed relation under operations
    Invclosure(InvClosureArgs),
    /// Essential tuples of a relation
    Essential(RelationArg),
    /// Blocks of a relation with product factors and group witnesses
    Blocks(RelationArg),
    /// Criticality of a relation under supplied clone generators
    Critical(CriticalArgs),
    /// n-decomposability of a relation
    Decomposable(DecomposableArgs),
    /// Search for a homomorphism between structures
    Hom(HomArgs),
    /// Core of a structure
    Core(StructureArg),
    /// Evaluate a pp-power of a structure
    Pppower(PpPowerArgs),
    /// Operation-building pipelines
    #[command(subcommand)]
    Construct(ConstructCmd),
    /// Free-structure gadgets
    #[command(subcommand)]
    Free(FreeCmd),
    /// Named verifiers with machine-readable verdicts
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum OpCmd {
    /// Build a projection operation
    Project {
        #[arg(long)]
        domain: usize,
        #[arg(long)]
        arity: usize,
        /// 1-based coordinate
        #[arg(long)]
        coord: usize,
    },
    /// Apply a variable map to an operation
    Minor {
        #[arg(long)]
        op: String,
        /// Variable map reference (inline JSON or path)
        #[arg(long)]
        map: String,
    },
    /// Compose a head operation with argument operations
    Compose {
        #[arg(long)]
        head: String,
        #[arg(long, num_args = 1..)]
        args: Vec<String>,
    },
}

#[derive(Args)]
struct CheckArgs {
    /// Builtin condition name (sigma_p, quasi_minority, quasi_malcev,
    /// quasi_majority, fs, ts, gm, wnu, qnu) or a condition JSON reference
    condition: String,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Operations assigned to the condition symbols in sorted symbol order
    #[arg(long, num_args = 1.., conflicts_with = "structure")]
    ops: Option<Vec<String>>,
    /// Search this structure's polymorphisms for a witness instead
    #[arg(long)]
    structure: Option<String>,
    /// Candidate symmetry restriction for the witness search
    #[arg(long, value_enum, default_value = "none")]
    symmetry: SymmetryArg,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SymmetryArg {
    None,
    Cyclic,
    Symmetric,
}

impl From<SymmetryArg> for Symmetry {
    fn from(s: SymmetryArg) -> Symmetry {
        match s {
            SymmetryArg::None => Symmetry::None,
            SymmetryArg::Cyclic => Symmetry::Cyclic,
            SymmetryArg::Symmetric => Symmetry::FullySymmetric,
        }
    }
}

#[derive(Args)]
struct PolArgs {
    #[arg(long)]
    structure: String,
    #[arg(long)]
    arity: usize,
    #[arg(long, value_enum, default_value = "none")]
    symmetry: SymmetryArg,
}

#[derive(Args)]
struct InvClosureArgs {
    #[arg(long, num_args = 0..)]
    ops: Vec<String>,
    /// Seed relation reference
    #[arg(long)]
    relation: String,
}

#[derive(Args)]
struct RelationArg {
    #[arg(long)]
    relation: String,
}

#[derive(Args)]
struct CriticalArgs {
    #[arg(long)]
    relation: String,
    #[arg(long, num_args = 0..)]
    gens: Vec<String>,
    /// Declare the generators complete for the polymorphism clone
    #[arg(long)]
    gens_complete: bool,
}

#[derive(Args)]
struct DecomposableArgs {
    #[arg(long)]
    relation: String,
    #[arg(long)]
    n: usize,
}

#[derive(Args)]
struct HomArgs {
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
}

#[derive(Args)]
struct StructureArg {
    #[arg(long)]
    structure: String,
}

#[derive(Args)]
struct PpPowerArgs {
    #[arg(long)]
    structure: String,
    #[arg(long)]
    power: usize,
    /// JSON object of relation name to pp formula (inline or path)
    #[arg(long)]
    defs: String,
}

#[derive(Subcommand)]
enum ConstructCmd {
    /// Symmetrize a majority operation
    Maj {
        #[arg(long, default_value = "@dd")]
        mprime: String,
        #[arg(long, default_value = "@min")]
        c2: String,
        #[arg(long, default_value = "@symmaj0")]
        c3: String,
    },
    /// Build a minority from a Mal'cev operation and a majority; with --c2
    /// and --c3 the result is symmetrized as well
    Min {
        #[arg(long, default_value = "@affine3")]
        malcev: String,
        #[arg(long, default_value = "@dd")]
        majority: String,
        #[arg(long)]
        c2: Option<String>,
        #[arg(long)]
        c3: Option<String>,
    },
    /// The switching operation of a symmetric minority
    Dswitch {
        #[arg(long)]
        m3c: Option<String>,
    },
    /// Generalized minority of odd arity
    Genmin {
        #[arg(long)]
        m3c: Option<String>,
        #[arg(long, default_value_t = 5)]
        n: usize,
    },
    /// Totally symmetric chain up to an arity
    Ts {
        #[arg(long)]
        minority: Option<String>,
        #[arg(long)]
        majority: Option<String>,
        #[arg(long, default_value = "@min")]
        s2: String,
        #[arg(long, default_value_t = 7)]
        n: usize,
    },
    /// XOR-of-monomials form of an idempotent Boolean operation
    Polyrep {
        #[arg(long)]
        op: String,
    },
    /// Image of an idempotent Boolean operation under the chain map
    Xi {
        #[arg(long)]
        op: String,
        #[arg(long, default_value_t = 9)]
        max_ts: usize,
        #[arg(long, default_value_t = 9)]
        max_gm: usize,
    },
}

#[derive(Subcommand)]
enum FreeCmd {
    /// Binary-operation gadget from the ternary polymorphisms of a fixture
    Malcev {
        #[arg(long, default_value = "b2")]
        fixture: String,
        /// Caller-supplied ternary polymorphisms; skips the exhaustive scan
        #[arg(long, num_args = 1..)]
        pol: Option<Vec<String>>,
        /// Declare the supplied set exhaustive
        #[arg(long)]
        complete: bool,
    },
    /// Cycle gadget from the p-ary polymorphisms of a fixture
    Cycle {
        #[arg(long, default_value = "c2")]
        fixture: String,
        #[arg(long, default_value_t = 2)]
        p: usize,
        /// Caller-supplied p-ary polymorphisms; skips the exhaustive scan
        #[arg(long, num_args = 1..)]
        pol: Option<Vec<String>>,
        /// Declare the supplied set exhaustive
        #[arg(long)]
        complete: bool,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// One of: remark-cycles, star-identities, ts-properties,
    /// xi-homomorphism, splitting-malcev, splitting-cycles, collapse-idemp,
    /// dichotomy, baker-pixley-sample, block-structure, majority-search
    name: String,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    fixture: Option<String>,
    /// Generator operations for majority-search
    #[arg(long, num_args = 0..)]
    gens: Option<Vec<String>>,
}

/// Exit discipline: 0 success/pass, 1 fail or definitive negative with a
/// counterexample attached, 2 usage or budget errors.
enum Outcome {
    Success(Value, String),
    Negative(Value, String),
    Verifier(VerifierResult),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("CLONELAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match dispatch(&cli) {
        Ok(Outcome::Success(value, text)) => {
            emit(&cli, &value, &text);
            ExitCode::SUCCESS
        }
        Ok(Outcome::Negative(value, text)) => {
            emit(&cli, &value, &text);
            ExitCode::from(1)
        }
        Ok(Outcome::Verifier(result)) => {
            let code = result.exit_code();
            let text = format!(
                "{}: {} in {} ms\n{}",
                result.name,
                match code {
                    0 => "pass",
                    1 => "fail",
                    _ => "unknown",
                },
                result.elapsed_ms,
                serde_json::to_string_pretty(&result.details).unwrap_or_default()
            );
            emit(&cli, &serde_json::to_value(&result).unwrap(), &text);
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(cli: &Cli, value: &Value, text: &str) {
    if cli.json {
        println!("{}", serde_json::to_string(value).expect("serializable"));
    } else {
        println!("{text}");
    }
}

fn construction_value(c: &Construction) -> Value {
    json!({
        "operation": c.output,
        "term": c.term,
        "inputs": c.inputs,
    })
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let loader = Loader {
        fixtures_dir: cli.fixtures.clone(),
    };
    let scan_cap = cli.budget.unwrap_or(DEFAULT_SCAN_CAP) as u128;
    match &cli.cmd {
        Cmd::Op(op) => {
            let out = match op {
                OpCmd::Project {
                    domain,
                    arity,
                    coord,
                } => make_projection(*domain, *arity, *coord)?,
                OpCmd::Minor { op, map } => {
                    let f = loader.operation(op)?;
                    let vm = loader.varmap(map)?;
                    f.minor(&vm)?
                }
                OpCmd::Compose { head, args } => {
                    let f = loader.operation(head)?;
                    let gs = loader.operations(args)?;
                    f.compose(&gs)?
                }
            };
            let text = format!("{out:?}");
            Ok(Outcome::Success(serde_json::to_value(&out)?, text))
        }
        Cmd::Check(args) => check(args, &loader, scan_cap),
        Cmd::Pol(args) => {
            let s = loader.structure(&args.structure)?;
            let found = pol_symmetric(
                s.domain_size(),
                &s.relation_list(),
                args.arity,
                args.symmetry.into(),
                scan_cap,
            )?;
            let value = json!({"count": found.len(), "operations": found});
            let text = format!("{} polymorphisms of arity {}", found.len(), args.arity);
            Ok(Outcome::Success(value, text))
        }
        Cmd::Invclosure(args) => {
            let gens = loader.operations(&args.ops)?;
            let seed = loader.relation(&args.relation)?;
            let closed = inv_closure(&gens, &seed)?;
            let text = format!("closed to {} tuples", closed.len());
            Ok(Outcome::Success(serde_json::to_value(&closed)?, text))
        }
        Cmd::Essential(args) => {
            let r = loader.relation(&args.relation)?;
            let ess = essential_tuples(&r);
            debug_assert_eq!(!ess.is_empty(), is_essential(&r));
            let text = format!(
                "{} essential tuples (essential: {})",
                ess.len(),
                !ess.is_empty()
            );
            let value = json!({"is_essential": !ess.is_empty(), "essential_tuples": ess});
            Ok(Outcome::Success(value, text))
        }
        Cmd::Blocks(args) => {
            let r = loader.relation(&args.relation)?;
            let bs = blocks(&r);
            let mut rendered = Vec::new();
            for b in &bs {
                let group = if !b.is_trivial && b.product_factors.is_some() {
                    clonelab_core::rel::block_group_structure(&r, b)
                        .ok()
                        .flatten()
                } else {
                    None
                };
                rendered.push(json!({
                    "members": b.member_tuples.iter().collect::<Vec<_>>(),
                    "trivial": b.is_trivial,
                    "factors": b.product_factors.as_ref().map(|fs| {
                        fs.iter().map(|f| f.iter().collect::<Vec<_>>()).collect::<Vec<_>>()
                    }),
                    "group": group.map(|g| json!({
                        "name": g.group.name,
                        "order": g.group.order,
                        "maps": g.maps,
                    })),
                }));
            }
            let text = format!("{} blocks", bs.len());
            Ok(Outcome::Success(Value::Array(rendered), text))
        }
        Cmd::Critical(args) => {
            let r = loader.relation(&args.relation)?;
            let gens = loader.operations(&args.gens)?;
            let budget = cli.budget.unwrap_or(1 << 24) as usize;
            let verdict = is_critical(&r, &gens, args.gens_complete, budget)?;
            let value = json!({"verdict": verdict});
            let text = format!("{verdict:?}");
            match verdict {
                Criticality::NotCritical => Ok(Outcome::Negative(value, text)),
                _ => Ok(Outcome::Success(value, text)),
            }
        }
        Cmd::Decomposable(args) => {
            let r = loader.relation(&args.relation)?;
            let result = is_n_decomposable(&r, args.n)?;
            let value = json!({"n": args.n, "decomposable": result});
            let text = format!("{}-decomposable: {result}", args.n);
            if result {
                Ok(Outcome::Success(value, text))
            } else {
                Ok(Outcome::Negative(value, text))
            }
        }
        Cmd::Hom(args) => {
            let a = loader.structure(&args.from)?;
            let b = loader.structure(&args.to)?;
            match find_homomorphism(&a, &b)? {
                Some(h) => Ok(Outcome::Success(
                    json!({"found": true, "map": h.map()}),
                    format!("homomorphism: {:?}", h.map()),
                )),
                None => Ok(Outcome::Negative(
                    json!({"found": false}),
                    "no homomorphism".to_string(),
                )),
            }
        }
        Cmd::Core(args) => {
            let a = loader.structure(&args.structure)?;
            let out = core_of(&a)?;
            let value = json!({
                "subset": out.subset,
                "core": out.core,
                "retraction": out.retraction,
            });
            let text = format!("core on {:?}", out.subset);
            Ok(Outcome::Success(value, text))
        }
        Cmd::Pppower(args) => {
            let a = loader.structure(&args.structure)?;
            let defs = loader.pp_definitions(&args.defs)?;
            let power = pp_power(&a, args.power, &defs, scan_cap)?;
            let text = format!("power structure on {} elements", power.domain_size());
            Ok(Outcome::Success(serde_json::to_value(&power)?, text))
        }
        Cmd::Construct(c) => construct(c, &loader),
        Cmd::Free(f) => free(f, &loader, scan_cap),
        Cmd::Verify(args) => {
            let params = VerifyParams {
                p: args.p,
                n: args.n,
                fixture: args.fixture.clone(),
                budget: cli.budget,
                seed: cli.seed,
                generators: match &args.gens {
                    None => None,
                    Some(refs) => Some(loader.operations(refs)?),
                },
            };
            Ok(Outcome::Verifier(run_verifier(&args.name, &params, &loader)?))
        }
    }
}

fn check(args: &CheckArgs, loader: &Loader, cap: u128) -> Result<Outcome> {
    let condition = loader.condition(&args.condition, args.p, args.n)?;
    if let Some(ops) = &args.ops {
        let ops = loader.operations(ops)?;
        let symbols: Vec<&String> = condition.symbols().keys().collect();
        if ops.len() != symbols.len() {
            bail!(
                "condition `{}` declares {} symbols, {} operations given",
                condition.name(),
                symbols.len(),
                ops.len()
            );
        }
        let assignment: BTreeMap<String, Operation> = symbols
            .into_iter()
            .cloned()
            .zip(ops)
            .collect();
        let failure = first_failure(&assignment, &condition)?;
        debug_assert_eq!(failure.is_none(), satisfies(&assignment, &condition)?);
        return Ok(match failure {
            None => Outcome::Success(
                json!({"condition": condition.name(), "satisfied": true}),
                format!("{} satisfied", condition.name()),
            ),
            Some(f) => Outcome::Negative(
                json!({"condition": condition.name(), "satisfied": false, "counterexample": f}),
                format!(
                    "{} violated: {} at {:?}",
                    condition.name(),
                    f.identity,
                    f.valuation
                ),
            ),
        });
    }
    let structure_ref = args
        .structure
        .as_ref()
        .ok_or_else(|| anyhow!("check requires --ops or --structure"))?;
    let structure = loader.structure(structure_ref)?;
    let outcome = find_witness(
        WitnessSource::Polymorphisms {
            structure: &structure,
            symmetry: args.symmetry.into(),
        },
        &condition,
        cap as u64,
    )?;
    let value = json!({
        "condition": condition.name(),
        "witness": outcome.assignment,
        "definitive": outcome.definitive,
        "candidates_tried": outcome.candidates_tried,
    });
    match &outcome.assignment {
        Some(a) => {
            let text = format!("witness found: {:?}", a.keys().collect::<Vec<_>>());
            Ok(Outcome::Success(value, text))
        }
        None => {
            let text = if outcome.definitive {
                "no witness (definitive)".to_string()
            } else {
                "no witness (budget exhausted)".to_string()
            };
            if outcome.definitive {
                Ok(Outcome::Negative(value, text))
            } else {
                Err(anyhow!("witness search budget exhausted without coverage"))
            }
        }
    }
}

fn construct(cmd: &ConstructCmd, loader: &Loader) -> Result<Outcome> {
    let pipeline_m3c = || -> Result<Operation> {
        Ok(standard_pipeline_e3()?.symmetric_minority)
    };
    match cmd {
        ConstructCmd::Maj { mprime, c2, c3 } => {
            let built = symmetrize_majority(
                &loader.operation(mprime)?,
                &loader.operation(c2)?,
                &loader.operation(c3)?,
            )?;
            Ok(Outcome::Success(
                construction_value(&built),
                format!("{:?}", built.output),
            ))
        }
        ConstructCmd::Min {
            malcev,
            majority,
            c2,
            c3,
        } => {
            let raw = minority_from_malcev_majority(
                &loader.operation(malcev)?,
                &loader.operation(majority)?,
            )?;
            let built = match (c2, c3) {
                (Some(c2), Some(c3)) => symmetrize_minority(
                    &raw.output,
                    &loader.operation(c2)?,
                    &loader.operation(c3)?,
                )?,
                (None, None) => raw,
                _ => bail!("--c2 and --c3 must be given together"),
            };
            Ok(Outcome::Success(
                construction_value(&built),
                format!("{:?}", built.output),
            ))
        }
        ConstructCmd::Dswitch { m3c } => {
            let m3c = match m3c {
                Some(r) => loader.operation(r)?,
                None => pipeline_m3c()?,
            };
            let built = d_switch(&m3c)?;
            let c = constant_of_symmetric(&m3c)?;
            let mut value = construction_value(&built);
            value["constant"] = json!(c);
            Ok(Outcome::Success(value, format!("{:?}", built.output)))
        }
        ConstructCmd::Genmin { m3c, n } => {
            let m3c = match m3c {
                Some(r) => loader.operation(r)?,
                None => pipeline_m3c()?,
            };
            let built = generalized_minority(&m3c, *n)?;
            Ok(Outcome::Success(
                construction_value(&built),
                format!("generalized minority of arity {n} built"),
            ))
        }
        ConstructCmd::Ts {
            minority,
            majority,
            s2,
            n,
        } => {
            let pipeline = standard_pipeline_e3()?;
            let minority = match minority {
                Some(r) => loader.operation(r)?,
                None => pipeline.symmetric_minority.clone(),
            };
            let majority = match majority {
                Some(r) => loader.operation(r)?,
                None => pipeline.symmetric_majority.clone(),
            };
            let chain = totally_symmetric_chain(&minority, &majority, &loader.operation(s2)?, *n)?;
            let value = json!({
                "chain": chain.iter().map(construction_value).collect::<Vec<_>>(),
            });
            Ok(Outcome::Success(
                value,
                format!("totally symmetric chain up to arity {n}"),
            ))
        }
        ConstructCmd::Polyrep { op } => {
            let rep = poly_rep(&loader.operation(op)?)?;
            let text = format!("{} monomials", rep.monomials.len());
            Ok(Outcome::Success(serde_json::to_value(&rep)?, text))
        }
        ConstructCmd::Xi { op, max_ts, max_gm } => {
            let chains = SymmetricChainPair::standard_e3(*max_ts, *max_gm)?;
            let f = loader.operation(op)?;
            let built = xi(&f, &chains)?;
            let mut value = construction_value(&built);
            value["poly_rep"] = serde_json::to_value(poly_rep(&f)?)?;
            Ok(Outcome::Success(value, format!("{:?}", built.output)))
        }
    }
}

fn free(cmd: &FreeCmd, loader: &Loader, cap: u128) -> Result<Outcome> {
    let describe = |report: &clonelab_core::ppcon::FreeStructureReport| {
        format!(
            "free structure on {} elements ({})",
            report.structure.domain_size(),
            if report.condition_witness.is_some() {
                "condition satisfied"
            } else {
                "split witnessed"
            }
        )
    };
    // With --pol the scan is skipped and the completeness flag is the
    // caller's claim; otherwise the exhaustive scan is complete by
    // construction.
    let resolve = |a: &clonelab_core::rel::Structure,
                   arity: usize,
                   pol_refs: &Option<Vec<String>>,
                   complete: bool|
     -> Result<(Vec<Operation>, bool)> {
        match pol_refs {
            Some(refs) => Ok((loader.operations(refs)?, complete)),
            None => Ok((
                clonelab_core::rel::pol(a.domain_size(), &a.relation_list(), arity, cap)?,
                true,
            )),
        }
    };
    match cmd {
        FreeCmd::Malcev {
            fixture,
            pol,
            complete,
        } => {
            let a = loader.structure(fixture)?;
            let (pol3, exhaustive) = resolve(&a, 3, pol, *complete)?;
            let report = free_structure_malcev(&a, &pol3, exhaustive)?;
            let text = describe(&report);
            Ok(Outcome::Success(serde_json::to_value(&report)?, text))
        }
        FreeCmd::Cycle {
            fixture,
            p,
            pol,
            complete,
        } => {
            let a = loader.structure(fixture)?;
            let (polp, exhaustive) = resolve(&a, *p, pol, *complete)?;
            let report = free_structure_cycle(&a, *p, &polp, exhaustive)?;
            let text = describe(&report);
            Ok(Outcome::Success(serde_json::to_value(&report)?, text))
        }
    }
}
