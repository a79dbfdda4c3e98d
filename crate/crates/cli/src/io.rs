//! Input resolution for the CLI: `@name` catalog operations, fixture
//! structures by name (from a fixtures directory or the embedded copies),
//! inline JSON, and plain file paths.

use std::fmt;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::de::{DeserializeOwned, MapAccess, Visitor};
use serde::Deserializer;

use clonelab_core::catalog;
use clonelab_core::conditions::MinorCondition;
use clonelab_core::ops::{Operation, VarMap};
use clonelab_core::ppcon::PPFormula;
use clonelab_core::rel::{Relation, Structure};

const EMBEDDED_FIXTURES: &[(&str, &str)] = &[
    ("b2", include_str!("../../../fixtures/b2.json")),
    ("c1", include_str!("../../../fixtures/c1.json")),
    ("c2", include_str!("../../../fixtures/c2.json")),
    ("c3", include_str!("../../../fixtures/c3.json")),
    ("c4", include_str!("../../../fixtures/c4.json")),
    ("i2", include_str!("../../../fixtures/i2.json")),
    ("i3", include_str!("../../../fixtures/i3.json")),
    ("k21", include_str!("../../../fixtures/k21.json")),
];

#[derive(Clone, Default)]
pub struct Loader {
    pub fixtures_dir: Option<PathBuf>,
}

fn parse_ref<T: DeserializeOwned>(what: &str, reference: &str) -> Result<T> {
    let text = if reference.trim_start().starts_with(['{', '[']) {
        reference.to_string()
    } else {
        std::fs::read_to_string(reference)
            .with_context(|| format!("reading {what} from `{reference}`"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing {what} from `{reference}`"))
}

impl Loader {
    /// Resolves an operation reference: `@name` for a catalog operation,
    /// inline JSON, or a file path.
    pub fn operation(&self, reference: &str) -> Result<Operation> {
        if let Some(name) = reference.strip_prefix('@') {
            return Ok(catalog::operation_by_name(name)?);
        }
        parse_ref("operation", reference)
    }

    pub fn operations(&self, references: &[String]) -> Result<Vec<Operation>> {
        references.iter().map(|s| self.operation(s)).collect()
    }

    /// Resolves a structure reference: a fixture name (taken from the
    /// fixtures directory when given, the embedded copy otherwise), inline
    /// JSON, or a file path.
    pub fn structure(&self, reference: &str) -> Result<Structure> {
        if catalog::STRUCTURE_NAMES.contains(&reference) {
            if let Some(dir) = &self.fixtures_dir {
                let path = dir.join(format!("{reference}.json"));
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading fixture `{}`", path.display()))?;
                return serde_json::from_str(&text)
                    .with_context(|| format!("parsing fixture `{}`", path.display()));
            }
            let (_, text) = EMBEDDED_FIXTURES
                .iter()
                .find(|(n, _)| *n == reference)
                .expect("all catalog names embedded");
            return Ok(serde_json::from_str(text).expect("embedded fixtures parse"));
        }
        parse_ref("structure", reference)
    }

    pub fn relation(&self, reference: &str) -> Result<Relation> {
        parse_ref("relation", reference)
    }

    pub fn varmap(&self, reference: &str) -> Result<VarMap> {
        parse_ref("variable map", reference)
    }

    /// Resolves a condition: a builtin shorthand with its parameter, or a
    /// condition JSON reference.
    pub fn condition(
        &self,
        name: &str,
        p: Option<usize>,
        n: Option<usize>,
    ) -> Result<MinorCondition> {
        const BUILTINS: &[&str] = &[
            "sigma_p",
            "quasi_minority",
            "quasi_malcev",
            "quasi_majority",
            "fs",
            "ts",
            "gm",
            "wnu",
            "qnu",
        ];
        if BUILTINS.contains(&name) {
            let param = match name {
                "sigma_p" => p,
                "quasi_minority" | "quasi_malcev" | "quasi_majority" => None,
                _ => n,
            };
            return Ok(MinorCondition::builtin(name, param)?);
        }
        parse_ref("condition", name)
    }

    /// Parses a named list of pp formulas, preserving document order.
    pub fn pp_definitions(&self, reference: &str) -> Result<Vec<(String, PPFormula)>> {
        let text = if reference.trim_start().starts_with('{') {
            reference.to_string()
        } else {
            std::fs::read_to_string(reference)
                .with_context(|| format!("reading pp definitions from `{reference}`"))?
        };
        struct DefsVisitor;
        impl<'de> Visitor<'de> for DefsVisitor {
            type Value = Vec<(String, PPFormula)>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of relation name to pp formula")
            }
            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(entry) = access.next_entry::<String, PPFormula>()? {
                    out.push(entry);
                }
                Ok(out)
            }
        }
        let mut de = serde_json::Deserializer::from_str(&text);
        let defs = de
            .deserialize_map(DefsVisitor)
            .with_context(|| format!("parsing pp definitions from `{reference}`"))?;
        de.end().context("trailing content after pp definitions")?;
        if defs.is_empty() {
            bail!("pp definitions are empty");
        }
        Ok(defs)
    }
}
