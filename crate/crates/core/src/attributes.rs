//! Preparing stage: attribute extraction and question construction.
//!
//! Three attribute families are derived from the patches and their runs of
//! the failing test. Every attribute maps to the set of patches that exhibit
//! it; attributes held by every patch or by none cannot discriminate and are
//! dropped before questions are built.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bundle::{BugBundle, Patch, PatchId};
use crate::trace::{coverage_profile, variable_profile, Boundary, LinePoint, Scalar, ValuePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ModifiedMethod,
    ExecutionTrace,
    VariableValue,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::ModifiedMethod, Family::ExecutionTrace, Family::VariableValue];

    pub fn name(self) -> &'static str {
        match self {
            Family::ModifiedMethod => "modified_method",
            Family::ExecutionTrace => "execution_trace",
            Family::VariableValue => "variable_value",
        }
    }

    /// One-letter flag form: `m`, `t`, `v`.
    pub fn letter(self) -> char {
        match self {
            Family::ModifiedMethod => 'm',
            Family::ExecutionTrace => 't',
            Family::VariableValue => 'v',
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown attribute family `{0}` (expected m, t, v or a full family name)")]
pub struct UnknownFamily(pub String);

impl FromStr for Family {
    type Err = UnknownFamily;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "m" | "mm" | "method" | "modified_method" => Ok(Family::ModifiedMethod),
            "t" | "et" | "trace" | "execution_trace" => Ok(Family::ExecutionTrace),
            "v" | "vv" | "value" | "variable_value" => Ok(Family::VariableValue),
            other => Err(UnknownFamily(other.into())),
        }
    }
}

/// A subset of the attribute families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FamilySet(u8);

impl FamilySet {
    pub const fn all() -> Self {
        FamilySet(0b111)
    }

    pub fn only(family: Family) -> Self {
        FamilySet(family.bit())
    }

    pub fn contains(self, family: Family) -> bool {
        self.0 & family.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Family> {
        Family::ALL.into_iter().filter(move |f| self.contains(*f))
    }
}

impl Default for FamilySet {
    fn default() -> Self {
        FamilySet::all()
    }
}

impl FromIterator<Family> for FamilySet {
    fn from_iter<I: IntoIterator<Item = Family>>(iter: I) -> Self {
        FamilySet(iter.into_iter().fold(0, |acc, f| acc | f.bit()))
    }
}

impl FromStr for FamilySet {
    type Err = UnknownFamily;

    /// Comma-separated families, e.g. `m,t,v` or `execution_trace`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "all" {
            return Ok(FamilySet::all());
        }
        s.split(',').filter(|p| !p.trim().is_empty()).map(Family::from_str).collect()
    }
}

impl fmt::Display for FamilySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for family in self.iter() {
            if !first {
                f.write_char(',')?;
            }
            f.write_char(family.letter())?;
            first = false;
        }
        Ok(())
    }
}

impl Serialize for FamilySet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FamilySet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A checkable program property induced by a patch. Variant order is the
/// family order used when listing questions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Attribute {
    ModifiedMethod { method: String },
    ExecutionTrace { method: String, line: u32 },
    VariableValue { method: String, boundary: Boundary, var: String, value: Scalar },
}

impl Attribute {
    pub fn family(&self) -> Family {
        match self {
            Attribute::ModifiedMethod { .. } => Family::ModifiedMethod,
            Attribute::ExecutionTrace { .. } => Family::ExecutionTrace,
            Attribute::VariableValue { .. } => Family::VariableValue,
        }
    }

    pub fn method(&self) -> &str {
        match self {
            Attribute::ModifiedMethod { method } | Attribute::ExecutionTrace { method, .. } | Attribute::VariableValue { method, .. } => {
                method
            }
        }
    }

    /// The question shown to the developer.
    pub fn text(&self) -> String {
        match self {
            Attribute::ModifiedMethod { method } => format!("The method {method} should be patched"),
            Attribute::ExecutionTrace { method, line } => {
                format!("The statement at line {line} in method {method} should be executed")
            }
            Attribute::VariableValue { var, value, .. } => format!("The value {value} assigned to {var} is correct"),
        }
    }

    fn key(&self) -> String {
        match self {
            Attribute::ModifiedMethod { method } => format!("mm\0{method}"),
            Attribute::ExecutionTrace { method, line } => format!("et\0{method}\0{line}"),
            Attribute::VariableValue { method, boundary, var, value } => {
                let kind = match value {
                    Scalar::Bool(_) => 'b',
                    Scalar::Int(_) => 'i',
                    Scalar::Float(_) => 'f',
                    Scalar::Str(_) => 's',
                };
                format!("vv\0{method}\0{boundary}\0{var}\0{kind}:{value}")
            }
        }
    }

    /// Content-derived id, stable across rebuilds of the same bundle.
    pub fn question_id(&self) -> QuestionId {
        let digest = Sha256::digest(self.key().as_bytes());
        let mut id = String::from("q-");
        for byte in &digest[..8] {
            let _ = write!(id, "{byte:02x}");
        }
        QuestionId(id)
    }

    pub fn of_line(point: &LinePoint) -> Self {
        Attribute::ExecutionTrace { method: point.method.clone(), line: point.line }
    }

    pub fn of_value(point: &ValuePoint) -> Self {
        Attribute::VariableValue {
            method: point.method.clone(),
            boundary: point.boundary,
            var: point.var.clone(),
            value: point.value.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(pub String);

impl QuestionId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum QuestionState {
    Unclear,
    Yes,
    No,
}

/// A yes/no question about an attribute, paired with the patches that make
/// the answer yes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractiveQuestion {
    pub id: QuestionId,
    pub attribute: Attribute,
    pub patches: BTreeSet<PatchId>,
    pub state: QuestionState,
}

impl InteractiveQuestion {
    pub fn new(attribute: Attribute, patches: BTreeSet<PatchId>) -> Self {
        InteractiveQuestion { id: attribute.question_id(), attribute, patches, state: QuestionState::Unclear }
    }

    pub fn family(&self) -> Family {
        self.attribute.family()
    }
}

pub type AttributeMap = BTreeMap<Attribute, BTreeSet<PatchId>>;

pub fn extract_modified_method_attrs(patches: &[Patch]) -> AttributeMap {
    let mut map = AttributeMap::new();
    for patch in patches {
        for method in &patch.modified_methods {
            map.entry(Attribute::ModifiedMethod { method: method.clone() }).or_default().insert(patch.id.clone());
        }
    }
    map
}

fn invert<P>(profiles: &BTreeMap<PatchId, BTreeSet<P>>, attr: impl Fn(&P) -> Attribute) -> AttributeMap {
    let mut map = AttributeMap::new();
    for (id, profile) in profiles {
        for point in profile {
            map.entry(attr(point)).or_default().insert(id.clone());
        }
    }
    map
}

pub fn extract_trace_attrs(profiles: &BTreeMap<PatchId, BTreeSet<LinePoint>>) -> AttributeMap {
    invert(profiles, Attribute::of_line)
}

pub fn extract_variable_attrs(profiles: &BTreeMap<PatchId, BTreeSet<ValuePoint>>) -> AttributeMap {
    invert(profiles, Attribute::of_value)
}

/// Turns attribute maps into questions, dropping attributes whose patch set
/// is empty or covers every patch. Output is sorted by attribute (family,
/// then method, then line or variable).
pub fn build_questions<'a>(
    maps: impl IntoIterator<Item = &'a AttributeMap>,
    all_patches: &BTreeSet<PatchId>,
    families: FamilySet,
) -> Vec<InteractiveQuestion> {
    let mut merged: BTreeMap<&Attribute, &BTreeSet<PatchId>> = BTreeMap::new();
    for map in maps {
        for (attr, patches) in map {
            if families.contains(attr.family()) {
                merged.insert(attr, patches);
            }
        }
    }
    merged
        .into_iter()
        .filter_map(|(attr, patches)| {
            let scoped: BTreeSet<PatchId> = patches.intersection(all_patches).cloned().collect();
            (!scoped.is_empty() && scoped.len() < all_patches.len()).then(|| InteractiveQuestion::new(attr.clone(), scoped))
        })
        .collect()
}

/// Per-patch coverage and variable profiles, restricted to methods modified
/// by at least one patch.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatchProfiles {
    pub coverage: BTreeMap<PatchId, BTreeSet<LinePoint>>,
    pub values: BTreeMap<PatchId, BTreeSet<ValuePoint>>,
}

pub fn patch_profiles(bundle: &BugBundle) -> PatchProfiles {
    let index = bundle.index();
    let modified = bundle.modified_methods();
    let mut profiles = PatchProfiles::default();
    for patch in &bundle.patches {
        let Some(log) = bundle.patch_traces.get(&patch.id) else { continue };
        profiles.coverage.insert(patch.id.clone(), coverage_profile(log, &modified, &index));
        profiles.values.insert(patch.id.clone(), variable_profile(log, &modified));
    }
    profiles
}

/// The whole preparing stage for one bundle.
pub fn prepare(bundle: &BugBundle, families: FamilySet) -> Vec<InteractiveQuestion> {
    let profiles = patch_profiles(bundle);
    let maps =
        [extract_modified_method_attrs(&bundle.patches), extract_trace_attrs(&profiles.coverage), extract_variable_attrs(&profiles.values)];
    build_questions(&maps, &bundle.patch_ids(), families)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn ids(xs: &[&str]) -> BTreeSet<PatchId> {
        xs.iter().map(|x| PatchId::from(*x)).collect()
    }

    fn patch(id: &str, methods: &[&str]) -> Patch {
        let mut p = Patch::new(id, None, vec![]);
        p.modified_methods = methods.iter().map(|m| String::from(*m)).collect();
        p
    }

    fn mm(m: &str) -> Attribute {
        Attribute::ModifiedMethod { method: m.into() }
    }

    fn et(m: &str, line: u32) -> Attribute {
        Attribute::ExecutionTrace { method: m.into(), line }
    }

    #[test]
    fn modified_method_attrs_group_patches() {
        let map = extract_modified_method_attrs(&[patch("p1", &["eval"]), patch("p2", &["eval"]), patch("p3", &["evaluate"])]);
        assert_eq!(map, AttributeMap::from([(mm("eval"), ids(&["p1", "p2"])), (mm("evaluate"), ids(&["p3"]))]));
        let single = extract_modified_method_attrs(&[patch("p", &["a", "b"])]);
        assert_eq!(single.len(), 2);
    }

    #[test]
    fn same_method_sets_are_universal_and_pruned() {
        let map = extract_modified_method_attrs(&[patch("p1", &["f"]), patch("p2", &["f"])]);
        assert_eq!(map[&mm("f")], ids(&["p1", "p2"]));
        assert!(build_questions([&map], &ids(&["p1", "p2"]), FamilySet::all()).is_empty());
    }

    #[test]
    fn trace_attrs_invert_coverage() {
        let profiles = BTreeMap::from([
            (PatchId::from("p1"), BTreeSet::from([LinePoint::new("eval", 321)])),
            (PatchId::from("p2"), BTreeSet::from([LinePoint::new("eval", 321)])),
            (PatchId::from("p3"), BTreeSet::new()),
        ]);
        assert_eq!(extract_trace_attrs(&profiles), AttributeMap::from([(et("eval", 321), ids(&["p1", "p2"]))]));
    }

    #[test]
    fn empty_variable_profiles_give_no_attrs() {
        assert!(extract_variable_attrs(&BTreeMap::new()).is_empty());
    }

    #[test]
    fn running_example_questions() {
        let all = ids(&["p1", "p2", "p3"]);
        let mm_map = extract_modified_method_attrs(&[patch("p1", &["eval"]), patch("p2", &["eval"]), patch("p3", &["evaluate"])]);
        let et_map = AttributeMap::from([(et("eval", 320), all.clone()), (et("eval", 321), ids(&["p1", "p2"]))]);
        let qs = build_questions([&mm_map, &et_map], &all, FamilySet::all());
        let attrs: Vec<_> = qs.iter().map(|q| q.attribute.clone()).collect();
        assert_eq!(attrs, vec![mm("eval"), mm("evaluate"), et("eval", 321)]);
        assert!(qs.iter().all(|q| q.state == QuestionState::Unclear));

        let only_trace = build_questions([&mm_map, &et_map], &all, FamilySet::only(Family::ExecutionTrace));
        assert_eq!(only_trace.len(), 1);
    }

    #[test]
    fn question_text_templates() {
        assert_eq!(mm("Variance#evaluate").text(), "The method Variance#evaluate should be patched");
        assert_eq!(et("Variance#eval", 321).text(), "The statement at line 321 in method Variance#eval should be executed");
        let vv =
            Attribute::VariableValue { method: "evaluate".into(), boundary: Boundary::Exit, var: "var".into(), value: Scalar::Float(1.25) };
        assert_eq!(vv.text(), "The value 1.25 assigned to var is correct");
    }

    #[test]
    fn question_ids_are_content_hashes() {
        assert_eq!(et("eval", 321).question_id(), et("eval", 321).question_id());
        assert_ne!(et("eval", 321).question_id(), et("eval", 322).question_id());
        let int = Attribute::VariableValue { method: "f".into(), boundary: Boundary::Entry, var: "x".into(), value: Scalar::Int(3) };
        let float = Attribute::VariableValue { method: "f".into(), boundary: Boundary::Entry, var: "x".into(), value: Scalar::Float(3.0) };
        assert_ne!(int.question_id(), float.question_id());
        assert_eq!(int.question_id().as_str().len(), 18);
    }

    #[test]
    fn family_set_parsing() {
        assert_eq!("m,t,v".parse::<FamilySet>().unwrap(), FamilySet::all());
        assert_eq!("t".parse::<FamilySet>().unwrap(), FamilySet::only(Family::ExecutionTrace));
        assert_eq!(FamilySet::all().to_string(), "m,t,v");
        assert!("m,x".parse::<FamilySet>().is_err());
    }
}
