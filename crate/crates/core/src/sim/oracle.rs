use alloc::collections::BTreeSet;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::attributes::Attribute;
use crate::bundle::{resolve_edit_methods, BugBundle, MethodIndex, ReferenceFix};
use crate::engine::Answer;
use crate::trace::{coverage_profile, variable_profile, LinePoint, ValuePoint};

/// Ground truth derived from the reference fix and its run.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OracleProfile {
    pub true_methods: BTreeSet<String>,
    pub true_coverage: BTreeSet<LinePoint>,
    pub true_values: BTreeSet<ValuePoint>,
}

impl OracleProfile {
    pub fn from_reference(reference: &ReferenceFix, method_map: &[crate::bundle::MethodSpan]) -> Self {
        let index = MethodIndex::new(method_map);
        let all_methods: BTreeSet<String> = method_map.iter().map(|s| s.method.clone()).collect();
        let (true_methods, _) = resolve_edit_methods(&reference.edits, &index, "reference");
        OracleProfile {
            true_methods,
            true_coverage: coverage_profile(&reference.run, &all_methods, &index),
            true_values: variable_profile(&reference.run, &all_methods),
        }
    }

    pub fn from_bundle(bundle: &BugBundle) -> Option<Self> {
        bundle.reference.as_ref().map(|r| OracleProfile::from_reference(r, &bundle.method_map))
    }

    pub fn holds(&self, attr: &Attribute) -> bool {
        match attr {
            Attribute::ModifiedMethod { method } => self.true_methods.contains(method),
            Attribute::ExecutionTrace { method, line } => self.true_coverage.contains(&LinePoint::new(method.as_str(), *line)),
            Attribute::VariableValue { method, boundary, var, value } => {
                self.true_values.contains(&ValuePoint::new(method.as_str(), *boundary, var.as_str(), value.clone()))
            }
        }
    }

    pub fn answer(&self, attr: &Attribute) -> Answer {
        Answer::from_bool(self.holds(attr))
    }
}
